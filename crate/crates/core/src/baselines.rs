//! Reference schemes and the single-UAV rate bound.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{log2_1p, PowerProfile, RateReport, Scenario, Schedule, ScheduleMode, Trajectory};
use crate::model::evaluate_rates;
use crate::planner::{
    init_circular_trajectories, reconstruct_binary_schedule, run_bcd, BcdConfig, SolveReport,
};
use crate::scheduling::ActivityMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    /// Scheduling, trajectory and power all optimized.
    Joint,
    /// Scheduling and trajectory optimized at full power.
    NoPowerControl,
    /// Scheduling only, on the initial circles at full power.
    CircularFullPower,
    /// Hovering UAVs; scheduling, and power when there are several UAVs.
    StaticUav,
    /// Round-robin transmission, one UAV per slot.
    Orthogonal,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::Joint,
        SchemeId::NoPowerControl,
        SchemeId::CircularFullPower,
        SchemeId::StaticUav,
        SchemeId::Orthogonal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Joint => "joint",
            SchemeId::NoPowerControl => "no_power_control",
            SchemeId::CircularFullPower => "circular_full_power",
            SchemeId::StaticUav => "static",
            SchemeId::Orthogonal => "orthogonal",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(SchemeId::Joint),
            "no_power_control" | "no-power-control" => Ok(SchemeId::NoPowerControl),
            "circular_full_power" | "circular-full-power" | "circular" => {
                Ok(SchemeId::CircularFullPower)
            }
            "static" | "static_uav" | "static-uav" => Ok(SchemeId::StaticUav),
            "orthogonal" => Ok(SchemeId::Orthogonal),
            other => Err(Error::param("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Everything needed to run one scheme.
#[derive(Debug, Clone)]
pub struct SchemeSetup {
    pub config: BcdConfig,
    pub trajectory: Trajectory,
    pub power: PowerProfile,
}

/// Hovering at the users' center (one UAV) or at the packing centers.
pub fn static_uav_scheme(scenario: &Scenario) -> Result<SchemeSetup> {
    let (_, spec) = init_circular_trajectories(scenario)?;
    let trajectory = Trajectory::stationary(&spec.circle_centers, scenario.num_slots());
    Ok(SchemeSetup {
        config: BcdConfig {
            optimize_trajectory: false,
            optimize_power: scenario.num_uavs() >= 2,
            ..BcdConfig::from_scenario(scenario)
        },
        trajectory,
        power: PowerProfile::full(scenario),
    })
}

/// Round-robin masks: UAV `m` transmits only in slots `n` with `n % M == m`.
pub fn orthogonal_scheme(scenario: &Scenario) -> Result<SchemeSetup> {
    let (mm, nn) = (scenario.num_uavs(), scenario.num_slots());
    if nn % mm != 0 {
        return Err(Error::Domain(format!(
            "orthogonal scheme needs the slot count ({nn}) to be a multiple of the UAV count ({mm})"
        )));
    }
    let mask = ActivityMask::round_robin(mm, nn);
    let (trajectory, _) = init_circular_trajectories(scenario)?;
    let mut power = PowerProfile::full(scenario);
    for m in 0..mm {
        for n in 0..nn {
            if !mask.is_active(m, n) {
                power.set(m, n, 0.0);
            }
        }
    }
    Ok(SchemeSetup {
        config: BcdConfig {
            activity_mask: Some(mask),
            ..BcdConfig::from_scenario(scenario)
        },
        trajectory,
        power,
    })
}

pub fn scheme_setup(scenario: &Scenario, scheme: SchemeId) -> Result<SchemeSetup> {
    match scheme {
        SchemeId::StaticUav => static_uav_scheme(scenario),
        SchemeId::Orthogonal => orthogonal_scheme(scenario),
        SchemeId::Joint | SchemeId::NoPowerControl | SchemeId::CircularFullPower => {
            let (trajectory, _) = init_circular_trajectories(scenario)?;
            Ok(SchemeSetup {
                config: BcdConfig {
                    optimize_trajectory: scheme != SchemeId::CircularFullPower,
                    optimize_power: scheme == SchemeId::Joint,
                    ..BcdConfig::from_scenario(scenario)
                },
                trajectory,
                power: PowerProfile::full(scenario),
            })
        }
    }
}

/// Relaxed solution plus its binary reconstruction.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: SchemeId,
    pub report: SolveReport,
    pub binary_schedule: Schedule,
    pub binary_rates: RateReport,
}

/// Runs a scheme end to end. `adjust` may tweak the BCD configuration.
pub fn run_scheme(
    scenario: &Scenario,
    scheme: SchemeId,
    adjust: impl FnOnce(&mut BcdConfig),
) -> Result<SchemeRun> {
    let mut setup = scheme_setup(scenario, scheme)?;
    adjust(&mut setup.config);
    let report = run_bcd(scenario, &setup.config, &setup.trajectory, &setup.power)?;
    let binary_schedule = reconstruct_binary_schedule(&report.schedule, scenario.subslot_factor())?;
    let binary_rates = evaluate_rates(scenario, &binary_schedule, &report.trajectory, &report.power)?;
    Ok(SchemeRun {
        scheme,
        report,
        binary_schedule,
        binary_rates,
    })
}

/// `(1/K) log2(1 + P_max rho0 / (H^2 sigma^2))`: every user hovered over at
/// full power for an equal share of time, with no interference.
pub fn max_min_upper_bound(scenario: &Scenario) -> f64 {
    log2_1p(scenario.hover_snr()) / scenario.num_users() as f64
}

/// Longest cyclic gap between consecutive sub-slots serving each user, in
/// seconds. A user never served waits the whole period.
pub fn access_delay(scenario: &Scenario, schedule: &Schedule) -> Result<Vec<f64>> {
    if schedule.mode() != ScheduleMode::Binary {
        return Err(Error::Domain("access delay needs a binary schedule".into()));
    }
    if schedule.num_users() != scenario.num_users() || schedule.base_slots() != scenario.num_slots() {
        return Err(Error::Shape("schedule does not match the scenario".into()));
    }
    let ns = schedule.num_slots();
    let sub_len = scenario.period() / ns as f64;
    Ok((0..scenario.num_users())
        .map(|k| {
            let served: Vec<usize> = (0..ns).filter(|&s| schedule.user_load(k, s) > 0.0).collect();
            match served.as_slice() {
                [] => scenario.period(),
                [first, ..] => {
                    let mut gap = first + ns - served[served.len() - 1];
                    for w in served.windows(2) {
                        gap = gap.max(w[1] - w[0]);
                    }
                    gap as f64 * sub_len
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point, ScenarioParams};

    fn users(k: usize) -> Scenario {
        Scenario::new(ScenarioParams::with_users(
            (0..k).map(|i| Point::new(100.0 * i as f64, 0.0)).collect(),
        ))
        .unwrap()
    }

    #[test]
    fn upper_bound_values() {
        assert!((max_min_upper_bound(&users(1)) - 9.9672).abs() < 5e-5);
        assert!((max_min_upper_bound(&users(2)) - 4.9836).abs() < 5e-5);
        assert!((max_min_upper_bound(&users(6)) - 1.6612).abs() < 5e-5);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeId::ALL {
            assert_eq!(s.as_str().parse::<SchemeId>().unwrap(), s);
        }
        assert!("bogus".parse::<SchemeId>().is_err());
    }

    fn binary(k: usize, ns_per: usize, served: &[(usize, usize)]) -> (Scenario, Schedule) {
        let s = Scenario::new(ScenarioParams {
            subslot_factor: ns_per,
            ..ScenarioParams::with_users((0..k).map(|i| Point::new(i as f64, 0.0)).collect())
        })
        .unwrap();
        let mut a = Schedule::zeros_subslotted(k, 1, 60, ns_per, ScheduleMode::Binary);
        for &(u, sub) in served {
            a.set(u, 0, sub, 1.0);
        }
        (s, a)
    }

    #[test]
    fn delay_examples() {
        let all: Vec<(usize, usize)> = (0..120).map(|s| (0, s)).collect();
        let (s, a) = binary(1, 2, &all);
        assert!((access_delay(&s, &a).unwrap()[0] - 0.5).abs() < 1e-12);

        let (s, a) = binary(1, 2, &[(0, 17)]);
        assert_eq!(access_delay(&s, &a).unwrap()[0], 60.0);

        let alt: Vec<(usize, usize)> = (0..120).map(|s| (s % 2, s)).collect();
        let (s, a) = binary(2, 2, &alt);
        let d = access_delay(&s, &a).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12 && (d[1] - 1.0).abs() < 1e-12);

        let (s, a) = binary(2, 2, &[(0, 3)]);
        assert_eq!(access_delay(&s, &a).unwrap()[1], 60.0);
    }
}
