//! Block coordinate descent over scheduling, trajectory and power, plus the
//! initialization and the binary reconstruction around it.

mod init;
mod rounding;

use std::time::{Duration, Instant};

pub use init::{init_circular_trajectories, packing_ratio, InitTrajectorySpec, MAX_PACKED_UAVS};
pub use rounding::{reconstruct_binary_schedule, subslot_counts};

use crate::error::{Error, Result};
use crate::model::{
    trajectory_violations, validate_feasibility, PowerProfile, Scenario, Schedule, ScheduleMode,
    Trajectory,
};
use crate::power::{solve_power_block, PowerLocalPoint};
use crate::scheduling::{build_scheduling_lp, solve_scheduling, ActivityMask};
use crate::trajectory::{solve_trajectory_block, TrajectoryLocalPoint};

#[derive(Debug, Clone)]
pub struct BcdConfig {
    /// Stop once the relative increase of eta falls below this.
    pub convergence_threshold: f64,
    /// Upper bound on the number of scheduling solves.
    pub max_iterations: usize,
    pub optimize_trajectory: bool,
    pub optimize_power: bool,
    /// Restricts which UAV may transmit in which slot.
    pub activity_mask: Option<ActivityMask>,
}

impl BcdConfig {
    /// All blocks on, threshold from the scenario, 100 iterations.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self {
            convergence_threshold: scenario.convergence_threshold(),
            max_iterations: 100,
            optimize_trajectory: true,
            optimize_power: true,
            activity_mask: None,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.convergence_threshold > 0.0) {
            return Err(Error::param("convergence_threshold", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Change of the true min rate produced by each block in one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlockDeltas {
    pub trajectory: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlockTimes {
    pub scheduling: Duration,
    pub trajectory: Duration,
    pub power: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Min rate after each scheduling solve.
    pub trace: Vec<f64>,
    pub block_deltas: Vec<BlockDeltas>,
    pub schedule: Schedule,
    pub trajectory: Trajectory,
    pub power: PowerProfile,
    pub converged: bool,
    pub times: BlockTimes,
    /// Non-fatal notes from rejected or unfinished block steps.
    pub warnings: Vec<String>,
    /// Set when a block failed hard and the run stopped early.
    pub failure: Option<String>,
}

impl SolveReport {
    /// Final relaxed min rate.
    pub fn eta(&self) -> f64 {
        self.trace.last().copied().unwrap_or(0.0)
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Runs the alternating optimization from the given trajectory and power.
///
/// The returned schedule is the scheduling solution at the returned
/// trajectory and power, so `eta()` is their exact min rate.
pub fn run_bcd(
    scenario: &Scenario,
    config: &BcdConfig,
    initial_trajectory: &Trajectory,
    initial_power: &PowerProfile,
) -> Result<SolveReport> {
    config.check()?;
    if let Some(mask) = &config.activity_mask {
        if mask.num_uavs() != scenario.num_uavs() || mask.num_slots() != scenario.num_slots() {
            return Err(Error::Shape("activity mask does not match the scenario".into()));
        }
    }
    let probe = Schedule::zeros(
        scenario.num_users(),
        scenario.num_uavs(),
        scenario.num_slots(),
        ScheduleMode::Relaxed,
    );
    let initial_violations =
        validate_feasibility(scenario, &probe, initial_trajectory, initial_power)?;
    if let Some(v) = initial_violations.first() {
        return Err(Error::Domain(format!("initial point is infeasible: {v}")));
    }

    let mut q = initial_trajectory.clone();
    let mut p = initial_power.clone();
    let mut times = BlockTimes::default();
    let mut trace = Vec::new();
    let mut deltas = Vec::new();
    let mut warnings = Vec::new();
    let mut failure = None;
    let mut converged = false;
    let mask = config.activity_mask.as_ref();

    let schedule_at = |q: &Trajectory, p: &PowerProfile, times: &mut BlockTimes| {
        let t0 = Instant::now();
        let mut problem = build_scheduling_lp(scenario, q, p)?;
        if let Some(mask) = mask {
            problem = problem.with_mask(mask.clone())?;
        }
        let out = solve_scheduling(&problem);
        times.scheduling += t0.elapsed();
        out
    };

    let (mut a, eta0) = schedule_at(&q, &p, &mut times)?;
    trace.push(eta0);
    let any_block = config.optimize_trajectory || config.optimize_power;
    loop {
        if !any_block {
            converged = true;
            break;
        }
        if trace.len() >= config.max_iterations {
            break;
        }
        let mut delta = BlockDeltas::default();
        if config.optimize_trajectory {
            let t0 = Instant::now();
            let step = solve_trajectory_block(
                scenario,
                &TrajectoryLocalPoint {
                    trajectory: &q,
                    schedule: &a,
                    power: &p,
                },
            );
            times.trajectory += t0.elapsed();
            match step {
                Ok(step) => {
                    delta.trajectory = step.eta - step.start_eta;
                    if let Some(w) = step.warning {
                        warnings.push(format!("iteration {}: {w}", trace.len()));
                    }
                    q = step.trajectory;
                }
                Err(e) => {
                    failure = Some(format!("trajectory block: {e}"));
                    break;
                }
            }
        }
        if config.optimize_power {
            let t0 = Instant::now();
            let step = solve_power_block(
                scenario,
                &PowerLocalPoint {
                    power: &p,
                    schedule: &a,
                    trajectory: &q,
                    mask,
                },
            );
            times.power += t0.elapsed();
            match step {
                Ok(step) => {
                    delta.power = step.eta - step.start_eta;
                    if let Some(w) = step.warning {
                        warnings.push(format!("iteration {}: {w}", trace.len()));
                    }
                    p = step.power;
                }
                Err(e) => {
                    failure = Some(format!("power block: {e}"));
                    break;
                }
            }
        }
        deltas.push(delta);

        let (next_a, eta) = match schedule_at(&q, &p, &mut times) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(format!("scheduling block: {e}"));
                break;
            }
        };
        let prev = *trace.last().expect("trace is non-empty");
        a = next_a;
        trace.push(eta);
        let rel = if prev > 0.0 {
            (eta - prev) / prev
        } else if eta > prev {
            f64::INFINITY
        } else {
            0.0
        };
        if rel < config.convergence_threshold {
            converged = true;
            break;
        }
    }

    debug_assert!(trajectory_violations(scenario, &q).is_empty());
    Ok(SolveReport {
        trace,
        block_deltas: deltas,
        schedule: a,
        trajectory: q,
        power: p,
        converged,
        times,
        warnings,
        failure,
    })
}
