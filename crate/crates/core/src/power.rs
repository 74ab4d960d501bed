//! Power block: affine upper bound of the interference log around a given
//! power profile, the convex program built from it, and the accepted step.
//!
//! Solver units: powers as fractions of `P_max`. Slots nobody is served in
//! are left out of the program and keep their current power.

use std::f64::consts::LOG2_E;

use crate::convex::{
    solve_smooth, Constraint, ConvexFunction, NegLog2, SmoothConvexProgram, SolveStatus,
    VariableLayout,
};
use crate::error::{Error, Result};
use crate::model::{evaluate_rates, GainTable, PowerProfile, Scenario, Schedule, Trajectory};
use crate::scheduling::ActivityMask;

/// Distance below which a solved power is pulled onto its bound, in units of `P_max`.
const SNAP_TOL: f64 = 1e-6;

/// Expansion point of the power block.
#[derive(Debug, Clone, Copy)]
pub struct PowerLocalPoint<'a> {
    pub power: &'a PowerProfile,
    pub schedule: &'a Schedule,
    pub trajectory: &'a Trajectory,
    /// UAVs masked off in a slot are held at zero power.
    pub mask: Option<&'a ActivityMask>,
}

impl PowerLocalPoint<'_> {
    fn check(&self, scenario: &Scenario) -> Result<()> {
        let (kk, mm, nn) = (scenario.num_users(), scenario.num_uavs(), scenario.num_slots());
        if self.trajectory.num_uavs() != mm
            || self.trajectory.num_slots() != nn
            || self.power.num_uavs() != mm
            || self.power.num_slots() != nn
            || self.schedule.num_users() != kk
            || self.schedule.num_uavs() != mm
            || self.schedule.num_slots() != nn
        {
            return Err(Error::Shape(
                "power block expects N-slot schedule, trajectory and power".into(),
            ));
        }
        if let Some(mask) = self.mask {
            if mask.num_uavs() != mm || mask.num_slots() != nn {
                return Err(Error::Shape("activity mask does not match the scenario".into()));
            }
        }
        let pmax = scenario.max_power();
        for m in 0..mm {
            for n in 0..nn {
                let p = self.power.get(m, n);
                if !(0.0..=pmax).contains(&p) {
                    return Err(Error::Domain(format!(
                        "expansion power {p} of UAV {m} in slot {n} is outside [0, {pmax}]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn is_free(&self, m: usize, n: usize) -> bool {
        self.mask.map_or(true, |mask| mask.is_active(m, n))
    }
}

/// Slopes `D[k][m][j][n]` (per watt) of the interference log seen by user
/// `k` served by UAV `m`, with respect to interferer `j != m`.
#[derive(Debug, Clone)]
pub struct InterferenceSlopes {
    num_uavs: usize,
    num_slots: usize,
    d: Vec<f64>,
    /// `log2(sum_{j != m} p^r_j h_kj + sigma^2)` per (k, m, n).
    offset: Vec<f64>,
}

impl InterferenceSlopes {
    /// Zero when `j == m`.
    pub fn d(&self, k: usize, m: usize, j: usize, n: usize) -> f64 {
        self.d[((k * self.num_uavs + m) * self.num_uavs + j) * self.num_slots + n]
    }

    fn offset(&self, k: usize, m: usize, n: usize) -> f64 {
        self.offset[(k * self.num_uavs + m) * self.num_slots + n]
    }

    /// Number of stored (k, m, j, n) slopes with `j != m`.
    pub fn len(&self) -> usize {
        let mm = self.num_uavs;
        self.d.len() / mm * (mm - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `log2(sum_{j != m} p_j h_kj + sigma^2)`.
pub fn interference_log(
    scenario: &Scenario,
    gains: &GainTable,
    power: &PowerProfile,
    k: usize,
    m: usize,
    n: usize,
) -> f64 {
    let total: f64 = (0..power.num_uavs())
        .filter(|&j| j != m)
        .map(|j| power.get(j, n) * gains.get(k, j, n))
        .sum::<f64>()
        + scenario.noise_power();
    total.log2()
}

pub fn compute_power_slopes(scenario: &Scenario, local: &PowerLocalPoint) -> Result<InterferenceSlopes> {
    local.check(scenario)?;
    let (kk, mm, nn) = (scenario.num_users(), scenario.num_uavs(), scenario.num_slots());
    let gains = GainTable::new(scenario, local.trajectory);
    let mut d = vec![0.0; kk * mm * mm * nn];
    let mut offset = vec![0.0; kk * mm * nn];
    for k in 0..kk {
        for m in 0..mm {
            for n in 0..nn {
                let den: f64 = (0..mm)
                    .filter(|&l| l != m)
                    .map(|l| local.power.get(l, n) * gains.get(k, l, n))
                    .sum::<f64>()
                    + scenario.noise_power();
                offset[(k * mm + m) * nn + n] = den.log2();
                for j in (0..mm).filter(|&j| j != m) {
                    d[((k * mm + m) * mm + j) * nn + n] = gains.get(k, j, n) * LOG2_E / den;
                }
            }
        }
    }
    Ok(InterferenceSlopes {
        num_uavs: mm,
        num_slots: nn,
        d,
        offset,
    })
}

/// Affine upper bound of the interference log at power `p`, indexed `[k][m][n]`.
pub fn interference_upper_bound(
    slopes: &InterferenceSlopes,
    p: &PowerProfile,
    local: &PowerLocalPoint,
) -> Vec<Vec<Vec<f64>>> {
    let (mm, nn) = (slopes.num_uavs, slopes.num_slots);
    let kk = slopes.offset.len() / (mm * nn);
    (0..kk)
        .map(|k| {
            (0..mm)
                .map(|m| {
                    (0..nn)
                        .map(|n| {
                            let mut v = slopes.offset(k, m, n);
                            for j in (0..mm).filter(|&j| j != m) {
                                v += slopes.d(k, m, j, n) * (p.get(j, n) - local.power.get(j, n));
                            }
                            v
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// The convex power program plus what is needed to read it back.
#[derive(Debug, Clone)]
pub struct PowerSubproblem {
    pub program: SmoothConvexProgram,
    /// Solver index of `p[m][n]`, `None` when the entry is held fixed.
    var_of: Vec<Option<usize>>,
    num_slots: usize,
    eta_index: usize,
    num_users: usize,
    max_power: f64,
    fixed: PowerProfile,
}

impl PowerSubproblem {
    pub fn eta_index(&self) -> usize {
        self.eta_index
    }

    pub fn decode(&self, x: &[f64]) -> PowerProfile {
        let mut p = self.fixed.clone();
        for (i, v) in self.var_of.iter().enumerate() {
            if let Some(v) = v {
                p.set(i / self.num_slots, i % self.num_slots, x[*v] * self.max_power);
            }
        }
        p
    }

    /// Surrogate average rate of every user at solver point `x`.
    pub fn surrogate_rates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_users)
            .map(|k| x[self.eta_index] - self.program.constraints[k].function.value(x))
            .collect()
    }
}

pub fn build_power_subproblem(
    scenario: &Scenario,
    local: &PowerLocalPoint,
    slopes: &InterferenceSlopes,
) -> Result<PowerSubproblem> {
    local.check(scenario)?;
    let (kk, mm, nn) = (scenario.num_users(), scenario.num_uavs(), scenario.num_slots());
    let pmax = scenario.max_power();
    let sigma2 = scenario.noise_power();
    let inv_n = 1.0 / nn as f64;
    let gains = GainTable::new(scenario, local.trajectory);
    let alpha = local.schedule;

    let slot_used: Vec<bool> = (0..nn)
        .map(|n| (0..kk).any(|k| (0..mm).any(|m| alpha.get(k, m, n) > 0.0)))
        .collect();
    let mut fixed = local.power.clone();
    let mut layout = VariableLayout::default();
    let mut var_of = vec![None; mm * nn];
    let mut count = 0;
    for m in 0..mm {
        for n in 0..nn {
            if !local.is_free(m, n) {
                fixed.set(m, n, 0.0);
            } else if slot_used[n] {
                var_of[m * nn + n] = Some(count);
                count += 1;
            }
        }
    }
    layout.push("p", count, pmax);
    let eta_index = layout.push("eta", 1, 1.0);
    let mut start = vec![0.0; layout.len()];
    for m in 0..mm {
        for n in 0..nn {
            if let Some(v) = var_of[m * nn + n] {
                start[v] = local.power.get(m, n) / pmax;
            }
        }
    }

    let mut constraints = Vec::new();
    for k in 0..kk {
        let mut f = ConvexFunction::affine(vec![(eta_index, 1.0)], 0.0);
        for n in 0..nn {
            let served: f64 = (0..mm).map(|m| alpha.get(k, m, n)).sum();
            if served <= 0.0 {
                continue;
            }
            // Received-power log: log2(sigma^2) + log2(1 + sum p~ g).
            let c = served * inv_n;
            let mut coeffs = Vec::new();
            let mut constant = 1.0;
            for j in 0..mm {
                let g = gains.get(k, j, n) / sigma2;
                match var_of[j * nn + n] {
                    Some(v) => coeffs.push((v, pmax * g)),
                    None => constant += fixed.get(j, n) * g,
                }
            }
            f.constant -= c * sigma2.log2();
            f.neg_logs.push(NegLog2 {
                weight: c,
                coeffs,
                constant,
            });
            // Affine interference bound, subtracted from the rate.
            for m in 0..mm {
                let am = alpha.get(k, m, n) * inv_n;
                if am <= 0.0 {
                    continue;
                }
                f.constant += am * slopes.offset(k, m, n);
                for j in (0..mm).filter(|&j| j != m) {
                    let dj = slopes.d(k, m, j, n);
                    let pr = local.power.get(j, n);
                    match var_of[j * nn + n] {
                        Some(v) => {
                            f.linear.push((v, am * dj * pmax));
                            f.constant -= am * dj * pr;
                        }
                        None => f.constant += am * dj * (fixed.get(j, n) - pr),
                    }
                }
            }
        }
        constraints.push(Constraint::new(format!("rate[{k}]"), f));
    }
    for v in 0..count {
        constraints.push(Constraint::new(
            format!("power_lo[{v}]"),
            ConvexFunction::affine(vec![(v, -1.0)], 0.0),
        ));
        constraints.push(Constraint::new(
            format!("power_hi[{v}]"),
            ConvexFunction::affine(vec![(v, 1.0)], -1.0),
        ));
    }

    let mut sub = PowerSubproblem {
        program: SmoothConvexProgram {
            layout,
            objective: ConvexFunction::affine(vec![(eta_index, -1.0)], 0.0),
            constraints,
            start,
        },
        var_of,
        num_slots: nn,
        eta_index,
        num_users: kk,
        max_power: pmax,
        fixed,
    };
    let rates = sub.surrogate_rates(&sub.program.start);
    let eta0 = rates.iter().copied().fold(f64::INFINITY, f64::min);
    sub.program.start[eta_index] = eta0 - 1e-9;
    Ok(sub)
}

/// Result of one power block update.
#[derive(Debug, Clone)]
pub struct PowerStep {
    pub power: PowerProfile,
    /// True min rate at the returned power under the fixed schedule and trajectory.
    pub eta: f64,
    pub start_eta: f64,
    pub surrogate_eta: f64,
    pub accepted: bool,
    pub status: SolveStatus,
    pub warning: Option<String>,
}

fn true_eta(scenario: &Scenario, local: &PowerLocalPoint, p: &PowerProfile) -> Result<f64> {
    Ok(evaluate_rates(scenario, local.schedule, local.trajectory, p)?.min_rate)
}

pub fn solve_power_block(scenario: &Scenario, local: &PowerLocalPoint) -> Result<PowerStep> {
    local.check(scenario)?;
    let start_eta = true_eta(scenario, local, local.power)?;
    let keep = |status, warning: String| PowerStep {
        power: local.power.clone(),
        eta: start_eta,
        start_eta,
        surrogate_eta: start_eta,
        accepted: false,
        status,
        warning: Some(warning),
    };

    let slopes = compute_power_slopes(scenario, local)?;
    let sub = build_power_subproblem(scenario, local, &slopes)?;
    let out = match solve_smooth(&sub.program) {
        Ok(out) => out,
        Err(e) => return Ok(keep(SolveStatus::NumericFailure, format!("power solve failed: {e}"))),
    };
    if matches!(out.status, SolveStatus::NumericFailure | SolveStatus::Infeasible) {
        return Ok(keep(
            out.status,
            out.diagnostic.unwrap_or_else(|| "power solve failed".into()),
        ));
    }

    let pmax = scenario.max_power();
    let mut candidate = sub.decode(&out.solution);
    let (mm, nn) = (scenario.num_uavs(), scenario.num_slots());
    for m in 0..mm {
        for n in 0..nn {
            candidate.set(m, n, candidate.get(m, n).clamp(0.0, pmax));
        }
    }
    let mut eta = true_eta(scenario, local, &candidate)?;
    let mut snapped = candidate.clone();
    for m in 0..mm {
        for n in 0..nn {
            let p = snapped.get(m, n);
            if p < SNAP_TOL * pmax {
                snapped.set(m, n, 0.0);
            } else if p > (1.0 - SNAP_TOL) * pmax {
                snapped.set(m, n, pmax);
            }
        }
    }
    if snapped != candidate {
        let snapped_eta = true_eta(scenario, local, &snapped)?;
        if snapped_eta >= eta {
            candidate = snapped;
            eta = snapped_eta;
        }
    }
    if eta < start_eta {
        return Ok(keep(out.status, format!("power step lowered eta to {eta:.12}")));
    }
    Ok(PowerStep {
        power: candidate,
        eta,
        start_eta,
        surrogate_eta: out.solution[sub.eta_index()],
        accepted: true,
        status: out.status,
        warning: out.diagnostic.filter(|_| out.status != SolveStatus::Optimal),
    })
}

/// Repeats the power block at fixed schedule and trajectory until the true
/// min rate improves by less than `tol` (relative) or `max_rounds` is hit.
pub fn refine_power(
    scenario: &Scenario,
    local: &PowerLocalPoint,
    max_rounds: usize,
    tol: f64,
) -> Result<PowerStep> {
    let mut step = solve_power_block(scenario, local)?;
    let start_eta = step.start_eta;
    for _ in 1..max_rounds {
        let next = solve_power_block(
            scenario,
            &PowerLocalPoint {
                power: &step.power,
                ..*local
            },
        )?;
        let gain = next.eta - step.eta;
        let improved = next.accepted && gain >= 0.0;
        if improved {
            step = PowerStep {
                start_eta,
                ..next
            };
        }
        if !improved || gain <= tol * step.eta.abs().max(1e-12) {
            break;
        }
    }
    step.start_eta = start_eta;
    Ok(step)
}
