//! Trajectory block: first-order surrogate of the rate around a given
//! trajectory, the convex program built from it, and the accepted step.
//!
//! Solver units: positions in multiples of the altitude `H`, distance slacks
//! in multiples of `H^2`. The last slot shares the first slot's variables,
//! which enforces periodicity exactly.

use std::f64::consts::LOG2_E;

use crate::convex::{
    solve_smooth, Constraint, ConvexFunction, InvTerm, Log2InvSum, SmoothConvexProgram,
    SolveStatus, SquareTerm, VariableLayout,
};
use crate::error::{Error, Result};
use crate::model::{
    evaluate_rates, trajectory_violations, Point, PowerProfile, Scenario, Schedule, Trajectory,
};

/// Expansion point of the trajectory block.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryLocalPoint<'a> {
    pub trajectory: &'a Trajectory,
    pub schedule: &'a Schedule,
    pub power: &'a PowerProfile,
}

impl TrajectoryLocalPoint<'_> {
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
                "trajectory block expects N-slot schedule, trajectory and power".into(),
            ));
        }
        Ok(())
    }
}

/// Slopes `A[k][j][n]` (per squared meter) and offsets `B[k][j][n]` of the
/// rate surrogate. `B` does not depend on `j`.
#[derive(Debug, Clone)]
pub struct TaylorCoefficients {
    num_uavs: usize,
    num_slots: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    dist_sq: Vec<f64>,
}

impl TaylorCoefficients {
    fn idx(&self, k: usize, j: usize, n: usize) -> usize {
        (k * self.num_uavs + j) * self.num_slots + n
    }
    pub fn a(&self, k: usize, j: usize, n: usize) -> f64 {
        self.a[self.idx(k, j, n)]
    }
    pub fn b(&self, k: usize, j: usize, n: usize) -> f64 {
        self.b[self.idx(k, j, n)]
    }
    /// Squared horizontal distance at the expansion point.
    pub fn expansion_dist_sq(&self, k: usize, j: usize, n: usize) -> f64 {
        self.dist_sq[self.idx(k, j, n)]
    }
}

/// `log2(sum_l p_l h_l + sigma^2)` at user `k`, slot `n`.
pub fn received_log_power(
    scenario: &Scenario,
    trajectory: &Trajectory,
    power: &PowerProfile,
    k: usize,
    n: usize,
) -> f64 {
    let w = scenario.user(k);
    let total: f64 = (0..trajectory.num_uavs())
        .map(|l| power.get(l, n) * scenario.gain_at_sq(trajectory.get(l, n).dist_sq(w)))
        .sum::<f64>()
        + scenario.noise_power();
    total.log2()
}

pub fn compute_taylor_coeffs(
    scenario: &Scenario,
    local: &TrajectoryLocalPoint,
) -> Result<TaylorCoefficients> {
    local.check(scenario)?;
    let (kk, mm, nn) = (scenario.num_users(), scenario.num_uavs(), scenario.num_slots());
    let h2 = scenario.altitude() * scenario.altitude();
    let rho = scenario.ref_channel_gain();
    let mut out = TaylorCoefficients {
        num_uavs: mm,
        num_slots: nn,
        a: vec![0.0; kk * mm * nn],
        b: vec![0.0; kk * mm * nn],
        dist_sq: vec![0.0; kk * mm * nn],
    };
    for k in 0..kk {
        let w = scenario.user(k);
        for n in 0..nn {
            let d2: Vec<f64> = (0..mm).map(|j| local.trajectory.get(j, n).dist_sq(w)).collect();
            let total: f64 = (0..mm)
                .map(|l| local.power.get(l, n) * rho / (h2 + d2[l]))
                .sum::<f64>()
                + scenario.noise_power();
            for j in 0..mm {
                let i = out.idx(k, j, n);
                let den = h2 + d2[j];
                out.a[i] = local.power.get(j, n) * rho / (den * den) * LOG2_E / total;
                out.b[i] = total.log2();
                out.dist_sq[i] = d2[j];
            }
        }
    }
    Ok(out)
}

/// Surrogate of `log2(sum_l p_l h_l + sigma^2)` at trajectory `q`, indexed
/// `[k][m][n]` (identical across `m`).
pub fn rate_lower_bound(
    scenario: &Scenario,
    coeffs: &TaylorCoefficients,
    q: &Trajectory,
) -> Vec<Vec<Vec<f64>>> {
    let (kk, mm, nn) = (scenario.num_users(), coeffs.num_uavs, coeffs.num_slots);
    (0..kk)
        .map(|k| {
            let w = scenario.user(k);
            let per_slot: Vec<f64> = (0..nn)
                .map(|n| {
                    let mut v = coeffs.b(k, 0, n);
                    for j in 0..mm {
                        let d2 = q.get(j, n).dist_sq(w);
                        v -= coeffs.a(k, j, n) * (d2 - coeffs.expansion_dist_sq(k, j, n));
                    }
                    v
                })
                .collect();
            vec![per_slot; mm]
        })
        .collect()
}

/// The convex trajectory program plus what is needed to read it back.
#[derive(Debug, Clone)]
pub struct TrajectorySubproblem {
    pub program: SmoothConvexProgram,
    num_uavs: usize,
    num_slots: usize,
    altitude: f64,
    eta_index: usize,
    /// Index of the first user-rate constraint; one per user, in order.
    rate_rows: usize,
    num_users: usize,
}

impl TrajectorySubproblem {
    fn q_index(num_slots: usize, m: usize, n: usize) -> usize {
        let unique = num_slots - 1;
        let n = if n == unique { 0 } else { n };
        2 * (m * unique + n)
    }

    pub fn eta_index(&self) -> usize {
        self.eta_index
    }

    /// Waypoints encoded in a solver vector.
    pub fn decode(&self, x: &[f64]) -> Trajectory {
        let per_uav = (0..self.num_uavs)
            .map(|m| {
                (0..self.num_slots)
                    .map(|n| {
                        let i = Self::q_index(self.num_slots, m, n);
                        Point::new(x[i] * self.altitude, x[i + 1] * self.altitude)
                    })
                    .collect()
            })
            .collect();
        Trajectory::from_waypoints(per_uav).expect("layout is rectangular")
    }

    /// Surrogate average rate of every user at solver point `x`.
    pub fn surrogate_rates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_users)
            .map(|k| x[self.eta_index] - self.program.constraints[self.rate_rows + k].function.value(x))
            .collect()
    }
}

pub fn build_trajectory_subproblem(
    scenario: &Scenario,
    local: &TrajectoryLocalPoint,
    coeffs: &TaylorCoefficients,
) -> Result<TrajectorySubproblem> {
    local.check(scenario)?;
    let (kk, mm, nn) = (scenario.num_users(), scenario.num_uavs(), scenario.num_slots());
    let h = scenario.altitude();
    let h2 = h * h;
    let sigma2 = scenario.noise_power();
    let inv_n = 1.0 / nn as f64;
    let unique = nn - 1;
    let alias = |n: usize| if n == unique { 0 } else { n };
    let qi = |m: usize, n: usize| TrajectorySubproblem::q_index(nn, m, n);
    let q_r = local.trajectory;
    let alpha = local.schedule;
    let power = local.power;

    // Slacks for interferers that matter: (k, j, slot) with p_j > 0 and some
    // other UAV serving k in that slot.
    let mut needs_slack = vec![false; kk * mm * unique];
    for k in 0..kk {
        for n in 0..nn {
            for j in 0..mm {
                if power.get(j, n) > 0.0
                    && (0..mm).any(|m| m != j && alpha.get(k, m, n) > 0.0)
                {
                    needs_slack[(k * mm + j) * unique + alias(n)] = true;
                }
            }
        }
    }

    let mut layout = VariableLayout::default();
    layout.push("q", 2 * mm * unique, h);
    let s_count = needs_slack.iter().filter(|b| **b).count();
    let s_start = layout.push("s", s_count, h2);
    let eta_index = layout.push("eta", 1, 1.0);
    let mut slack_index = vec![usize::MAX; kk * mm * unique];
    let mut next = s_start;
    for (i, need) in needs_slack.iter().enumerate() {
        if *need {
            slack_index[i] = next;
            next += 1;
        }
    }
    let s_of = |k: usize, j: usize, n: usize| slack_index[(k * mm + j) * unique + alias(n)];

    let mut start = vec![0.0; layout.len()];
    for m in 0..mm {
        for n in 0..unique {
            let p = q_r.get(m, n);
            start[qi(m, n)] = p.x / h;
            start[qi(m, n) + 1] = p.y / h;
        }
    }

    let mut constraints = Vec::new();

    // Per-user surrogate rate >= eta.
    for k in 0..kk {
        let w = scenario.user(k);
        let (wx, wy) = (w.x / h, w.y / h);
        let mut f = ConvexFunction::affine(vec![(eta_index, 1.0)], 0.0);
        for n in 0..nn {
            let served: f64 = (0..mm).map(|m| alpha.get(k, m, n)).sum();
            if served <= 0.0 {
                continue;
            }
            let c = served * inv_n;
            let mut offset = coeffs.b(k, 0, n);
            for j in 0..mm {
                let a = coeffs.a(k, j, n);
                if a > 0.0 {
                    offset += a * coeffs.expansion_dist_sq(k, j, n);
                    let i = qi(j, n);
                    for (var, wc) in [(i, wx), (i + 1, wy)] {
                        f.squares.push(SquareTerm {
                            weight: c * a * h2,
                            coeffs: vec![(var, 1.0)],
                            constant: -wc,
                        });
                    }
                }
            }
            f.constant -= c * offset;
            for m in 0..mm {
                let am = alpha.get(k, m, n);
                if am <= 0.0 {
                    continue;
                }
                let weight = am * inv_n;
                f.constant += weight * sigma2.log2();
                let terms: Vec<InvTerm> = (0..mm)
                    .filter(|&j| j != m && power.get(j, n) > 0.0)
                    .map(|j| InvTerm {
                        index: s_of(k, j, n),
                        numerator: power.get(j, n) * scenario.ref_channel_gain() / (sigma2 * h2),
                        offset: 1.0,
                    })
                    .collect();
                if !terms.is_empty() {
                    f.inv_logs.push(Log2InvSum {
                        weight,
                        floor: 1.0,
                        terms,
                    });
                }
            }
        }
        constraints.push(Constraint::new(format!("rate[{k}]"), f));
    }
    let rate_rows = 0;

    // Slack <= linearized squared distance.
    for k in 0..kk {
        let w = scenario.user(k);
        let wt = Point::new(w.x / h, w.y / h);
        for j in 0..mm {
            for n in 0..unique {
                let s = s_of(k, j, n);
                if s == usize::MAX {
                    continue;
                }
                let qr = Point::new(q_r.get(j, n).x / h, q_r.get(j, n).y / h);
                let d = qr - wt;
                start[s] = d.norm_sq();
                let i = qi(j, n);
                let constant = -d.norm_sq() + 2.0 * d.dot(qr);
                constraints.push(Constraint::new(
                    format!("slack[{k},{j},{n}]"),
                    ConvexFunction::affine(
                        vec![(s, 1.0), (i, -2.0 * d.x), (i + 1, -2.0 * d.y)],
                        constant,
                    ),
                ));
            }
        }
    }

    // Per-hop displacement cap, normalized to the cap.
    let step = scenario.max_step() / h;
    let inv_step2 = 1.0 / (step * step);
    for m in 0..mm {
        for n in 0..nn - 1 {
            let (a, b) = (qi(m, n), qi(m, n + 1));
            if a == b {
                continue;
            }
            let f = ConvexFunction {
                constant: -1.0,
                squares: vec![
                    SquareTerm {
                        weight: inv_step2,
                        coeffs: vec![(b, 1.0), (a, -1.0)],
                        constant: 0.0,
                    },
                    SquareTerm {
                        weight: inv_step2,
                        coeffs: vec![(b + 1, 1.0), (a + 1, -1.0)],
                        constant: 0.0,
                    },
                ],
                ..Default::default()
            };
            constraints.push(Constraint::new(format!("speed[{m},{n}]"), f));
        }
    }

    // Linearized separation, j < m.
    let dmin2 = (scenario.min_separation() / h).powi(2);
    for m in 0..mm {
        for j in 0..m {
            for n in 0..unique {
                let delta = Point::new(
                    (q_r.get(m, n).x - q_r.get(j, n).x) / h,
                    (q_r.get(m, n).y - q_r.get(j, n).y) / h,
                );
                let cur = delta.norm_sq();
                // Within-tolerance starts keep their current spacing as the bound.
                let target = dmin2.min(cur);
                if target <= 0.0 {
                    return Err(Error::Domain(format!(
                        "UAVs {j} and {m} coincide in slot {n}"
                    )));
                }
                let (im, ij) = (qi(m, n), qi(j, n));
                let s = 1.0 / target;
                constraints.push(Constraint::new(
                    format!("separation[{j},{m},{n}]"),
                    ConvexFunction::affine(
                        vec![
                            (im, -2.0 * delta.x * s),
                            (im + 1, -2.0 * delta.y * s),
                            (ij, 2.0 * delta.x * s),
                            (ij + 1, 2.0 * delta.y * s),
                        ],
                        (target + cur) * s,
                    ),
                ));
            }
        }
    }

    let sub = TrajectorySubproblem {
        program: SmoothConvexProgram {
            layout,
            objective: ConvexFunction::affine(vec![(eta_index, -1.0)], 0.0),
            constraints,
            start,
        },
        num_uavs: mm,
        num_slots: nn,
        altitude: h,
        eta_index,
        rate_rows,
        num_users: kk,
    };
    let mut sub = sub;
    let rates = sub.surrogate_rates(&sub.program.start);
    let eta0 = rates.iter().copied().fold(f64::INFINITY, f64::min);
    sub.program.start[eta_index] = eta0 - 1e-9;
    Ok(sub)
}

/// Result of one trajectory block update.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub trajectory: Trajectory,
    /// True min rate at the returned trajectory under the fixed schedule and power.
    pub eta: f64,
    /// True min rate at the expansion point.
    pub start_eta: f64,
    /// Optimal value of the surrogate program.
    pub surrogate_eta: f64,
    pub accepted: bool,
    pub status: SolveStatus,
    pub warning: Option<String>,
}

pub fn solve_trajectory_block(scenario: &Scenario, local: &TrajectoryLocalPoint) -> Result<TrajectoryStep> {
    local.check(scenario)?;
    if let Some(v) = trajectory_violations(scenario, local.trajectory).first() {
        return Err(Error::Domain(format!("expansion trajectory is infeasible: {v}")));
    }
    let start_eta = evaluate_rates(scenario, local.schedule, local.trajectory, local.power)?.min_rate;
    let keep = |status, warning: String| TrajectoryStep {
        trajectory: local.trajectory.clone(),
        eta: start_eta,
        start_eta,
        surrogate_eta: start_eta,
        accepted: false,
        status,
        warning: Some(warning),
    };

    let coeffs = compute_taylor_coeffs(scenario, local)?;
    let sub = build_trajectory_subproblem(scenario, local, &coeffs)?;
    let out = match solve_smooth(&sub.program) {
        Ok(out) => out,
        Err(e) => return Ok(keep(SolveStatus::NumericFailure, format!("trajectory solve failed: {e}"))),
    };
    if matches!(out.status, SolveStatus::NumericFailure | SolveStatus::Infeasible) {
        return Ok(keep(
            out.status,
            out.diagnostic.unwrap_or_else(|| "trajectory solve failed".into()),
        ));
    }
    let candidate = sub.decode(&out.solution);
    if let Some(v) = trajectory_violations(scenario, &candidate).first() {
        return Ok(keep(out.status, format!("trajectory step rejected: {v}")));
    }
    let eta = evaluate_rates(scenario, local.schedule, &candidate, local.power)?.min_rate;
    if eta < start_eta {
        return Ok(keep(out.status, format!("trajectory step lowered eta to {eta:.12}")));
    }
    Ok(TrajectoryStep {
        trajectory: candidate,
        eta,
        start_eta,
        surrogate_eta: out.solution[sub.eta_index()],
        accepted: true,
        status: out.status,
        warning: out.diagnostic.filter(|_| out.status != SolveStatus::Optimal),
    })
}
