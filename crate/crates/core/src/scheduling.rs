//! Relaxed user scheduling and association for fixed trajectory and power.

use crate::convex::{solve_lp, LinearProgram, SolveStatus};
use crate::error::{Error, Result};
use crate::model::{PowerProfile, RateTable, Scenario, Schedule, ScheduleMode, Trajectory};

/// Which UAVs may transmit in which slot, `active[m][n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityMask {
    active: Vec<Vec<bool>>,
}

impl ActivityMask {
    pub fn new(active: Vec<Vec<bool>>) -> Result<Self> {
        let n = active.first().map_or(0, Vec::len);
        if active.is_empty() || active.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("activity mask must be a non-empty M x N grid".into()));
        }
        Ok(Self { active })
    }

    /// UAV `m` transmits only in slots `n` with `n % M == m`.
    pub fn round_robin(num_uavs: usize, num_slots: usize) -> Self {
        Self {
            active: (0..num_uavs)
                .map(|m| (0..num_slots).map(|n| n % num_uavs == m).collect())
                .collect(),
        }
    }

    pub fn is_active(&self, uav: usize, slot: usize) -> bool {
        self.active[uav][slot]
    }

    pub fn num_uavs(&self) -> usize {
        self.active.len()
    }

    pub fn num_slots(&self) -> usize {
        self.active[0].len()
    }
}

/// Rate table `r[k][m][n] = log2(1 + sinr)` and optional transmit mask.
#[derive(Debug, Clone)]
pub struct SchedulingProblem {
    rates: RateTable,
    mask: Option<ActivityMask>,
}

impl SchedulingProblem {
    pub fn from_rates(rates: RateTable) -> Result<Self> {
        if rates.entries().iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Domain("rates must be finite and non-negative".into()));
        }
        Ok(Self { rates, mask: None })
    }

    pub fn with_mask(mut self, mask: ActivityMask) -> Result<Self> {
        if mask.num_uavs() != self.rates.num_uavs() || mask.num_slots() != self.rates.num_slots() {
            return Err(Error::Shape("activity mask does not match the rate table".into()));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    pub fn num_slots(&self) -> usize {
        self.rates.num_slots()
    }

    fn allowed(&self, m: usize, n: usize) -> bool {
        self.mask.as_ref().map_or(true, |mask| mask.is_active(m, n))
    }
}

pub fn build_scheduling_lp(
    scenario: &Scenario,
    trajectory: &Trajectory,
    power: &PowerProfile,
) -> Result<SchedulingProblem> {
    SchedulingProblem::from_rates(RateTable::new(scenario, trajectory, power)?)
}

/// Max-min LP over the relaxed weights. Returns the schedule and its min rate.
pub fn solve_scheduling(problem: &SchedulingProblem) -> Result<(Schedule, f64)> {
    let r = &problem.rates;
    let (kk, mm, nn) = (r.num_users(), r.num_uavs(), r.num_slots());
    let mut schedule = Schedule::zeros(kk, mm, nn, ScheduleMode::Relaxed);
    let usable = |k: usize, m: usize, n: usize| problem.allowed(m, n) && r.get(k, m, n) > 0.0;
    if !(0..kk).any(|k| (0..mm).any(|m| (0..nn).any(|n| usable(k, m, n)))) {
        return Ok((schedule, 0.0));
    }

    let var = |k: usize, m: usize, n: usize| (k * mm + m) * nn + n;
    let eta = kk * mm * nn;
    let mut lp = LinearProgram::new(eta + 1);
    lp.objective[eta] = 1.0;
    let inv_n = 1.0 / nn as f64;
    for k in 0..kk {
        let mut row = vec![(eta, 1.0)];
        for m in 0..mm {
            for n in 0..nn {
                let rate = r.get(k, m, n);
                if rate > 0.0 {
                    row.push((var(k, m, n), -rate * inv_n));
                }
            }
        }
        lp.add_le(row, 0.0);
    }
    for m in 0..mm {
        for n in 0..nn {
            lp.add_le((0..kk).map(|k| (var(k, m, n), 1.0)).collect(), 1.0);
        }
    }
    for k in 0..kk {
        for n in 0..nn {
            lp.add_le((0..mm).map(|m| (var(k, m, n), 1.0)).collect(), 1.0);
        }
    }
    for k in 0..kk {
        for m in 0..mm {
            for n in 0..nn {
                if !problem.allowed(m, n) {
                    lp.set_bounds(var(k, m, n), 0.0, 0.0);
                }
            }
        }
    }

    let out = solve_lp(&lp)?;
    if out.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "scheduling LP ended with {:?}: {}",
            out.status,
            out.diagnostic.unwrap_or_default()
        )));
    }
    for k in 0..kk {
        for m in 0..mm {
            for n in 0..nn {
                let a = out.solution[var(k, m, n)].clamp(0.0, 1.0);
                schedule.set(k, m, n, if a < 1e-12 { 0.0 } else { a });
            }
        }
    }
    fill_idle_capacity(&mut schedule, problem);
    let eta = r.realize(&schedule)?.min_rate;
    Ok((schedule, eta))
}

/// Hands spare UAV capacity to users that still have room. Rates only grow,
/// so the optimum is kept; with enough users every UAV ends up fully loaded.
fn fill_idle_capacity(schedule: &mut Schedule, problem: &SchedulingProblem) {
    let r = &problem.rates;
    let (kk, mm, nn) = (r.num_users(), r.num_uavs(), r.num_slots());
    for n in 0..nn {
        for m in 0..mm {
            if !problem.allowed(m, n) {
                continue;
            }
            for k in 0..kk {
                let uav_room = 1.0 - schedule.uav_load(m, n);
                if uav_room <= 1e-12 {
                    break;
                }
                if r.get(k, m, n) <= 0.0 {
                    continue;
                }
                let user_room = 1.0 - schedule.user_load(k, n);
                let add = uav_room.min(user_room);
                if add > 1e-12 {
                    let a = (schedule.get(k, m, n) + add).min(1.0);
                    schedule.set(k, m, n, a);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: Vec<Vec<Vec<f64>>>) -> SchedulingProblem {
        SchedulingProblem::from_rates(RateTable::from_entries(entries).unwrap()).unwrap()
    }

    #[test]
    fn two_users_one_uav_closed_form() {
        let (a, eta) = solve_scheduling(&table(vec![vec![vec![2.0]], vec![vec![1.0]]])).unwrap();
        assert!((a.get(0, 0, 0) - 1.0 / 3.0).abs() < 1e-9);
        assert!((a.get(1, 0, 0) - 2.0 / 3.0).abs() < 1e-9);
        assert!((eta - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_split() {
        let (a, eta) = solve_scheduling(&table(vec![vec![vec![3.0]], vec![vec![3.0]]])).unwrap();
        assert!((a.get(0, 0, 0) - 0.5).abs() < 1e-9);
        assert!((eta - 1.5).abs() < 1e-9);
    }

    #[test]
    fn single_user_takes_everything() {
        let (a, eta) = solve_scheduling(&table(vec![vec![vec![1.0, 2.0, 4.0]]])).unwrap();
        for n in 0..3 {
            assert_eq!(a.get(0, 0, n), 1.0);
        }
        assert!((eta - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_table_gives_empty_schedule() {
        let (a, eta) = solve_scheduling(&table(vec![vec![vec![0.0; 4]; 2]; 3])).unwrap();
        assert_eq!(eta, 0.0);
        assert!(a.is_integral());
        assert_eq!(a.uav_load(0, 0), 0.0);
    }

    #[test]
    fn diagonal_association() {
        let p = table(vec![
            vec![vec![8.0], vec![1e-6]],
            vec![vec![1e-6], vec![6.0]],
        ]);
        let (a, eta) = solve_scheduling(&p).unwrap();
        assert!(a.get(0, 0, 0) > 0.999 && a.get(1, 1, 0) > 0.999);
        assert!((eta - 6.0).abs() < 1e-4);
    }

    #[test]
    fn mask_blocks_inactive_uav() {
        let p = table(vec![vec![vec![1.0, 1.0], vec![5.0, 5.0]]])
            .with_mask(ActivityMask::round_robin(2, 2))
            .unwrap();
        let (a, _) = solve_scheduling(&p).unwrap();
        assert_eq!(a.get(0, 1, 0), 0.0);
        assert_eq!(a.get(0, 0, 1), 0.0);
        assert!(a.get(0, 1, 1) > 0.999);
    }

    #[test]
    fn round_robin_pattern() {
        let mask = ActivityMask::round_robin(2, 4);
        let active: Vec<Vec<usize>> = (0..2)
            .map(|m| (0..4).filter(|&n| mask.is_active(m, n)).collect())
            .collect();
        assert_eq!(active, vec![vec![0, 2], vec![1, 3]]);
    }
}
