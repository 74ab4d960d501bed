//! Dense two-phase primal simplex.
//!
//! Pricing is Dantzig (most negative reduced cost, lowest index on ties). After
//! a run of degenerate pivots it switches to Bland's rule until the objective
//! moves again, which rules out cycling. The ratio test breaks ties on the
//! lowest basic index, so a given instance always follows the same pivots.

use super::{SolveOutcome, SolveStatus, TOL_LP};
use crate::error::{Error, Result};

/// `maximize c.x  s.t.  rows: a.x <= b,  lower <= x <= upper`.
///
/// Lower bounds must be finite; upper bounds may be `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// `num_vars` variables in `[0, inf)` with zero objective.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push((coeffs, rhs));
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Shape("bound vectors do not match variable count".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite objective coefficient".into()));
        }
        if self.lower.iter().any(|l| !l.is_finite()) || self.upper.iter().any(|u| u.is_nan()) {
            return Err(Error::Domain("lower bounds must be finite".into()));
        }
        for (r, (coeffs, rhs)) in self.rows.iter().enumerate() {
            if !rhs.is_finite() {
                return Err(Error::Domain(format!("row {r}: non-finite bound")));
            }
            for &(i, a) in coeffs {
                if i >= n {
                    return Err(Error::Shape(format!("row {r}: variable {i} out of range")));
                }
                if !a.is_finite() {
                    return Err(Error::Domain(format!("row {r}: non-finite coefficient")));
                }
            }
        }
        Ok(())
    }
}

const MAX_PIVOTS: usize = 200_000;
const DEGENERATE_SWITCH: usize = 20;

struct Tableau {
    rows: Vec<Vec<f64>>, // each row has ncols + 1 entries, rhs last
    obj: Vec<f64>,       // reduced costs (negated for maximization) + value
    basis: Vec<usize>,
    ncols: usize,
    pivots: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded(usize),
    PivotLimit,
}

impl Tableau {
    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.ncols + 1;
        let p = self.rows[pr][pc];
        {
            let row = &mut self.rows[pr];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[pc] = 1.0;
        }
        let prow = self.rows[pr].clone();
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == pr {
                continue;
            }
            let f = row[pc];
            if f != 0.0 {
                for c in 0..w {
                    if prow[c] != 0.0 {
                        row[c] -= f * prow[c];
                    }
                }
                row[pc] = 0.0;
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for c in 0..w {
                if prow[c] != 0.0 {
                    self.obj[c] -= f * prow[c];
                }
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Runs simplex iterations over columns `< allowed`.
    fn run(&mut self, allowed: usize) -> PhaseEnd {
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots >= MAX_PIVOTS {
                return PhaseEnd::PivotLimit;
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut entering = None;
            let mut best = -TOL_LP;
            for c in 0..allowed {
                let d = self.obj[c];
                if d < best {
                    entering = Some(c);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = entering else {
                return PhaseEnd::Optimal;
            };
            let rhs = self.ncols;
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[pc];
                if a > TOL_LP {
                    let ratio = row[rhs].max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * lratio.abs().max(1.0);
                            if ratio < lratio && !tie
                                || tie && self.basis[r] < self.basis[lr]
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = leave else {
                return PhaseEnd::Unbounded(pc);
            };
            if ratio <= TOL_LP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
        }
    }
}

/// Solves the LP. Malformed input is an error; infeasibility and
/// unboundedness are reported through the outcome status.
pub fn solve_lp(lp: &LinearProgram) -> Result<SolveOutcome> {
    lp.check()?;
    let n = lp.num_vars();

    // Shift x = lower + y, y >= 0; finite upper bounds become rows.
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::with_capacity(lp.rows.len());
    for (coeffs, rhs) in &lp.rows {
        let shift: f64 = coeffs.iter().map(|&(i, a)| a * lp.lower[i]).sum();
        rows.push((coeffs.clone(), rhs - shift));
    }
    for i in 0..n {
        if lp.upper[i].is_finite() {
            rows.push((vec![(i, 1.0)], lp.upper[i] - lp.lower[i]));
        }
    }
    let m = rows.len();
    let negative: Vec<usize> = (0..m).filter(|&r| rows[r].1 < 0.0).collect();
    let na = negative.len();
    let ncols = n + m + na;
    let art_start = n + m;

    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        obj: vec![0.0; ncols + 1],
        basis: vec![0; m],
        ncols,
        pivots: 0,
    };
    let mut art = 0;
    for (r, (coeffs, rhs)) in rows.iter().enumerate() {
        let mut row = vec![0.0; ncols + 1];
        for &(i, a) in coeffs {
            row[i] += a;
        }
        row[n + r] = 1.0;
        row[ncols] = *rhs;
        if *rhs < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[art_start + art] = 1.0;
            tab.basis[r] = art_start + art;
            art += 1;
        } else {
            tab.basis[r] = n + r;
        }
        tab.rows.push(row);
    }

    if na > 0 {
        // Phase I: maximize -sum(artificials).
        for &r in &negative {
            for c in 0..=ncols {
                tab.obj[c] -= tab.rows[r][c];
            }
        }
        for a in 0..na {
            tab.obj[art_start + a] = 0.0;
        }
        match tab.run(ncols) {
            PhaseEnd::Optimal => {}
            PhaseEnd::PivotLimit => return Ok(limit_outcome(lp, tab.pivots)),
            PhaseEnd::Unbounded(_) => unreachable!("phase I objective is bounded"),
        }
        let infeas = -tab.obj[ncols];
        if infeas > TOL_LP * (1.0 + rhs_scale(&rows)) {
            return Ok(SolveOutcome {
                status: SolveStatus::Infeasible,
                solution: lp.lower.clone(),
                objective: f64::NEG_INFINITY,
                iterations: tab.pivots,
                kkt_residual: f64::INFINITY,
                diagnostic: Some(format!("phase I residual {infeas:.3e}")),
            });
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| tab.rows[r][c].abs() > 1e-7) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    // Phase II objective row.
    tab.obj = vec![0.0; ncols + 1];
    for (i, &c) in lp.objective.iter().enumerate() {
        tab.obj[i] = -c;
    }
    for r in 0..m {
        let b = tab.basis[r];
        let cb = if b < n { lp.objective[b] } else { 0.0 };
        if cb != 0.0 {
            for c in 0..=ncols {
                tab.obj[c] += cb * tab.rows[r][c];
            }
        }
    }
    for r in 0..m {
        let b = tab.basis[r];
        tab.obj[b] = 0.0;
    }

    match tab.run(art_start) {
        PhaseEnd::Optimal => {}
        PhaseEnd::PivotLimit => return Ok(limit_outcome(lp, tab.pivots)),
        PhaseEnd::Unbounded(c) => {
            return Ok(SolveOutcome {
                status: SolveStatus::NumericFailure,
                solution: lp.lower.clone(),
                objective: f64::INFINITY,
                iterations: tab.pivots,
                kkt_residual: f64::INFINITY,
                diagnostic: Some(format!("unbounded along column {c}")),
            })
        }
    }

    let mut x = lp.lower.clone();
    for r in 0..m {
        let b = tab.basis[r];
        if b < n {
            x[b] += tab.rows[r][ncols].max(0.0);
        }
    }
    for i in 0..n {
        x[i] = x[i].min(lp.upper[i]);
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let kkt = (0..art_start)
        .map(|c| (-tab.obj[c]).max(0.0))
        .fold(0.0, f64::max);
    Ok(SolveOutcome {
        status: SolveStatus::Optimal,
        solution: x,
        objective,
        iterations: tab.pivots,
        kkt_residual: kkt,
        diagnostic: None,
    })
}

fn rhs_scale(rows: &[(Vec<(usize, f64)>, f64)]) -> f64 {
    rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max)
}

fn limit_outcome(lp: &LinearProgram, pivots: usize) -> SolveOutcome {
    SolveOutcome {
        status: SolveStatus::MaxIters,
        solution: lp.lower.clone(),
        objective: f64::NEG_INFINITY,
        iterations: pivots,
        kkt_residual: f64::INFINITY,
        diagnostic: Some("pivot limit reached".into()),
    }
}
