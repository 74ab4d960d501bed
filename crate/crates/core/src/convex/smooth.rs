//! Primal-dual interior-point solver for smooth convex programs
//!
//! ```text
//! maximize  -f0(x)   s.t.  g_i(x) <= 0
//! ```
//!
//! with every `f0`, `g_i` a [`ConvexFunction`]. Starts from a feasible point;
//! when the point sits on the boundary a Phase I problem moves it into the
//! interior first. The returned point is never worse than the start.

use nalgebra::{DMatrix, DVector};

use super::function::ConvexFunction;
use super::{SolveOutcome, SolveStatus, TOL_FEAS, TOL_KKT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Affine,
    ConvexQuadratic,
    LogSum,
}

/// `function(x) <= 0`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    pub kind: ConstraintKind,
    pub function: ConvexFunction,
}

impl Constraint {
    pub fn new(label: impl Into<String>, function: ConvexFunction) -> Self {
        let kind = if function.has_logs() {
            ConstraintKind::LogSum
        } else if function.is_affine() {
            ConstraintKind::Affine
        } else {
            ConstraintKind::ConvexQuadratic
        };
        Self {
            label: label.into(),
            kind,
            function,
        }
    }
}

/// Named contiguous slice of the decision vector. `scale` is the physical unit
/// one solver unit stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableBlock {
    pub name: String,
    pub start: usize,
    pub len: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableLayout {
    pub blocks: Vec<VariableBlock>,
}

impl VariableLayout {
    /// Appends a block and returns its first index.
    pub fn push(&mut self, name: impl Into<String>, len: usize, scale: f64) -> usize {
        let start = self.len();
        self.blocks.push(VariableBlock {
            name: name.into(),
            start,
            len,
            scale,
        });
        start
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.start + b.len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block(&self, name: &str) -> Option<&VariableBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct SmoothConvexProgram {
    pub layout: VariableLayout,
    /// Convex `f0`; the program maximizes `-f0`.
    pub objective: ConvexFunction,
    pub constraints: Vec<Constraint>,
    pub start: Vec<f64>,
}

impl SmoothConvexProgram {
    pub fn num_vars(&self) -> usize {
        self.layout.len()
    }

    /// The maximized objective `-f0(x)`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        -self.objective.value(x)
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.function.value(x)).collect()
    }

    /// Largest constraint value (positive means violated); `-inf` if unconstrained.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.function.value(x))
            .fold(f64::NEG_INFINITY, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
    }
}

#[derive(Debug, Clone)]
pub struct SmoothSolverConfig {
    pub tol_feas: f64,
    pub tol_kkt: f64,
    /// Surrogate duality gap required for optimality.
    pub tol_gap: f64,
    pub max_iterations: usize,
    /// Centering factor of the primal-dual update.
    pub mu: f64,
    pub ls_alpha: f64,
    pub ls_beta: f64,
    /// Constraints closer than this to zero trigger Phase I.
    pub interior_margin: f64,
    /// Phase I stops once every constraint is below `-phase1_target`.
    pub phase1_target: f64,
    /// Half-width of the box Phase I may roam in around the start.
    pub phase1_radius: f64,
    pub check_gradients: bool,
}

impl Default for SmoothSolverConfig {
    fn default() -> Self {
        Self {
            tol_feas: TOL_FEAS,
            tol_kkt: TOL_KKT,
            tol_gap: 1e-8,
            max_iterations: 300,
            mu: 10.0,
            ls_alpha: 0.01,
            ls_beta: 0.5,
            interior_margin: 1e-7,
            phase1_target: 1e-4,
            phase1_radius: 1.0,
            check_gradients: cfg!(debug_assertions),
        }
    }
}

pub fn solve_smooth(prog: &SmoothConvexProgram) -> Result<SolveOutcome> {
    solve_smooth_with(prog, &SmoothSolverConfig::default())
}

pub fn solve_smooth_with(prog: &SmoothConvexProgram, cfg: &SmoothSolverConfig) -> Result<SolveOutcome> {
    let n = prog.num_vars();
    if prog.start.len() != n {
        return Err(Error::Shape(format!(
            "start has {} entries, layout has {n}",
            prog.start.len()
        )));
    }
    if prog.start.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite start point".into()));
    }
    let funcs = std::iter::once(("objective", &prog.objective))
        .chain(prog.constraints.iter().map(|c| (c.label.as_str(), &c.function)));
    for (label, f) in funcs {
        if f.max_index().is_some_and(|i| i >= n) {
            return Err(Error::Shape(format!("`{label}` references a variable past {n}")));
        }
        if !f.is_well_formed() {
            return Err(Error::Domain(format!("`{label}` has invalid coefficients")));
        }
    }
    if cfg.check_gradients {
        check_gradients(prog, &prog.start, 1e-4)?;
    }

    let g0 = prog.constraint_values(&prog.start);
    if let Some((i, v)) = g0
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v <= cfg.tol_feas))
    {
        return Err(Error::Domain(format!(
            "start point violates `{}` by {v:.3e}",
            prog.constraints[i].label
        )));
    }
    let start_obj = prog.objective_value(&prog.start);
    if !start_obj.is_finite() {
        return Err(Error::Domain("objective is not finite at the start point".into()));
    }

    let cons: Vec<&ConvexFunction> = prog.constraints.iter().map(|c| &c.function).collect();
    let worst = g0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut iterations = 0;
    let interior = if worst < -cfg.interior_margin {
        prog.start.clone()
    } else {
        match phase_one(&prog.objective, &cons, &prog.start, cfg) {
            (Some(x), it) => {
                iterations += it;
                x
            }
            (None, it) => {
                return Ok(SolveOutcome {
                    status: SolveStatus::NumericFailure,
                    solution: prog.start.clone(),
                    objective: start_obj,
                    iterations: it,
                    kkt_residual: f64::INFINITY,
                    diagnostic: Some("no strictly feasible point near the start".into()),
                });
            }
        }
    };

    let run = primal_dual(&prog.objective, &cons, interior, cfg, &|_| false);
    iterations += run.iterations;
    let cand_obj = prog.objective_value(&run.x);
    let cand_viol = prog.max_violation(&run.x);
    let mut diagnostic = run.diagnostic;
    let solution = if cand_obj.is_finite() && cand_obj >= start_obj && cand_viol <= cfg.tol_feas {
        run.x
    } else {
        diagnostic.get_or_insert_with(|| "kept start point".into());
        prog.start.clone()
    };
    let objective = prog.objective_value(&solution);
    Ok(SolveOutcome {
        status: run.status,
        solution,
        objective,
        iterations,
        kkt_residual: run.kkt,
        diagnostic,
    })
}

/// Compares analytic gradients with central differences over each function's
/// support at `x`. Fails with the label of the first mismatching function.
pub fn check_gradients(prog: &SmoothConvexProgram, x: &[f64], rel_tol: f64) -> Result<()> {
    let funcs = std::iter::once(("objective", &prog.objective))
        .chain(prog.constraints.iter().map(|c| (c.label.as_str(), &c.function)));
    let mut xp = x.to_vec();
    for (label, f) in funcs {
        let fx = f.value(x);
        if !fx.is_finite() {
            continue;
        }
        let grad = f.sparse_gradient(x);
        let gscale = grad.iter().map(|g| g.1.abs()).fold(0.0, f64::max);
        for &(i, gi) in &grad {
            let mut h = 1e-6 * x[i].abs().max(1.0);
            let mut fd = f64::NAN;
            for _ in 0..8 {
                xp[i] = x[i] + h;
                let fp = f.value(&xp);
                xp[i] = x[i] - h;
                let fm = f.value(&xp);
                xp[i] = x[i];
                if fp.is_finite() && fm.is_finite() {
                    fd = (fp - fm) / (2.0 * h);
                    break;
                }
                h *= 0.1;
            }
            if !fd.is_finite() {
                continue;
            }
            let noise = 1e-15 * fx.abs().max(1.0) / h;
            if (fd - gi).abs() > rel_tol * gi.abs().max(gscale * 1e-3) + 10.0 * noise {
                return Err(Error::Domain(format!(
                    "gradient of `{label}` wrt x[{i}]: analytic {gi:.9e}, difference {fd:.9e}"
                )));
            }
        }
    }
    Ok(())
}

struct Run {
    x: Vec<f64>,
    iterations: usize,
    status: SolveStatus,
    kkt: f64,
    diagnostic: Option<String>,
}

/// Moves a boundary point into the strict interior. `None` if there is none.
fn phase_one(
    objective: &ConvexFunction,
    cons: &[&ConvexFunction],
    start: &[f64],
    cfg: &SmoothSolverConfig,
) -> (Option<Vec<f64>>, usize) {
    let n = start.len();
    let s_idx = n;
    let mut aug: Vec<ConvexFunction> = cons
        .iter()
        .map(|g| {
            let mut g = (*g).clone();
            g.linear.push((s_idx, -1.0));
            g
        })
        .collect();
    for (i, &x0) in start.iter().enumerate() {
        aug.push(ConvexFunction::affine(vec![(i, 1.0)], -x0 - cfg.phase1_radius));
        aug.push(ConvexFunction::affine(vec![(i, -1.0)], x0 - cfg.phase1_radius));
    }
    // Keep the original objective's domain (its logs) reachable: it is not
    // constrained here, only checked at the end.
    let obj = ConvexFunction::affine(vec![(s_idx, 1.0)], 0.0);
    let worst = cons
        .iter()
        .map(|g| g.value(start))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut x0 = start.to_vec();
    x0.push(worst.max(0.0) + 1.0);
    let refs: Vec<&ConvexFunction> = aug.iter().collect();
    let target = -cfg.phase1_target;
    let p1_cfg = SmoothSolverConfig {
        tol_gap: 1e-10,
        ..cfg.clone()
    };
    let run = primal_dual(&obj, &refs, x0, &p1_cfg, &|x| x[s_idx] <= target);
    let mut x = run.x;
    let s = x.pop().unwrap_or(f64::INFINITY);
    let strictly = s < 0.0 && cons.iter().all(|g| g.value(&x) < 0.0);
    if strictly && objective.value(&x).is_finite() {
        (Some(x), run.iterations)
    } else {
        (None, run.iterations)
    }
}

fn residual_norm(
    objective: &ConvexFunction,
    cons: &[&ConvexFunction],
    x: &[f64],
    g: &[f64],
    lam: &[f64],
    t: f64,
) -> f64 {
    let mut rd = vec![0.0; x.len()];
    objective.add_gradient(x, 1.0, &mut rd);
    for (c, &l) in cons.iter().zip(lam) {
        c.add_gradient(x, l, &mut rd);
    }
    let mut sq: f64 = rd.iter().map(|v| v * v).sum();
    for (&gi, &li) in g.iter().zip(lam) {
        let rc = -li * gi - 1.0 / t;
        sq += rc * rc;
    }
    sq.sqrt()
}

fn newton_solve(h: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = h.clone().cholesky() {
        return ch.solve(rhs);
    }
    let n = h.nrows();
    let diag_max = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut delta = 1e-12 * diag_max;
    for _ in 0..8 {
        let mut reg = h.clone();
        for i in 0..n {
            reg[(i, i)] += delta;
        }
        if let Some(ch) = reg.cholesky() {
            return ch.solve(rhs);
        }
        delta *= 100.0;
    }
    log::debug!("newton system not factorable, taking a gradient step");
    rhs / diag_max
}

/// Primal-dual path following from a strictly feasible `x`.
fn primal_dual(
    objective: &ConvexFunction,
    cons: &[&ConvexFunction],
    mut x: Vec<f64>,
    cfg: &SmoothSolverConfig,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Run {
    let n = x.len();
    let m = cons.len();
    let mut g: Vec<f64> = cons.iter().map(|c| c.value(&x)).collect();
    let f_start = objective.value(&x);
    let lam0 = (1.0 + f_start.abs()) / (m.max(1) as f64);
    let mut lam: Vec<f64> = g.iter().map(|&gi| lam0 / (-gi)).collect();
    let mut best_x = x.clone();
    let mut best_f = f_start;
    let mut kkt = f64::INFINITY;
    let mut diagnostic = None;
    let mut last_step: Option<(f64, f64)> = None;

    for iter in 0..cfg.max_iterations {
        if stop(&x) {
            return Run {
                x,
                iterations: iter,
                status: SolveStatus::Optimal,
                kkt,
                diagnostic: None,
            };
        }
        let grads: Vec<Vec<(usize, f64)>> = cons.iter().map(|c| c.sparse_gradient(&x)).collect();
        let mut gf = vec![0.0; n];
        objective.add_gradient(&x, 1.0, &mut gf);
        let mut rd = gf.clone();
        for (gr, &l) in grads.iter().zip(&lam) {
            for &(i, v) in gr {
                rd[i] += l * v;
            }
        }
        let gap: f64 = g.iter().zip(&lam).map(|(gi, li)| -gi * li).sum();
        kkt = rd.iter().fold(0.0, |a, v| a.max(v.abs()));
        if kkt <= cfg.tol_kkt && gap <= cfg.tol_gap {
            return Run {
                x,
                iterations: iter,
                status: SolveStatus::Optimal,
                kkt,
                diagnostic: None,
            };
        }
        // Hold t after a short step so the next Newton steps recenter.
        let t = match last_step {
            Some((s, tp)) if s < 0.1 => tp,
            _ if m > 0 => cfg.mu * m as f64 / gap,
            _ => f64::INFINITY,
        };

        let mut h = DMatrix::<f64>::zeros(n, n);
        objective.add_hessian(&x, 1.0, &mut h);
        let mut rhs = DVector::from_iterator(n, gf.iter().map(|v| -v));
        for (k, gr) in grads.iter().enumerate() {
            cons[k].add_hessian(&x, lam[k], &mut h);
            let w = lam[k] / (-g[k]);
            for &(a, va) in gr {
                for &(b, vb) in gr {
                    h[(a, b)] += w * va * vb;
                }
                rhs[a] -= va / (t * (-g[k]));
            }
        }
        let dx = newton_solve(h, &rhs);
        let dlam: Vec<f64> = (0..m)
            .map(|k| {
                let rc = -lam[k] * g[k] - 1.0 / t;
                let gdx: f64 = grads[k].iter().map(|&(i, v)| v * dx[i]).sum();
                (rc - lam[k] * gdx) / g[k]
            })
            .collect();

        let mut s_max: f64 = 1.0;
        for k in 0..m {
            if dlam[k] < 0.0 {
                s_max = s_max.min(-lam[k] / dlam[k]);
            }
        }
        let mut s = 0.99 * s_max;
        let r0 = residual_norm(objective, cons, &x, &g, &lam, t);
        let mut accepted = None;
        while s > 1e-14 {
            let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + s * d).collect();
            let gn: Vec<f64> = cons.iter().map(|c| c.value(&xn)).collect();
            if gn.iter().all(|v| *v < 0.0) && objective.value(&xn).is_finite() {
                let ln: Vec<f64> = lam.iter().zip(&dlam).map(|(l, d)| l + s * d).collect();
                let r1 = residual_norm(objective, cons, &xn, &gn, &ln, t);
                if r1 <= (1.0 - cfg.ls_alpha * s) * r0 {
                    accepted = Some((xn, gn, ln));
                    break;
                }
            }
            s *= cfg.ls_beta;
        }
        let Some((xn, gn, ln)) = accepted else {
            diagnostic = Some(format!("line search stalled at iteration {iter}"));
            let status = if kkt <= cfg.tol_kkt * 10.0 && gap <= cfg.tol_gap * 100.0 {
                SolveStatus::Optimal
            } else {
                SolveStatus::MaxIters
            };
            let f = objective.value(&x);
            let out = if f <= best_f { x } else { best_x };
            return Run {
                x: out,
                iterations: iter,
                status,
                kkt,
                diagnostic,
            };
        };
        last_step = Some((s, t));
        x = xn;
        g = gn;
        lam = ln.into_iter().map(|l| l.max(1e-300)).collect();
        let f = objective.value(&x);
        if f <= best_f {
            best_f = f;
            best_x.clone_from(&x);
        }
    }
    diagnostic.get_or_insert_with(|| "iteration limit".into());
    Run {
        x: best_x,
        iterations: cfg.max_iterations,
        status: SolveStatus::MaxIters,
        kkt,
        diagnostic,
    }
}
