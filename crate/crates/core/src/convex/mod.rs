//! Solver layer: a dense simplex for the scheduling LP and a primal-dual
//! interior-point method for the smooth convex SCA subproblems.

pub mod function;
pub mod lp;
pub mod smooth;

pub use function::{ConvexFunction, InvTerm, Log2InvSum, NegLog2, SquareTerm};
pub use lp::{solve_lp, LinearProgram};
pub use smooth::{
    check_gradients, solve_smooth, solve_smooth_with, Constraint, ConstraintKind,
    SmoothConvexProgram, SmoothSolverConfig, VariableBlock, VariableLayout,
};

/// Constraint violation accepted on returned points (scaled units).
pub const TOL_FEAS: f64 = 1e-7;
/// First-order optimality residual required for [`SolveStatus::Optimal`].
pub const TOL_KKT: f64 = 1e-6;
/// Optimality tolerance of the simplex (reduced costs, pivots).
pub const TOL_LP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
    NumericFailure,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub solution: Vec<f64>,
    /// Value of the maximized objective at `solution`.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub diagnostic: Option<String>,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
