//! Joint user scheduling, UAV trajectory and transmit power design for multi-UAV
//! downlink networks.
//!
//! The objective is the minimum time-averaged rate over all ground users. The
//! relaxed problem is attacked by block coordinate descent over three blocks:
//!
//! * [`scheduling`]: a linear program in the association weights,
//! * [`trajectory`]: a convex surrogate built from first-order Taylor bounds,
//! * [`power`]: a convex surrogate built from a difference-of-concave split.
//!
//! [`planner`] drives the iteration, provides the circle-packing initialization
//! and rounds the relaxed schedule to a binary one over finer sub-slots.
//! [`baselines`] holds the reference schemes used for comparison. The solvers
//! behind the blocks live in [`convex`].

pub mod baselines;
pub mod convex;
pub mod error;
pub mod model;
pub mod planner;
pub mod power;
pub mod scheduling;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{
    Point, PowerProfile, RateReport, Scenario, ScenarioParams, Schedule, ScheduleMode, Trajectory,
};
