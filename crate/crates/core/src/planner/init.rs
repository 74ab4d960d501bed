//! Circular initial trajectories placed by packing equal circles in the disk
//! that covers all users.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{Point, Scenario, Trajectory};

/// Largest UAV count with a built-in packing.
pub const MAX_PACKED_UAVS: usize = 5;

/// Ratio of the packed circle radius to the container radius for `m` equal
/// circles. For `m` in 2..=5 the optimal packing is a ring of touching
/// circles, giving `sin(pi/m) / (1 + sin(pi/m))`.
pub fn packing_ratio(m: usize) -> Result<f64> {
    match m {
        1 => Ok(1.0),
        2..=MAX_PACKED_UAVS => {
            let s = (PI / m as f64).sin();
            Ok(s / (1.0 + s))
        }
        _ => Err(Error::Unsupported(format!(
            "no circle packing for {m} UAVs (at most {MAX_PACKED_UAVS})"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitTrajectorySpec {
    /// Mean of the user positions.
    pub center: Point,
    /// Radius of the disk around `center` covering every user, after any
    /// separation repair.
    pub cover_radius: f64,
    pub packing_radius: f64,
    pub circle_centers: Vec<Point>,
    /// Radius of a full-speed loop over one period, `V_max T / (2 pi)`.
    pub max_radius: f64,
    pub trajectory_radius: f64,
    /// Angle of each slot on the circle.
    pub angles: Vec<f64>,
    /// True when the cover radius had to grow to keep UAVs apart.
    pub repaired: bool,
}

pub fn init_circular_trajectories(scenario: &Scenario) -> Result<(Trajectory, InitTrajectorySpec)> {
    let mm = scenario.num_uavs();
    let nn = scenario.num_slots();
    let ratio = packing_ratio(mm)?;
    let kk = scenario.num_users() as f64;
    let center = scenario
        .users()
        .iter()
        .fold(Point::default(), |acc, &w| acc + w * (1.0 / kk));
    let mut cover_radius = scenario
        .users()
        .iter()
        .map(|w| w.dist(center))
        .fold(0.0, f64::max);
    let mut packing_radius = cover_radius * ratio;
    let mut repaired = false;
    if mm >= 2 && 2.0 * packing_radius < scenario.min_separation() {
        packing_radius = scenario.min_separation();
        cover_radius = packing_radius / ratio;
        repaired = true;
    }
    let ring = if mm == 1 { 0.0 } else { cover_radius - packing_radius };
    let circle_centers: Vec<Point> = (0..mm)
        .map(|m| {
            let phi = 2.0 * PI * m as f64 / mm as f64;
            center + Point::new(phi.cos(), phi.sin()) * ring
        })
        .collect();

    let r_max = scenario.max_speed() * scenario.period() / (2.0 * PI);
    // Keep every chord within one slot's reach.
    let chord_cap = if nn > 2 {
        scenario.max_step() / (2.0 * (PI / (nn - 1) as f64).sin())
    } else {
        f64::INFINITY
    };
    let trajectory_radius = r_max.min(packing_radius / 2.0).min(chord_cap);
    let angles: Vec<f64> = (0..nn)
        .map(|n| 2.0 * PI * n as f64 / (nn - 1) as f64)
        .collect();
    let per_uav: Vec<Vec<Point>> = circle_centers
        .iter()
        .map(|&c| {
            let mut w: Vec<Point> = angles
                .iter()
                .map(|&t| c + Point::new(t.cos(), t.sin()) * trajectory_radius)
                .collect();
            w[nn - 1] = w[0];
            w
        })
        .collect();
    let trajectory = Trajectory::from_waypoints(per_uav)?;
    Ok((
        trajectory,
        InitTrajectorySpec {
            center,
            cover_radius,
            packing_radius,
            circle_centers,
            max_radius: r_max,
            trajectory_radius,
            angles,
            repaired,
        },
    ))
}
