#![allow(dead_code)]

use multiuav::model::{Point, Scenario, ScenarioParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn users_in_square(rng: &mut ChaCha8Rng, count: usize, half_width: f64) -> Vec<Point> {
    (0..count)
        .map(|_| {
            Point::new(
                rng.gen_range(-half_width..half_width),
                rng.gen_range(-half_width..half_width),
            )
        })
        .collect()
}

/// Reference constants with the given users, UAV count, period and slots;
/// the discretization threshold is set just loose enough.
pub fn scenario(users: Vec<Point>, uavs: usize, period: f64, slots: usize) -> Scenario {
    let eps = 50.0 * period / (100.0 * slots as f64);
    Scenario::new(ScenarioParams {
        num_uavs: uavs,
        period,
        num_slots: slots,
        discretization_threshold: eps.max(1e-3) * (1.0 + 1e-9),
        ..ScenarioParams::with_users(users)
    })
    .unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
