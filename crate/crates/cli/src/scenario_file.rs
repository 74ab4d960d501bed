//! TOML scenario documents.

use std::path::Path;

use multiuav::model::{min_slots_for_accuracy, Point, Scenario, ScenarioParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Uniform random user placement in an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserGeneration {
    pub count: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Explicit `[x, y]` positions in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_positions: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<UserGeneration>,
    #[serde(default = "defaults::num_uavs")]
    pub num_uavs: usize,
    #[serde(default = "defaults::altitude")]
    pub altitude: f64,
    pub period: f64,
    /// Derived from the discretization threshold when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_slots: Option<usize>,
    #[serde(default = "defaults::max_speed")]
    pub max_speed: f64,
    #[serde(default = "defaults::min_separation")]
    pub min_separation: f64,
    #[serde(default = "defaults::max_power")]
    pub max_power: f64,
    #[serde(default = "defaults::noise_power_dbm")]
    pub noise_power_dbm: f64,
    #[serde(default = "defaults::ref_gain_db")]
    pub ref_gain_db: f64,
    #[serde(default = "defaults::discretization_threshold")]
    pub discretization_threshold: f64,
    #[serde(default = "defaults::convergence_threshold")]
    pub convergence_threshold: f64,
    #[serde(default = "defaults::subslot_factor")]
    pub subslot_factor: usize,
}

mod defaults {
    pub fn num_uavs() -> usize {
        1
    }
    pub fn altitude() -> f64 {
        100.0
    }
    pub fn max_speed() -> f64 {
        50.0
    }
    pub fn min_separation() -> f64 {
        100.0
    }
    pub fn max_power() -> f64 {
        0.1
    }
    pub fn noise_power_dbm() -> f64 {
        -110.0
    }
    pub fn ref_gain_db() -> f64 {
        -60.0
    }
    pub fn discretization_threshold() -> f64 {
        0.5
    }
    pub fn convergence_threshold() -> f64 {
        1e-4
    }
    pub fn subslot_factor() -> usize {
        100
    }
}

/// `10^(exponent)`, correctly rounded when the exponent is an integer.
fn pow10(exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() < 300.0 {
        format!("1e{}", exponent as i32).parse().expect("valid float literal")
    } else {
        10f64.powf(exponent)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    pow10(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    pow10((dbm - 30.0) / 10.0)
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub period: Option<f64>,
    pub num_uavs: Option<usize>,
    pub seed: Option<u64>,
    pub convergence_threshold: Option<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(t) = o.period {
            self.period = t;
        }
        if let Some(m) = o.num_uavs {
            self.num_uavs = m;
        }
        if let Some(seed) = o.seed {
            if let Some(g) = &mut self.generate {
                g.seed = seed;
            }
        }
        if let Some(eps) = o.convergence_threshold {
            self.convergence_threshold = eps;
        }
    }

    pub fn users(&self) -> Result<Vec<Point>, CliError> {
        match (&self.user_positions, &self.generate) {
            (Some(users), None) => Ok(users.iter().map(|&[x, y]| Point::new(x, y)).collect()),
            (None, Some(g)) => {
                if g.count == 0 || !(g.x_min < g.x_max) || !(g.y_min < g.y_max) {
                    return Err(CliError::Validation(
                        "generate: needs count >= 1 and non-empty x/y ranges".into(),
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                Ok((0..g.count)
                    .map(|_| Point::new(rng.gen_range(g.x_min..g.x_max), rng.gen_range(g.y_min..g.y_max)))
                    .collect())
            }
            _ => Err(CliError::Validation(
                "exactly one of `user_positions` and `generate` must be given".into(),
            )),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        self.generate.as_ref().map(|g| g.seed)
    }

    pub fn num_slots(&self) -> Result<usize, CliError> {
        match self.num_slots {
            Some(n) => Ok(n),
            None => min_slots_for_accuracy(self.max_speed, self.period, self.altitude, self.discretization_threshold)
                .map_err(CliError::from),
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let params = ScenarioParams {
            user_positions: self.users()?,
            num_uavs: self.num_uavs,
            altitude: self.altitude,
            period: self.period,
            num_slots: self.num_slots()?,
            max_speed: self.max_speed,
            min_separation: self.min_separation,
            max_power: self.max_power,
            noise_power: dbm_to_watts(self.noise_power_dbm),
            ref_channel_gain: db_to_linear(self.ref_gain_db),
            discretization_threshold: self.discretization_threshold,
            convergence_threshold: self.convergence_threshold,
            subslot_factor: self.subslot_factor,
        };
        Scenario::new(params).map_err(CliError::from)
    }
}
