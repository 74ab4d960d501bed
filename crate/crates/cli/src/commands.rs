use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use multiuav::baselines::{run_scheme, SchemeId};
use multiuav::model::{evaluate_rates, validate_feasibility, Scenario, Violation};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{write_csv, RunOutput};
use crate::scenario_file::{Overrides, ScenarioFile};

#[derive(Debug, Clone)]
pub struct SolveArgs {
    pub scenario: PathBuf,
    pub scheme: SchemeId,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub max_iters: Option<usize>,
}

/// Loads a scenario file and applies overrides.
pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<(ScenarioFile, Scenario), CliError> {
    let mut file = ScenarioFile::load(path)?;
    file.apply(overrides);
    let scenario = file.to_scenario()?;
    Ok((file, scenario))
}

fn solve_scenario(
    scenario: &Scenario,
    scheme: SchemeId,
    max_iters: Option<usize>,
) -> Result<multiuav::baselines::SchemeRun, CliError> {
    Ok(run_scheme(scenario, scheme, |cfg| {
        if let Some(i) = max_iters {
            cfg.max_iterations = i;
        }
    })?)
}

/// Runs one scheme and writes its artifacts. Non-convergence still writes
/// outputs before reporting the error.
pub fn solve(args: &SolveArgs) -> Result<RunOutput, CliError> {
    let (file, scenario) = load_scenario(&args.scenario, &args.overrides)?;
    info!(
        "solving {} with K={} M={} N={}",
        args.scheme,
        scenario.num_users(),
        scenario.num_uavs(),
        scenario.num_slots()
    );
    let run = solve_scenario(&scenario, args.scheme, args.max_iters)?;
    let violations = validate_feasibility(&scenario, &run.report.schedule, &run.report.trajectory, &run.report.power)?;
    if !violations.is_empty() {
        return Err(CliError::Validation(list(&violations)));
    }
    let out = RunOutput::from_run(&scenario, &run, file.seed());
    out.write(&args.out)?;
    for w in &out.summary.warnings {
        warn!("{w}");
    }
    if !out.summary.converged {
        return Err(CliError::NotConverged(format!(
            "{} stopped after {} iterations at eta {}",
            args.scheme, out.summary.iterations, out.summary.eta
        )));
    }
    Ok(out)
}

fn list(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Period,
    NumUavs,
}

impl std::str::FromStr for SweepParam {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "period" => Ok(SweepParam::Period),
            "num_uavs" | "uavs" => Ok(SweepParam::NumUavs),
            other => Err(CliError::Parse(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Period => "period",
            SweepParam::NumUavs => "num_uavs",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub schemes: Vec<SchemeId>,
    pub out: PathBuf,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: String,
    pub param: String,
    pub value: f64,
    /// `ok`, `not_converged` or `error: <message>`.
    pub status: String,
    pub eta: Option<f64>,
    pub binary_eta: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_time_s: f64,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const SWEEP_FILE: &str = "sweep.csv";

/// Solves every (scheme, value) pair in parallel; failures are kept in-row.
pub fn sweep(args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    if args.values.is_empty() || args.schemes.is_empty() {
        return Err(CliError::Validation("sweep needs at least one value and one scheme".into()));
    }
    if args.values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::Validation("sweep values must be strictly ascending".into()));
    }
    let base = ScenarioFile::load(&args.scenario)?;
    let mut points = Vec::new();
    for &scheme in &args.schemes {
        for &value in &args.values {
            let overrides = match args.param {
                SweepParam::Period => Overrides {
                    period: Some(value),
                    ..Overrides::default()
                },
                SweepParam::NumUavs => {
                    if value.fract() != 0.0 || value < 1.0 {
                        return Err(CliError::Validation(format!("num_uavs value {value} is not a positive integer")));
                    }
                    Overrides {
                        num_uavs: Some(value as usize),
                        ..Overrides::default()
                    }
                }
            };
            points.push((scheme, value, overrides));
        }
    }
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|(scheme, value, overrides)| {
            let start = Instant::now();
            let mut file = base.clone();
            file.apply(overrides);
            let result = file
                .to_scenario()
                .and_then(|s| solve_scenario(&s, *scheme, args.max_iters));
            let wall_time_s = start.elapsed().as_secs_f64();
            let mut row = SweepRow {
                scheme: scheme.as_str().to_string(),
                param: args.param.to_string(),
                value: *value,
                status: String::new(),
                eta: None,
                binary_eta: None,
                iterations: None,
                wall_time_s,
            };
            match result {
                Ok(run) => {
                    row.status = if run.report.converged { "ok" } else { "not_converged" }.into();
                    row.eta = Some(run.report.eta());
                    row.binary_eta = Some(run.binary_rates.min_rate);
                    row.iterations = Some(run.report.iterations());
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            info!("{} {}={} -> {}", row.scheme, row.param, row.value, row.status);
            row
        })
        .collect();
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.out.display())))?;
    write_csv(
        &args.out,
        SWEEP_FILE,
        &["scheme", "param", "value", "status", "eta", "binary_eta", "iterations", "wall_time_s"],
        &rows,
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        if self.detail.is_empty() {
            write!(f, "{tag} {}", self.name)
        } else {
            write!(f, "{tag} {}: {}", self.name, self.detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

pub const ETA_TOLERANCE: f64 = 1e-9;

/// Re-loads a run directory and checks it against its scenario.
pub fn validate(scenario_path: &Path, run_dir: &Path) -> Result<ValidationReport, CliError> {
    let out = RunOutput::read(run_dir)?;
    let s = &out.summary;
    let overrides = Overrides {
        period: Some(s.period),
        num_uavs: Some(s.num_uavs),
        seed: s.seed,
        convergence_threshold: Some(s.convergence_threshold),
    };
    let (_, scenario) = load_scenario(scenario_path, &overrides)?;
    let mut checks = Vec::new();

    let shape_ok = s.num_users == scenario.num_users()
        && s.num_slots == scenario.num_slots()
        && s.subslot_factor == scenario.subslot_factor();
    checks.push(Check {
        name: "shape",
        passed: shape_ok,
        detail: if shape_ok {
            String::new()
        } else {
            format!(
                "run has K={} N={} tau={}, scenario has K={} N={} tau={}",
                s.num_users,
                s.num_slots,
                s.subslot_factor,
                scenario.num_users(),
                scenario.num_slots(),
                scenario.subslot_factor()
            )
        },
    });
    if !shape_ok {
        return Ok(ValidationReport { checks });
    }

    let relaxed = validate_feasibility(&scenario, &out.schedule, &out.trajectory, &out.power)?;
    let binary = validate_feasibility(&scenario, &out.binary_schedule, &out.trajectory, &out.power)?;
    let schedule_family = |v: &&Violation| {
        matches!(v.kind.family(), "weight_range" | "binary" | "uav_load" | "user_load")
    };
    let families = [
        ("periodicity", vec!["periodicity"]),
        ("speed", vec!["speed"]),
        ("separation", vec!["separation"]),
        ("power_box", vec!["power_box"]),
    ];
    for (name, fams) in families {
        let hits: Vec<&Violation> = relaxed.iter().filter(|v| fams.contains(&v.kind.family())).collect();
        checks.push(violation_check(name, &hits));
    }
    let hits: Vec<&Violation> = relaxed.iter().filter(schedule_family).collect();
    checks.push(violation_check("relaxed_schedule", &hits));
    let hits: Vec<&Violation> = binary.iter().filter(schedule_family).collect();
    checks.push(violation_check("binary_schedule", &hits));

    for (name, schedule, expected) in [
        ("eta", &out.schedule, s.eta),
        ("binary_eta", &out.binary_schedule, s.binary_eta),
    ] {
        let check = match evaluate_rates(&scenario, schedule, &out.trajectory, &out.power) {
            Ok(r) => {
                let diff = (r.min_rate - expected).abs();
                Check {
                    name,
                    passed: diff <= ETA_TOLERANCE,
                    detail: format!("recomputed {} vs summary {} (diff {diff:.3e})", r.min_rate, expected),
                }
            }
            Err(e) => Check {
                name,
                passed: false,
                detail: e.to_string(),
            },
        };
        checks.push(check);
    }
    Ok(ValidationReport { checks })
}

fn violation_check(name: &'static str, hits: &[&Violation]) -> Check {
    Check {
        name,
        passed: hits.is_empty(),
        detail: hits.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
    }
}
