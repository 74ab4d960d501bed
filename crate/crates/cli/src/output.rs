//! Run artifacts: a JSON summary plus CSV tables.

use std::io::Write;
use std::path::Path;

use multiuav::baselines::SchemeRun;
use multiuav::model::{Point, PowerProfile, Scenario, Schedule, ScheduleMode, Trajectory};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::error::CliError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const POWER_FILE: &str = "power.csv";
pub const SCHEDULE_FILE: &str = "schedule.csv";
pub const RELAXED_SCHEDULE_FILE: &str = "relaxed_schedule.csv";
pub const TRACE_FILE: &str = "trace.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: String,
    pub seed: Option<u64>,
    pub num_users: usize,
    pub num_uavs: usize,
    pub num_slots: usize,
    pub subslot_factor: usize,
    pub period: f64,
    pub convergence_threshold: f64,
    /// Min rate of the relaxed schedule, bps/Hz.
    pub eta: f64,
    pub binary_eta: f64,
    pub user_rates: Vec<f64>,
    pub binary_user_rates: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: Summary,
    pub trajectory: Trajectory,
    pub power: PowerProfile,
    pub schedule: Schedule,
    pub binary_schedule: Schedule,
    pub trace: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    uav: usize,
    slot: usize,
    time_s: f64,
    x_m: f64,
    y_m: f64,
    speed_mps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PowerRow {
    uav: usize,
    slot: usize,
    power_w: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScheduleRow {
    user: usize,
    uav: usize,
    subslot: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RelaxedRow {
    user: usize,
    uav: usize,
    slot: usize,
    alpha: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    iteration: usize,
    eta: f64,
}

impl RunOutput {
    pub fn from_run(scenario: &Scenario, run: &SchemeRun, seed: Option<u64>) -> Self {
        let r = &run.report;
        let rates = multiuav::model::evaluate_rates(scenario, &r.schedule, &r.trajectory, &r.power)
            .map(|x| x.average_rates)
            .unwrap_or_default();
        let summary = Summary {
            scheme: run.scheme.as_str().to_string(),
            seed,
            num_users: scenario.num_users(),
            num_uavs: scenario.num_uavs(),
            num_slots: scenario.num_slots(),
            subslot_factor: scenario.subslot_factor(),
            period: scenario.period(),
            convergence_threshold: scenario.convergence_threshold(),
            eta: r.eta(),
            binary_eta: run.binary_rates.min_rate,
            user_rates: rates,
            binary_user_rates: run.binary_rates.average_rates.clone(),
            iterations: r.iterations(),
            converged: r.converged,
            warnings: r.warnings.clone(),
            failure: r.failure.clone(),
        };
        RunOutput {
            summary,
            trajectory: r.trajectory.clone(),
            power: r.power.clone(),
            schedule: r.schedule.clone(),
            binary_schedule: run.binary_schedule.clone(),
            trace: r.trace.clone(),
        }
    }

    /// Writes every file; each lands by rename so readers never see a partial file.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let s = &self.summary;
        let slot_len = s.period / s.num_slots as f64;

        let (mm, nn) = (self.trajectory.num_uavs(), self.trajectory.num_slots());
        let mut rows = Vec::with_capacity(mm * nn);
        for m in 0..mm {
            for n in 0..nn {
                let q = self.trajectory.get(m, n);
                let next = self.trajectory.get(m, (n + 1) % nn);
                rows.push(TrajectoryRow {
                    uav: m,
                    slot: n,
                    time_s: n as f64 * slot_len,
                    x_m: q.x,
                    y_m: q.y,
                    speed_mps: if n + 1 < nn { q.dist(next) / slot_len } else { 0.0 },
                });
            }
        }
        write_csv(dir, TRAJECTORY_FILE, &["uav", "slot", "time_s", "x_m", "y_m", "speed_mps"], &rows)?;

        let power: Vec<PowerRow> = (0..self.power.num_uavs())
            .flat_map(|m| (0..self.power.num_slots()).map(move |n| (m, n)))
            .map(|(m, n)| PowerRow {
                uav: m,
                slot: n,
                power_w: self.power.get(m, n),
            })
            .collect();
        write_csv(dir, POWER_FILE, &["uav", "slot", "power_w"], &power)?;

        let a = &self.schedule;
        let mut relaxed = Vec::new();
        for k in 0..a.num_users() {
            for m in 0..a.num_uavs() {
                for n in 0..a.num_slots() {
                    relaxed.push(RelaxedRow {
                        user: k,
                        uav: m,
                        slot: n,
                        alpha: a.get(k, m, n),
                    });
                }
            }
        }
        write_csv(dir, RELAXED_SCHEDULE_FILE, &["user", "uav", "slot", "alpha"], &relaxed)?;

        let b = &self.binary_schedule;
        let mut served = Vec::new();
        for k in 0..b.num_users() {
            for m in 0..b.num_uavs() {
                for c in 0..b.num_slots() {
                    if b.get(k, m, c) == 1.0 {
                        served.push(ScheduleRow { user: k, uav: m, subslot: c });
                    }
                }
            }
        }
        write_csv(dir, SCHEDULE_FILE, &["user", "uav", "subslot"], &served)?;

        let trace: Vec<TraceRow> = self
            .trace
            .iter()
            .enumerate()
            .map(|(i, &eta)| TraceRow { iteration: i + 1, eta })
            .collect();
        write_csv(dir, TRACE_FILE, &["iteration", "eta"], &trace)?;

        let json = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        write_atomic(dir, SUMMARY_FILE, json.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let text = read_file(&dir.join(SUMMARY_FILE))?;
        let summary: Summary = serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{SUMMARY_FILE}: {e}")))?;
        let (kk, mm, nn, tau) = (summary.num_users, summary.num_uavs, summary.num_slots, summary.subslot_factor);

        let mut grid = Grid::new(mm, nn, TRAJECTORY_FILE);
        for r in read_csv::<TrajectoryRow>(dir, TRAJECTORY_FILE)? {
            grid.put(r.uav, r.slot, Point::new(r.x_m, r.y_m))?;
        }
        let trajectory = Trajectory::from_waypoints(grid.finish()?)?;

        let mut grid = Grid::new(mm, nn, POWER_FILE);
        for r in read_csv::<PowerRow>(dir, POWER_FILE)? {
            grid.put(r.uav, r.slot, r.power_w)?;
        }
        let power = PowerProfile::from_levels(grid.finish()?)?;

        let mut schedule = Schedule::zeros(kk, mm, nn, ScheduleMode::Relaxed);
        let mut seen = vec![false; kk * mm * nn];
        for r in read_csv::<RelaxedRow>(dir, RELAXED_SCHEDULE_FILE)? {
            if r.user >= kk || r.uav >= mm || r.slot >= nn {
                return Err(inconsistent(RELAXED_SCHEDULE_FILE, "index out of range"));
            }
            let i = (r.user * mm + r.uav) * nn + r.slot;
            if std::mem::replace(&mut seen[i], true) {
                return Err(inconsistent(RELAXED_SCHEDULE_FILE, "duplicate row"));
            }
            schedule.set(r.user, r.uav, r.slot, r.alpha);
        }
        if seen.iter().any(|s| !s) {
            return Err(inconsistent(RELAXED_SCHEDULE_FILE, "missing rows"));
        }

        let mut binary = Schedule::zeros_subslotted(kk, mm, nn, tau, ScheduleMode::Binary);
        for r in read_csv::<ScheduleRow>(dir, SCHEDULE_FILE)? {
            if r.user >= kk || r.uav >= mm || r.subslot >= nn * tau {
                return Err(inconsistent(SCHEDULE_FILE, "index out of range"));
            }
            binary.set(r.user, r.uav, r.subslot, 1.0);
        }

        let mut trace = Vec::new();
        for (i, r) in read_csv::<TraceRow>(dir, TRACE_FILE)?.into_iter().enumerate() {
            if r.iteration != i + 1 {
                return Err(inconsistent(TRACE_FILE, "iterations must run 1, 2, ..."));
            }
            trace.push(r.eta);
        }

        Ok(RunOutput {
            summary,
            trajectory,
            power,
            schedule,
            binary_schedule: binary,
            trace,
        })
    }
}

/// Dense (uav, slot) table filled from CSV rows.
struct Grid<T> {
    cells: Vec<Vec<Option<T>>>,
    file: &'static str,
}

impl<T> Grid<T> {
    fn new(rows: usize, cols: usize, file: &'static str) -> Self {
        Self {
            cells: (0..rows).map(|_| (0..cols).map(|_| None).collect()).collect(),
            file,
        }
    }

    fn put(&mut self, r: usize, c: usize, v: T) -> Result<(), CliError> {
        let cell = self
            .cells
            .get_mut(r)
            .and_then(|row| row.get_mut(c))
            .ok_or_else(|| inconsistent(self.file, &format!("row ({r}, {c}) outside the summary's shape")))?;
        if cell.replace(v).is_some() {
            return Err(inconsistent(self.file, &format!("duplicate row ({r}, {c})")));
        }
        Ok(())
    }

    fn finish(self) -> Result<Vec<Vec<T>>, CliError> {
        let file = self.file;
        self.cells
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<T>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| inconsistent(file, "missing rows"))
    }
}

fn inconsistent(file: &str, what: &str) -> CliError {
    CliError::Parse(format!("{file}: {what}"))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn read_csv<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>, CliError> {
    let path = dir.join(name);
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Parse(format!("{name}: {e}")))
}

/// Header is written explicitly so empty tables still carry it.
pub fn write_csv<T: Serialize>(dir: &Path, name: &str, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(dir, name, &bytes)
}

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let target = dir.join(name);
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", target.display())))?;
    Ok(())
}
