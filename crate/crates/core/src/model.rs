//! Domain types and the channel / SINR / rate arithmetic of the downlink model.
//!
//! Everything here is in linear units: watts, dimensionless gains and rates in
//! bps/Hz. Slots are indexed from zero, so the periodicity constraint reads
//! `q_m[0] == q_m[N-1]`.

use std::f64::consts::LN_2;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Relative slack on the squared separation constraint.
pub const SEPARATION_REL_TOL: f64 = 1e-6;
/// Relative slack on the per-slot displacement cap.
pub const SPEED_REL_TOL: f64 = 1e-9;
/// Absolute slack (meters) on `q[0] == q[N-1]`.
pub const PERIODICITY_TOL: f64 = 1e-9;
/// Slack on the association weights and their per-slot sums.
pub const SCHEDULE_TOL: f64 = 1e-9;

/// Horizontal position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        (self - other).norm_sq()
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// `log2(1 + x)` without losing precision for small `x`.
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Raw scenario parameters. Turn into a validated [`Scenario`] with [`Scenario::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub user_positions: Vec<Point>,
    pub num_uavs: usize,
    /// Flight altitude in meters.
    pub altitude: f64,
    /// Period in seconds.
    pub period: f64,
    pub num_slots: usize,
    /// Maximum speed in m/s.
    pub max_speed: f64,
    /// Minimum inter-UAV distance in meters.
    pub min_separation: f64,
    /// Peak transmit power in watts.
    pub max_power: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Linear channel power gain at the 1 m reference distance.
    pub ref_channel_gain: f64,
    /// Upper bound on the per-slot displacement over the altitude.
    pub discretization_threshold: f64,
    /// Fractional objective increase below which the outer iteration stops.
    pub convergence_threshold: f64,
    /// Number of sub-slots each slot is split into for binary reconstruction.
    pub subslot_factor: usize,
}

impl ScenarioParams {
    /// Parameters from the reference numerical setup, with the given users,
    /// a 60 s period and 60 slots.
    pub fn with_users(user_positions: Vec<Point>) -> Self {
        Self {
            user_positions,
            num_uavs: 1,
            altitude: 100.0,
            period: 60.0,
            num_slots: 60,
            max_speed: 50.0,
            min_separation: 100.0,
            max_power: 0.1,
            noise_power: 1e-14,
            ref_channel_gain: 1e-6,
            discretization_threshold: 0.5,
            convergence_threshold: 1e-4,
            subslot_factor: 100,
        }
    }
}

/// Smallest slot count keeping `V_max * T / N` within `eps_max * H`.
pub fn min_slots_for_accuracy(
    max_speed: f64,
    period: f64,
    altitude: f64,
    discretization_threshold: f64,
) -> Result<usize> {
    for (field, value) in [
        ("max_speed", max_speed),
        ("period", period),
        ("altitude", altitude),
        ("discretization_threshold", discretization_threshold),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::param(field, format!("must be positive, got {value}")));
        }
    }
    let ratio = max_speed * period / (altitude * discretization_threshold);
    // Shave off rounding noise so exact integer ratios do not round up.
    Ok((ratio * (1.0 - 1e-12)).ceil() as usize)
}

/// Validated, immutable problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    params: ScenarioParams,
}

impl Scenario {
    pub fn new(params: ScenarioParams) -> Result<Self> {
        if params.user_positions.is_empty() {
            return Err(Error::param("user_positions", "at least one user is required"));
        }
        if let Some(p) = params.user_positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::param("user_positions", format!("non-finite position {p}")));
        }
        if params.num_uavs == 0 {
            return Err(Error::param("num_uavs", "must be at least 1"));
        }
        if params.num_slots < 2 {
            return Err(Error::param("num_slots", "must be at least 2"));
        }
        if params.subslot_factor == 0 {
            return Err(Error::param("subslot_factor", "must be at least 1"));
        }
        for (field, value) in [
            ("altitude", params.altitude),
            ("period", params.period),
            ("max_speed", params.max_speed),
            ("min_separation", params.min_separation),
            ("max_power", params.max_power),
            ("noise_power", params.noise_power),
            ("ref_channel_gain", params.ref_channel_gain),
            ("discretization_threshold", params.discretization_threshold),
            ("convergence_threshold", params.convergence_threshold),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(field, format!("must be positive, got {value}")));
            }
        }
        let needed = min_slots_for_accuracy(
            params.max_speed,
            params.period,
            params.altitude,
            params.discretization_threshold,
        )?;
        if params.num_slots < needed {
            return Err(Error::param(
                "num_slots",
                format!(
                    "{} slots cannot meet discretization threshold {}; need at least {needed}",
                    params.num_slots, params.discretization_threshold
                ),
            ));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// Same scenario with a different period (re-validated).
    pub fn with_period(&self, period: f64) -> Result<Self> {
        Self::new(ScenarioParams {
            period,
            ..self.params.clone()
        })
    }

    /// Same scenario with a different UAV count (re-validated).
    pub fn with_num_uavs(&self, num_uavs: usize) -> Result<Self> {
        Self::new(ScenarioParams {
            num_uavs,
            ..self.params.clone()
        })
    }

    pub fn num_users(&self) -> usize {
        self.params.user_positions.len()
    }
    pub fn num_uavs(&self) -> usize {
        self.params.num_uavs
    }
    pub fn num_slots(&self) -> usize {
        self.params.num_slots
    }
    pub fn users(&self) -> &[Point] {
        &self.params.user_positions
    }
    pub fn user(&self, k: usize) -> Point {
        self.params.user_positions[k]
    }
    pub fn altitude(&self) -> f64 {
        self.params.altitude
    }
    pub fn period(&self) -> f64 {
        self.params.period
    }
    pub fn max_speed(&self) -> f64 {
        self.params.max_speed
    }
    pub fn min_separation(&self) -> f64 {
        self.params.min_separation
    }
    pub fn max_power(&self) -> f64 {
        self.params.max_power
    }
    pub fn noise_power(&self) -> f64 {
        self.params.noise_power
    }
    pub fn ref_channel_gain(&self) -> f64 {
        self.params.ref_channel_gain
    }
    pub fn convergence_threshold(&self) -> f64 {
        self.params.convergence_threshold
    }
    pub fn subslot_factor(&self) -> usize {
        self.params.subslot_factor
    }

    /// Slot length `T / N` in seconds.
    pub fn slot_length(&self) -> f64 {
        self.params.period / self.params.num_slots as f64
    }

    /// Maximum displacement per slot, `V_max * T / N`.
    pub fn max_step(&self) -> f64 {
        self.params.max_speed * self.slot_length()
    }

    /// Receive SNR when hovering directly above a user at full power.
    pub fn hover_snr(&self) -> f64 {
        self.params.max_power * self.params.ref_channel_gain
            / (self.params.altitude * self.params.altitude * self.params.noise_power)
    }

    /// Free-space gain for a given squared horizontal distance.
    pub(crate) fn gain_at_sq(&self, horizontal_sq: f64) -> f64 {
        let h = self.params.altitude;
        self.params.ref_channel_gain / (h * h + horizontal_sq)
    }
}

/// Per-UAV, per-slot horizontal waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    num_uavs: usize,
    num_slots: usize,
    waypoints: Vec<Point>,
}

impl Trajectory {
    /// Trajectory from per-UAV waypoint lists; all lists must share one length.
    pub fn from_waypoints(per_uav: Vec<Vec<Point>>) -> Result<Self> {
        let num_uavs = per_uav.len();
        if num_uavs == 0 {
            return Err(Error::Shape("trajectory needs at least one UAV".into()));
        }
        let num_slots = per_uav[0].len();
        if per_uav.iter().any(|w| w.len() != num_slots) {
            return Err(Error::Shape("ragged trajectory waypoint lists".into()));
        }
        Ok(Self {
            num_uavs,
            num_slots,
            waypoints: per_uav.into_iter().flatten().collect(),
        })
    }

    /// Every UAV parked at its given position for all slots.
    pub fn stationary(positions: &[Point], num_slots: usize) -> Self {
        Self {
            num_uavs: positions.len(),
            num_slots,
            waypoints: positions
                .iter()
                .flat_map(|p| std::iter::repeat(*p).take(num_slots))
                .collect(),
        }
    }

    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }
    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn get(&self, uav: usize, slot: usize) -> Point {
        self.waypoints[uav * self.num_slots + slot]
    }

    pub fn set(&mut self, uav: usize, slot: usize, p: Point) {
        self.waypoints[uav * self.num_slots + slot] = p;
    }

    pub fn uav(&self, uav: usize) -> &[Point] {
        &self.waypoints[uav * self.num_slots..(uav + 1) * self.num_slots]
    }

    fn check_shape(&self, scenario: &Scenario) -> Result<()> {
        if self.num_uavs != scenario.num_uavs() || self.num_slots != scenario.num_slots() {
            return Err(Error::Shape(format!(
                "trajectory is {}x{}, scenario expects {}x{}",
                self.num_uavs,
                self.num_slots,
                scenario.num_uavs(),
                scenario.num_slots()
            )));
        }
        Ok(())
    }
}

/// Per-UAV, per-slot transmit power in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    num_uavs: usize,
    num_slots: usize,
    levels: Vec<f64>,
}

impl PowerProfile {
    pub fn constant(num_uavs: usize, num_slots: usize, level: f64) -> Self {
        Self {
            num_uavs,
            num_slots,
            levels: vec![level; num_uavs * num_slots],
        }
    }

    /// Every UAV at peak power in every slot.
    pub fn full(scenario: &Scenario) -> Self {
        Self::constant(scenario.num_uavs(), scenario.num_slots(), scenario.max_power())
    }

    pub fn from_levels(per_uav: Vec<Vec<f64>>) -> Result<Self> {
        let num_uavs = per_uav.len();
        if num_uavs == 0 {
            return Err(Error::Shape("power profile needs at least one UAV".into()));
        }
        let num_slots = per_uav[0].len();
        if per_uav.iter().any(|w| w.len() != num_slots) {
            return Err(Error::Shape("ragged power level lists".into()));
        }
        Ok(Self {
            num_uavs,
            num_slots,
            levels: per_uav.into_iter().flatten().collect(),
        })
    }

    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }
    pub fn num_slots(&self) -> usize {
        self.num_slots
    }
    pub fn get(&self, uav: usize, slot: usize) -> f64 {
        self.levels[uav * self.num_slots + slot]
    }
    pub fn set(&mut self, uav: usize, slot: usize, level: f64) {
        self.levels[uav * self.num_slots + slot] = level;
    }

    fn check_shape(&self, scenario: &Scenario) -> Result<()> {
        if self.num_uavs != scenario.num_uavs() || self.num_slots != scenario.num_slots() {
            return Err(Error::Shape(format!(
                "power profile is {}x{}, scenario expects {}x{}",
                self.num_uavs,
                self.num_slots,
                scenario.num_uavs(),
                scenario.num_slots()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    Relaxed,
    Binary,
}

/// Association weights `alpha[k][m][s]`.
///
/// A schedule may live on a finer grid than the trajectory: with
/// `subslots_per_slot = tau`, schedule slot `s` belongs to trajectory slot
/// `s / tau`. Relaxed schedules produced by the scheduling block use `tau = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    num_users: usize,
    num_uavs: usize,
    num_slots: usize,
    subslots_per_slot: usize,
    mode: ScheduleMode,
    weights: Vec<f64>,
}

impl Schedule {
    pub fn zeros(num_users: usize, num_uavs: usize, num_slots: usize, mode: ScheduleMode) -> Self {
        Self::zeros_subslotted(num_users, num_uavs, num_slots, 1, mode)
    }

    /// Empty schedule over `num_slots * subslots_per_slot` schedule slots.
    pub fn zeros_subslotted(
        num_users: usize,
        num_uavs: usize,
        num_slots: usize,
        subslots_per_slot: usize,
        mode: ScheduleMode,
    ) -> Self {
        let total = num_slots * subslots_per_slot;
        Self {
            num_users,
            num_uavs,
            num_slots: total,
            subslots_per_slot,
            mode,
            weights: vec![0.0; num_users * num_uavs * total],
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }
    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }
    /// Number of schedule slots (sub-slots included).
    pub fn num_slots(&self) -> usize {
        self.num_slots
    }
    pub fn subslots_per_slot(&self) -> usize {
        self.subslots_per_slot
    }
    /// Number of trajectory slots this schedule spans.
    pub fn base_slots(&self) -> usize {
        self.num_slots / self.subslots_per_slot
    }
    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    fn idx(&self, user: usize, uav: usize, slot: usize) -> usize {
        (user * self.num_uavs + uav) * self.num_slots + slot
    }

    pub fn get(&self, user: usize, uav: usize, slot: usize) -> f64 {
        self.weights[self.idx(user, uav, slot)]
    }

    pub fn set(&mut self, user: usize, uav: usize, slot: usize, weight: f64) {
        let i = self.idx(user, uav, slot);
        self.weights[i] = weight;
    }

    /// Same weights, tagged relaxed.
    pub fn to_relaxed(&self) -> Schedule {
        Schedule {
            mode: ScheduleMode::Relaxed,
            ..self.clone()
        }
    }

    pub fn is_integral(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0 || w == 1.0)
    }

    /// Total load of one UAV in one schedule slot.
    pub fn uav_load(&self, uav: usize, slot: usize) -> f64 {
        (0..self.num_users).map(|k| self.get(k, uav, slot)).sum()
    }

    /// Total service one user receives in one schedule slot.
    pub fn user_load(&self, user: usize, slot: usize) -> f64 {
        (0..self.num_uavs).map(|m| self.get(user, m, slot)).sum()
    }

    fn check_shape(&self, scenario: &Scenario) -> Result<()> {
        if self.num_users != scenario.num_users()
            || self.num_uavs != scenario.num_uavs()
            || self.base_slots() != scenario.num_slots()
            || self.num_slots % self.subslots_per_slot != 0
        {
            return Err(Error::Shape(format!(
                "schedule is {}x{}x{} (x{} sub-slots), scenario expects {}x{}x{}",
                self.num_users,
                self.num_uavs,
                self.base_slots(),
                self.subslots_per_slot,
                scenario.num_users(),
                scenario.num_uavs(),
                scenario.num_slots()
            )));
        }
        Ok(())
    }
}

/// Per-user rates under a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `per_slot_rates[k][s]` over schedule slots.
    pub per_slot_rates: Vec<Vec<f64>>,
    pub average_rates: Vec<f64>,
    pub min_rate: f64,
}

/// Channel gains `h[k][m][n]` for a fixed trajectory.
#[derive(Debug, Clone)]
pub struct GainTable {
    num_uavs: usize,
    num_slots: usize,
    gains: Vec<f64>,
}

impl GainTable {
    pub fn new(scenario: &Scenario, trajectory: &Trajectory) -> Self {
        let (kk, mm, nn) = (scenario.num_users(), trajectory.num_uavs(), trajectory.num_slots());
        let mut gains = Vec::with_capacity(kk * mm * nn);
        for k in 0..kk {
            let w = scenario.user(k);
            for m in 0..mm {
                for n in 0..nn {
                    gains.push(scenario.gain_at_sq(trajectory.get(m, n).dist_sq(w)));
                }
            }
        }
        Self {
            num_uavs: mm,
            num_slots: nn,
            gains,
        }
    }

    pub fn get(&self, user: usize, uav: usize, slot: usize) -> f64 {
        self.gains[(user * self.num_uavs + uav) * self.num_slots + slot]
    }

    /// SINR of user `k` served by UAV `m` in slot `n`.
    pub fn sinr(&self, power: &PowerProfile, noise: f64, k: usize, m: usize, n: usize) -> f64 {
        let interference: f64 = (0..self.num_uavs)
            .filter(|&j| j != m)
            .map(|j| power.get(j, n) * self.get(k, j, n))
            .sum();
        power.get(m, n) * self.get(k, m, n) / (interference + noise)
    }
}

/// `log2(1 + sinr)` for every (user, UAV, slot).
#[derive(Debug, Clone)]
pub struct RateTable {
    num_users: usize,
    num_uavs: usize,
    num_slots: usize,
    rates: Vec<f64>,
}

impl RateTable {
    pub fn new(scenario: &Scenario, trajectory: &Trajectory, power: &PowerProfile) -> Result<Self> {
        trajectory.check_shape(scenario)?;
        power.check_shape(scenario)?;
        let gains = GainTable::new(scenario, trajectory);
        let (kk, mm, nn) = (scenario.num_users(), scenario.num_uavs(), scenario.num_slots());
        let mut rates = Vec::with_capacity(kk * mm * nn);
        for k in 0..kk {
            for m in 0..mm {
                for n in 0..nn {
                    rates.push(log2_1p(gains.sinr(power, scenario.noise_power(), k, m, n)));
                }
            }
        }
        Ok(Self {
            num_users: kk,
            num_uavs: mm,
            num_slots: nn,
            rates,
        })
    }

    /// Table from explicit entries indexed `[k][m][n]`.
    pub fn from_entries(entries: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let num_users = entries.len();
        let num_uavs = entries.first().map_or(0, Vec::len);
        let num_slots = entries
            .first()
            .and_then(|e| e.first())
            .map_or(0, Vec::len);
        if num_users == 0 || num_uavs == 0 || num_slots == 0 {
            return Err(Error::Shape("rate table must be non-empty".into()));
        }
        let mut rates = Vec::with_capacity(num_users * num_uavs * num_slots);
        for per_user in entries {
            if per_user.len() != num_uavs {
                return Err(Error::Shape("ragged rate table".into()));
            }
            for per_uav in per_user {
                if per_uav.len() != num_slots {
                    return Err(Error::Shape("ragged rate table".into()));
                }
                rates.extend(per_uav);
            }
        }
        Ok(Self {
            num_users,
            num_uavs,
            num_slots,
            rates,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }
    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }
    pub fn num_slots(&self) -> usize {
        self.num_slots
    }
    pub fn get(&self, user: usize, uav: usize, slot: usize) -> f64 {
        self.rates[(user * self.num_uavs + uav) * self.num_slots + slot]
    }
    pub fn entries(&self) -> &[f64] {
        &self.rates
    }

    /// Rates realized by a schedule. Handles sub-slotted schedules.
    pub fn realize(&self, schedule: &Schedule) -> Result<RateReport> {
        if schedule.num_users() != self.num_users
            || schedule.num_uavs() != self.num_uavs
            || schedule.base_slots() != self.num_slots
        {
            return Err(Error::Shape("schedule does not match rate table".into()));
        }
        let tau = schedule.subslots_per_slot();
        let ns = schedule.num_slots();
        let per_slot_rates: Vec<Vec<f64>> = (0..self.num_users)
            .map(|k| {
                (0..ns)
                    .map(|s| {
                        (0..self.num_uavs)
                            .map(|m| schedule.get(k, m, s) * self.get(k, m, s / tau))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let average_rates: Vec<f64> = per_slot_rates
            .iter()
            .map(|r| r.iter().sum::<f64>() / ns as f64)
            .collect();
        let min_rate = average_rates.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(RateReport {
            per_slot_rates,
            average_rates,
            min_rate,
        })
    }
}

/// Free-space gain `rho0 / (H^2 + |q - w_k|^2)`.
pub fn channel_gain(scenario: &Scenario, uav_pos: Point, user_index: usize) -> Result<f64> {
    if user_index >= scenario.num_users() {
        return Err(Error::Index(format!(
            "user {user_index} of {}",
            scenario.num_users()
        )));
    }
    Ok(scenario.gain_at_sq(uav_pos.dist_sq(scenario.user(user_index))))
}

/// SINR of `user_index` served by `uav_index` in `slot`.
pub fn sinr(
    scenario: &Scenario,
    trajectory: &Trajectory,
    power: &PowerProfile,
    user_index: usize,
    uav_index: usize,
    slot: usize,
) -> Result<f64> {
    trajectory.check_shape(scenario)?;
    power.check_shape(scenario)?;
    if user_index >= scenario.num_users()
        || uav_index >= scenario.num_uavs()
        || slot >= scenario.num_slots()
    {
        return Err(Error::Index(format!(
            "(user {user_index}, uav {uav_index}, slot {slot}) outside {}x{}x{}",
            scenario.num_users(),
            scenario.num_uavs(),
            scenario.num_slots()
        )));
    }
    let w = scenario.user(user_index);
    let gain = |m: usize| scenario.gain_at_sq(trajectory.get(m, slot).dist_sq(w));
    let interference: f64 = (0..scenario.num_uavs())
        .filter(|&j| j != uav_index)
        .map(|j| power.get(j, slot) * gain(j))
        .sum();
    Ok(power.get(uav_index, slot) * gain(uav_index) / (interference + scenario.noise_power()))
}

/// Per-slot, average and minimum user rates.
pub fn evaluate_rates(
    scenario: &Scenario,
    schedule: &Schedule,
    trajectory: &Trajectory,
    power: &PowerProfile,
) -> Result<RateReport> {
    schedule.check_shape(scenario)?;
    RateTable::new(scenario, trajectory, power)?.realize(schedule)
}

/// Which constraint a [`Violation`] breaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Periodicity { uav: usize },
    /// Hop from `slot` to `slot + 1` is too long.
    Speed { uav: usize, slot: usize },
    Separation { uav_a: usize, uav_b: usize, slot: usize },
    PowerBox { uav: usize, slot: usize },
    WeightRange { user: usize, uav: usize, slot: usize },
    NotBinary { user: usize, uav: usize, slot: usize },
    UavLoad { uav: usize, slot: usize },
    UserLoad { user: usize, slot: usize },
}

impl ViolationKind {
    /// Short name of the constraint family.
    pub fn family(&self) -> &'static str {
        match self {
            ViolationKind::Periodicity { .. } => "periodicity",
            ViolationKind::Speed { .. } => "speed",
            ViolationKind::Separation { .. } => "separation",
            ViolationKind::PowerBox { .. } => "power_box",
            ViolationKind::WeightRange { .. } => "weight_range",
            ViolationKind::NotBinary { .. } => "binary",
            ViolationKind::UavLoad { .. } => "uav_load",
            ViolationKind::UserLoad { .. } => "user_load",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Size of the breach in the constraint's natural unit (meters, watts, weight).
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} by {:.6e}", self.kind, self.magnitude)
    }
}

/// Checks every constraint of the original problem. Violations are data.
pub fn validate_feasibility(
    scenario: &Scenario,
    schedule: &Schedule,
    trajectory: &Trajectory,
    power: &PowerProfile,
) -> Result<Vec<Violation>> {
    schedule.check_shape(scenario)?;
    trajectory.check_shape(scenario)?;
    power.check_shape(scenario)?;
    let mut out = Vec::new();
    out.extend(trajectory_violations(scenario, trajectory));
    out.extend(power_violations(scenario, power));
    out.extend(schedule_violations(schedule));
    Ok(out)
}

pub(crate) fn trajectory_violations(scenario: &Scenario, trajectory: &Trajectory) -> Vec<Violation> {
    let mut out = Vec::new();
    let (mm, nn) = (trajectory.num_uavs(), trajectory.num_slots());
    let step = scenario.max_step();
    for m in 0..mm {
        let gap = trajectory.get(m, 0).dist(trajectory.get(m, nn - 1));
        if gap > PERIODICITY_TOL {
            out.push(Violation {
                kind: ViolationKind::Periodicity { uav: m },
                magnitude: gap,
            });
        }
        for n in 0..nn - 1 {
            let hop = trajectory.get(m, n).dist(trajectory.get(m, n + 1));
            if hop > step * (1.0 + SPEED_REL_TOL) {
                out.push(Violation {
                    kind: ViolationKind::Speed { uav: m, slot: n },
                    magnitude: hop - step,
                });
            }
        }
    }
    let dmin = scenario.min_separation();
    for n in 0..nn {
        for a in 0..mm {
            for b in a + 1..mm {
                let d_sq = trajectory.get(a, n).dist_sq(trajectory.get(b, n));
                if d_sq < dmin * dmin * (1.0 - SEPARATION_REL_TOL) {
                    out.push(Violation {
                        kind: ViolationKind::Separation {
                            uav_a: a,
                            uav_b: b,
                            slot: n,
                        },
                        magnitude: dmin - d_sq.sqrt(),
                    });
                }
            }
        }
    }
    out
}

fn power_violations(scenario: &Scenario, power: &PowerProfile) -> Vec<Violation> {
    let pmax = scenario.max_power();
    let mut out = Vec::new();
    for m in 0..power.num_uavs() {
        for n in 0..power.num_slots() {
            let p = power.get(m, n);
            let excess = if p.is_nan() {
                f64::INFINITY
            } else if p < 0.0 {
                -p
            } else {
                p - pmax
            };
            if excess > 0.0 {
                out.push(Violation {
                    kind: ViolationKind::PowerBox { uav: m, slot: n },
                    magnitude: excess,
                });
            }
        }
    }
    out
}

fn schedule_violations(schedule: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let (kk, mm, ns) = (schedule.num_users(), schedule.num_uavs(), schedule.num_slots());
    for k in 0..kk {
        for m in 0..mm {
            for s in 0..ns {
                let a = schedule.get(k, m, s);
                let excess = if a.is_nan() {
                    f64::INFINITY
                } else {
                    (-a).max(a - 1.0)
                };
                if excess > SCHEDULE_TOL {
                    out.push(Violation {
                        kind: ViolationKind::WeightRange {
                            user: k,
                            uav: m,
                            slot: s,
                        },
                        magnitude: excess,
                    });
                }
                if schedule.mode() == ScheduleMode::Binary && a != 0.0 && a != 1.0 {
                    out.push(Violation {
                        kind: ViolationKind::NotBinary {
                            user: k,
                            uav: m,
                            slot: s,
                        },
                        magnitude: a.min(1.0 - a).abs(),
                    });
                }
            }
        }
    }
    for s in 0..ns {
        for m in 0..mm {
            let load = schedule.uav_load(m, s);
            if load > 1.0 + SCHEDULE_TOL {
                out.push(Violation {
                    kind: ViolationKind::UavLoad { uav: m, slot: s },
                    magnitude: load - 1.0,
                });
            }
        }
        for k in 0..kk {
            let load = schedule.user_load(k, s);
            if load > 1.0 + SCHEDULE_TOL {
                out.push(Violation {
                    kind: ViolationKind::UserLoad { user: k, slot: s },
                    magnitude: load - 1.0,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::close;

    mod approx_eq {
        pub fn close(a: f64, b: f64, rel: f64) -> bool {
            (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
        }
    }

    fn scenario(users: Vec<Point>, uavs: usize) -> Scenario {
        Scenario::new(ScenarioParams {
            num_uavs: uavs,
            ..ScenarioParams::with_users(users)
        })
        .unwrap()
    }

    #[test]
    fn gain_overhead_and_offset() {
        let s = scenario(vec![Point::new(0.0, 0.0)], 1);
        assert!(close(channel_gain(&s, Point::new(0.0, 0.0), 0).unwrap(), 1e-10, 1e-15));
        assert!(close(channel_gain(&s, Point::new(100.0, 0.0), 0).unwrap(), 5e-11, 1e-15));
        assert!(channel_gain(&s, Point::default(), 1).is_err());
    }

    #[test]
    fn single_uav_sinr_is_snr() {
        let s = scenario(vec![Point::new(0.0, 0.0)], 1);
        let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], s.num_slots());
        let p = PowerProfile::full(&s);
        let g = sinr(&s, &q, &p, 0, 0, 3).unwrap();
        assert!(close(g, 1000.0, 1e-12));
        assert!(sinr(&s, &q, &p, 0, 1, 0).is_err());
        assert!(sinr(&s, &q, &p, 0, 0, 60).is_err());
    }

    #[test]
    fn silent_interferer_leaves_snr() {
        let users = vec![Point::new(0.0, 0.0), Point::new(500.0, 0.0)];
        let s = scenario(users, 2);
        let q = Trajectory::stationary(&[Point::new(0.0, 0.0), Point::new(500.0, 0.0)], 60);
        let mut p = PowerProfile::full(&s);
        for n in 0..60 {
            p.set(1, n, 0.0);
        }
        assert!(close(sinr(&s, &q, &p, 0, 0, 7).unwrap(), 1000.0, 1e-12));
    }

    #[test]
    fn hover_rate_matches_closed_form() {
        let s = scenario(vec![Point::new(0.0, 0.0)], 1);
        let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
        let mut a = Schedule::zeros(1, 1, 60, ScheduleMode::Relaxed);
        for n in 0..60 {
            a.set(0, 0, n, 1.0);
        }
        let r = evaluate_rates(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
        let expected = 1001f64.log2();
        assert!(close(r.min_rate, expected, 1e-12));
        assert!((r.min_rate - 9.9672).abs() < 5e-5);
        assert!(r.per_slot_rates[0].iter().all(|&x| close(x, expected, 1e-12)));
    }

    #[test]
    fn empty_schedule_has_zero_rates() {
        let s = scenario(vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0)], 1);
        let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
        let a = Schedule::zeros(2, 1, 60, ScheduleMode::Relaxed);
        let r = evaluate_rates(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
        assert_eq!(r.min_rate, 0.0);
        assert!(r.average_rates.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn symmetric_time_sharing_is_fair() {
        let s = scenario(vec![Point::new(-200.0, 0.0), Point::new(200.0, 0.0)], 1);
        let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
        let mut a = Schedule::zeros(2, 1, 60, ScheduleMode::Relaxed);
        for n in 0..60 {
            a.set(0, 0, n, 0.5);
            a.set(1, 0, n, 0.5);
        }
        let r = evaluate_rates(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
        assert!(close(r.average_rates[0], r.average_rates[1], 1e-14));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let s = scenario(vec![Point::new(0.0, 0.0)], 1);
        let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 59);
        let a = Schedule::zeros(1, 1, 60, ScheduleMode::Relaxed);
        assert!(matches!(
            evaluate_rates(&s, &a, &q, &PowerProfile::full(&s)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn min_slots_examples() {
        assert_eq!(min_slots_for_accuracy(50.0, 210.0, 100.0, 0.5).unwrap(), 210);
        assert_eq!(min_slots_for_accuracy(50.0, 100.0, 100.0, 1.0).unwrap(), 50);
        assert_eq!(min_slots_for_accuracy(50.0, 100.0, 100.0, 0.5).unwrap(), 100);
        assert_eq!(min_slots_for_accuracy(50.0, 30.0, 100.0, 0.7).unwrap(), 22);
        assert!(matches!(
            min_slots_for_accuracy(0.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidParameter { field: "max_speed", .. })
        ));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        let base = ScenarioParams::with_users(vec![Point::new(0.0, 0.0)]);
        let bad_alt = ScenarioParams {
            altitude: -5.0,
            ..base.clone()
        };
        assert!(matches!(
            Scenario::new(bad_alt),
            Err(Error::InvalidParameter { field: "altitude", .. })
        ));
        let coarse = ScenarioParams {
            num_slots: 59,
            ..base.clone()
        };
        assert!(matches!(
            Scenario::new(coarse),
            Err(Error::InvalidParameter { field: "num_slots", .. })
        ));
        let no_users = ScenarioParams {
            user_positions: vec![],
            ..base
        };
        assert!(Scenario::new(no_users).is_err());
    }

    #[test]
    fn feasible_instance_has_no_violations() {
        let s = scenario(vec![Point::new(0.0, 0.0), Point::new(400.0, 0.0)], 2);
        let q = Trajectory::stationary(&[Point::new(0.0, 0.0), Point::new(400.0, 0.0)], 60);
        let mut a = Schedule::zeros(2, 2, 60, ScheduleMode::Binary);
        for n in 0..60 {
            a.set(0, 0, n, 1.0);
            a.set(1, 1, n, 1.0);
        }
        let v = validate_feasibility(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn constructed_breaches_are_reported_once() {
        let s = scenario(vec![Point::new(0.0, 0.0)], 2);
        let step = s.max_step();
        let a = Schedule::zeros(1, 2, 60, ScheduleMode::Relaxed);
        let mut q = Trajectory::stationary(&[Point::new(0.0, 0.0), Point::new(500.0, 0.0)], 60);
        // One long hop out at 9 -> 10, then a return in two legal hops.
        for n in 10..58 {
            q.set(0, n, Point::new(1.5 * step, 0.0));
        }
        q.set(0, 58, Point::new(0.75 * step, 0.0));
        let v = validate_feasibility(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::Speed { uav: 0, slot: 9 });
        assert!(close(v[0].magnitude, 0.5 * step, 1e-12));

        // Two-second slots so a 100 m hop is legal.
        let s = Scenario::new(ScenarioParams {
            num_uavs: 2,
            period: 120.0,
            discretization_threshold: 1.0,
            ..ScenarioParams::with_users(vec![Point::new(0.0, 0.0)])
        })
        .unwrap();
        let mut q = Trajectory::stationary(&[Point::new(0.0, 0.0), Point::new(100.0, 0.0)], 60);
        q.set(1, 30, Point::new(0.0, 0.0));
        let v = validate_feasibility(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(
            v[0].kind,
            ViolationKind::Separation {
                uav_a: 0,
                uav_b: 1,
                slot: 30
            }
        );
        assert!(close(v[0].magnitude, 100.0, 1e-12));
    }

    #[test]
    fn schedule_and_power_breaches() {
        let s = scenario(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)], 1);
        let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
        let mut p = PowerProfile::full(&s);
        p.set(0, 4, 0.2);
        let mut a = Schedule::zeros(2, 1, 60, ScheduleMode::Binary);
        a.set(0, 0, 2, 1.0);
        a.set(1, 0, 2, 1.0);
        a.set(0, 0, 3, 0.5);
        let v = validate_feasibility(&s, &a, &q, &p).unwrap();
        let fams: Vec<_> = v.iter().map(|v| v.kind.family()).collect();
        assert_eq!(fams, vec!["power_box", "binary", "uav_load"]);
    }
}
