//! Coulomb-counting fuel gauge.
//!
//! The gauge tracks state of charge by integrating measured battery current,
//! dispatching each sample on the sign of the current: charging accumulates
//! into `q_gained` and raises SOC, discharging accumulates into `q_lost` and
//! raises DOD, and open-circuit periods accrue a modeled self-discharge loss
//! that is charged against the books when the battery wakes up. Hitting the
//! charger's CV taper anchors SOC to 100 %; hitting the discharge cutoff
//! anchors it to 0 % and, when a full anchor is still standing, re-learns the
//! releasable capacity from the charge actually extracted.
//!
//! SOC and DOD are complements: `dod` is always recomputed as `100 - soc`
//! (or vice versa) after every transition, so their sum stays exactly 100.

use crate::ocv::{OcvOutOfRange, OcvTable};
use thiserror::Error;

/// Hours in the nominal month used to spread the monthly self-discharge rate.
const HOURS_PER_MONTH: f64 = 720.0;

/// Gauge parameters. Defaults model the reference pack: two parallel cells,
/// 4400 mAh, sampled once per second, CC-CV charged to 4.2 V with a 10 mA
/// taper, discharged down to the 3.3 V table floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeConfig {
    /// Rated (nominal) capacity in mAh.
    pub q_rated: f64,
    /// Nominal sampling period in seconds; used for the first sample after
    /// initialization when no previous timestamp exists.
    pub sample_period: f64,
    /// Self-discharge rate as a fraction of capacity per 30-day month.
    pub self_discharge_per_month: f64,
    /// Currents at or below this magnitude (mA) classify as open circuit.
    pub idle_current_threshold: f64,
    /// End-of-charge taper current in mA.
    pub taper_current: f64,
    /// CV setpoint in volts; full detection requires the terminal voltage to
    /// have reached it.
    pub full_voltage: f64,
    /// Discharge cutoff in volts; reaching it anchors SOC to empty.
    pub empty_cutoff_voltage: f64,
    /// Open-circuit dwell in seconds before a terminal voltage counts as OCV.
    /// The gauge itself does not time rests; callers enforce this before
    /// trusting a voltage for initialization.
    pub rest_time_for_ocv: f64,
    /// Coulombic efficiency applied to charge accumulation only.
    pub coulombic_efficiency: f64,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        GaugeConfig {
            q_rated: 4400.0,
            sample_period: 1.0,
            self_discharge_per_month: 0.05,
            idle_current_threshold: 1.0,
            taper_current: 10.0,
            full_voltage: 4.2,
            empty_cutoff_voltage: 3.3,
            rest_time_for_ocv: 1800.0,
            coulombic_efficiency: 1.0,
        }
    }
}

impl GaugeConfig {
    // Negated comparisons so NaN fields fail validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), GaugeError> {
        let fail = |reason: &str| Err(GaugeError::InvalidConfig(reason.to_string()));
        if !(self.q_rated > 0.0) {
            return fail("q_rated must be positive");
        }
        if !(self.sample_period > 0.0) {
            return fail("sample_period must be positive");
        }
        if !(self.coulombic_efficiency > 0.0 && self.coulombic_efficiency <= 1.0) {
            return fail("coulombic_efficiency must be in (0, 1]");
        }
        if !(self.self_discharge_per_month >= 0.0) {
            return fail("self_discharge_per_month must be non-negative");
        }
        if !(self.taper_current > self.idle_current_threshold) {
            return fail("taper_current must exceed idle_current_threshold or taper samples would classify as open circuit");
        }
        if !(self.taper_current < self.q_rated) {
            return fail("taper_current must be well below the 1C current");
        }
        Ok(())
    }
}

/// Battery operating mode, decided solely by the sign of the measured
/// current against the idle deadband.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Charge,
    Discharge,
    OpenCircuit,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Charge => "charge",
            Mode::Discharge => "discharge",
            Mode::OpenCircuit => "open_circuit",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "charge" => Ok(Mode::Charge),
            "discharge" => Ok(Mode::Discharge),
            "open_circuit" => Ok(Mode::OpenCircuit),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// One measurement: monotone timestamp in seconds, signed current in mA
/// (positive charges the battery), terminal voltage in volts, ambient
/// temperature in °C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub i_bat: f64,
    pub v_bat: f64,
    pub temp: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaugeError {
    #[error(transparent)]
    OcvOutOfRange(#[from] OcvOutOfRange),
    #[error("sample at t = {t} s does not advance past the previous sample at {prev} s")]
    NonMonotonicTime { prev: f64, t: f64 },
    #[error("invalid gauge config: {0}")]
    InvalidConfig(String),
    #[error("malformed state snapshot: {0}")]
    BadSnapshot(String),
}

/// The estimator's full state. A value type: every operation consumes a
/// reference and returns the successor state, so one state can fan out into
/// several what-if branches and streams replay deterministically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeState {
    pub mode: Mode,
    /// State of charge in percent of releasable capacity.
    pub soc: f64,
    /// Depth of discharge; maintained as exactly `100 - soc`.
    pub dod: f64,
    /// Charge accumulated over the current charging phase, mAh.
    pub q_gained: f64,
    /// Charge lost over the current discharging phase, mAh.
    pub q_lost: f64,
    /// Modeled storage loss accrued over the current open-circuit phase, mAh.
    pub q_oc: f64,
    /// Sub-hour remainder of open-circuit dwell, seconds.
    pub storage_seconds: f64,
    /// Releasable-capacity estimate, mAh. Starts at `q_rated` and is
    /// re-learned by a full-to-empty discharge.
    pub q_rated_est: f64,
    /// Whether an initial SOC has been acquired.
    pub initialized: bool,
    /// Set when initialization fell back to a conventional endpoint because
    /// the rest voltage was outside the allowed table range; cleared by the
    /// next recalibration anchor.
    pub coarse: bool,
    full_anchor: bool,
    last_t: Option<f64>,
}

/// Classifies a sample into an operating mode by current direction, with a
/// deadband so quantized near-zero readings count as open circuit.
pub fn classify_mode(sample: &Sample, config: &GaugeConfig) -> Mode {
    let i = sample.i_bat;
    if i > config.idle_current_threshold {
        Mode::Charge
    } else if i < -config.idle_current_threshold {
        Mode::Discharge
    } else {
        // Includes non-finite readings: integrate nothing rather than garbage.
        Mode::OpenCircuit
    }
}

/// Charge moved in one sample period: `i_bat * dt / 3600`, in mAh, signed.
pub fn delta_q(i_bat: f64, dt: f64) -> f64 {
    i_bat * dt / 3600.0
}

/// End-of-charge detection: the CV setpoint has been reached and the charge
/// current has tapered to at most `taper_current` (but is still flowing).
pub fn detect_full(sample: &Sample, config: &GaugeConfig) -> bool {
    sample.v_bat >= config.full_voltage
        && sample.i_bat > 0.0
        && sample.i_bat <= config.taper_current
}

/// Temperature weighting coefficient for the reported SOC. Bands extend the
/// published five-interval schedule upward unchanged past 60 °C.
pub fn alpha(temp: f64) -> f64 {
    if temp < -10.0 {
        0.5
    } else if temp < 5.0 {
        0.6
    } else if temp < 25.0 {
        0.8
    } else if temp < 45.0 {
        1.0
    } else {
        0.9
    }
}

impl GaugeState {
    fn fresh(soc: f64, config: &GaugeConfig, coarse: bool) -> GaugeState {
        let soc = soc.clamp(0.0, 100.0);
        GaugeState {
            mode: Mode::OpenCircuit,
            soc,
            dod: 100.0 - soc,
            q_gained: 0.0,
            q_lost: 0.0,
            q_oc: 0.0,
            storage_seconds: 0.0,
            q_rated_est: config.q_rated,
            initialized: true,
            coarse,
            full_anchor: false,
            // Initialization anchors the stream's time origin at zero.
            last_t: Some(0.0),
        }
    }

    /// Starts the gauge from a rested terminal voltage.
    ///
    /// The caller is responsible for the rest dwell (`rest_time_for_ocv`).
    /// Fails with [`OcvOutOfRange`] when the voltage falls outside the
    /// temperature-masked table; see
    /// [`initialize_fallback`](Self::initialize_fallback) for that case.
    pub fn initialize(
        ocv: f64,
        temp: f64,
        config: &GaugeConfig,
        table: &OcvTable,
    ) -> Result<GaugeState, GaugeError> {
        config.validate()?;
        let soc = table.soc_from_ocv(ocv, temp)?;
        Ok(GaugeState::fresh(soc, config, false))
    }

    /// Starts the gauge even when the rest voltage is outside the allowed
    /// table range: below it the battery is taken as empty, above it as
    /// full, and the state is flagged coarse until a recalibration anchor
    /// replaces the guess.
    pub fn initialize_fallback(
        ocv: f64,
        temp: f64,
        config: &GaugeConfig,
        table: &OcvTable,
    ) -> GaugeState {
        match table.soc_from_ocv(ocv, temp) {
            Ok(soc) => GaugeState::fresh(soc, config, false),
            Err(_) => {
                let first = crate::ocv::allowed_segments(temp).first_allowed_index - 1;
                let below = match table.segments().get(first) {
                    Some(seg) => ocv < seg.v_lo,
                    None => true,
                };
                GaugeState::fresh(if below { 0.0 } else { 100.0 }, config, true)
            }
        }
    }

    /// True while a full anchor is standing, i.e. the current discharge has
    /// run uninterrupted since the last end-of-charge detection and can
    /// re-learn the releasable capacity at the empty anchor.
    pub fn has_full_anchor(&self) -> bool {
        self.full_anchor
    }

    /// Advances the gauge by one measurement.
    ///
    /// Leaving open circuit first settles the accrued self-discharge, then
    /// the sample integrates into the accumulator for its mode, then the
    /// full/empty recalibration triggers run, and finally SOC/DOD are
    /// clamped back into range as complements.
    pub fn step(&self, sample: &Sample, config: &GaugeConfig) -> Result<GaugeState, GaugeError> {
        debug_assert!(self.initialized, "step on an uninitialized gauge");
        let dt = match self.last_t {
            Some(prev) => {
                // Negated so a NaN timestamp is rejected as well.
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                if !(sample.t > prev) {
                    return Err(GaugeError::NonMonotonicTime { prev, t: sample.t });
                }
                sample.t - prev
            }
            None => config.sample_period,
        };

        let new_mode = classify_mode(sample, config);
        let mut next = *self;
        if self.mode == Mode::OpenCircuit && new_mode != Mode::OpenCircuit {
            next = next.apply_self_discharge_compensation();
        }

        match new_mode {
            Mode::Charge => {
                let dq = config.coulombic_efficiency * delta_q(sample.i_bat, dt);
                next.q_gained += dq;
                next.soc += dq / next.q_rated_est * 100.0;
                next.dod = 100.0 - next.soc;
                // Charging invalidates a standing full-to-empty measurement;
                // re-anchoring below re-arms it.
                next.full_anchor = false;
            }
            Mode::Discharge => {
                let dq = delta_q(sample.i_bat, dt).abs();
                next.q_lost += dq;
                next.dod += dq / next.q_rated_est * 100.0;
                next.soc = 100.0 - next.dod;
            }
            Mode::OpenCircuit => {
                next.storage_seconds += dt;
                let q_per_hour = config.self_discharge_per_month * next.q_rated_est / HOURS_PER_MONTH;
                while next.storage_seconds >= 3600.0 {
                    next.storage_seconds -= 3600.0;
                    next.q_oc += q_per_hour;
                }
            }
        }
        next.mode = new_mode;

        if new_mode == Mode::Charge && detect_full(sample, config) {
            next = next.recalibrate_full();
        }
        if new_mode == Mode::Discharge && sample.v_bat <= config.empty_cutoff_voltage {
            next = next.recalibrate_empty();
        }

        next.clamp_soc();
        next.last_t = Some(sample.t);
        Ok(next)
    }

    /// Settles the self-discharge accrued over an open-circuit phase: the
    /// loss counts as charge lost, comes off any charge gained, and lowers
    /// SOC by its share of capacity. Applied by [`step`](Self::step) on every
    /// open-circuit-to-active transition.
    pub fn apply_self_discharge_compensation(&self) -> GaugeState {
        let mut next = *self;
        if next.q_oc > 0.0 {
            next.q_lost += next.q_oc;
            next.q_gained = (next.q_gained - next.q_oc).max(0.0);
            next.soc -= next.q_oc / next.q_rated_est * 100.0;
            next.clamp_soc();
        }
        next.q_oc = 0.0;
        next.storage_seconds = 0.0;
        next
    }

    /// Anchors the state to full after taper detection and arms capacity
    /// learning for the discharge that follows.
    pub fn recalibrate_full(&self) -> GaugeState {
        let mut next = *self;
        next.soc = 100.0;
        next.dod = 0.0;
        next.q_gained = 0.0;
        next.q_lost = 0.0;
        next.full_anchor = true;
        next.coarse = false;
        next
    }

    /// Anchors the state to empty at the discharge cutoff. With a full
    /// anchor standing, the charge extracted since it becomes the new
    /// releasable-capacity estimate.
    pub fn recalibrate_empty(&self) -> GaugeState {
        let mut next = *self;
        next.soc = 0.0;
        next.dod = 100.0;
        if next.full_anchor && next.q_lost > 0.0 {
            next.q_rated_est = next.q_lost;
        }
        next.q_lost = 0.0;
        next.full_anchor = false;
        next.coarse = false;
        next
    }

    /// Temperature-weighted SOC for display. A reporting view only: the
    /// internal charge balance is temperature-independent.
    pub fn reported_soc(&self, temp: f64) -> f64 {
        debug_assert!(self.initialized, "reported_soc on an uninitialized gauge");
        (alpha(temp) * self.soc).clamp(0.0, 100.0)
    }

    fn clamp_soc(&mut self) {
        self.soc = self.soc.clamp(0.0, 100.0);
        self.dod = 100.0 - self.soc;
    }

    /// Serializes the state as `key=value` lines for persistence and golden
    /// files. Numeric fields carry 17 significant digits so the exact f64
    /// values survive a round trip.
    pub fn snapshot(&self) -> String {
        format!(
            "mode={}\nsoc={:.16e}\ndod={:.16e}\nq_gained={:.16e}\nq_lost={:.16e}\nq_oc={:.16e}\nstorage_seconds={:.16e}\nq_rated_est={:.16e}\ninitialized={}\n",
            self.mode.as_str(),
            self.soc,
            self.dod,
            self.q_gained,
            self.q_lost,
            self.q_oc,
            self.storage_seconds,
            self.q_rated_est,
            self.initialized,
        )
    }

    /// Restores a state written by [`snapshot`](Self::snapshot). Stream
    /// bookkeeping that is not part of the snapshot (previous timestamp, full
    /// anchor, coarse flag) restarts cleared; the first sample after a
    /// restore integrates over the configured sample period.
    pub fn from_snapshot(text: &str) -> Result<GaugeState, GaugeError> {
        let bad = |reason: String| GaugeError::BadSnapshot(reason);
        let mut mode = None;
        let mut fields = std::collections::HashMap::new();
        let mut initialized = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {line:?} is not key=value")))?;
            match key {
                "mode" => mode = Some(value.parse::<Mode>().map_err(bad)?),
                "initialized" => {
                    initialized =
                        Some(value.parse::<bool>().map_err(|e| bad(format!("initialized: {e}")))?)
                }
                _ => {
                    let v: f64 = value
                        .parse()
                        .map_err(|e| bad(format!("{key}: bad number {value:?}: {e}")))?;
                    fields.insert(key.to_string(), v);
                }
            }
        }
        let mut take = |key: &str| {
            fields
                .remove(key)
                .ok_or_else(|| bad(format!("missing field {key}")))
        };
        let state = GaugeState {
            mode: mode.ok_or_else(|| bad("missing field mode".into()))?,
            soc: take("soc")?,
            dod: take("dod")?,
            q_gained: take("q_gained")?,
            q_lost: take("q_lost")?,
            q_oc: take("q_oc")?,
            storage_seconds: take("storage_seconds")?,
            q_rated_est: take("q_rated_est")?,
            initialized: initialized.ok_or_else(|| bad("missing field initialized".into()))?,
            coarse: false,
            full_anchor: false,
            last_t: None,
        };
        if let Some(extra) = fields.keys().next() {
            return Err(bad(format!("unknown field {extra}")));
        }
        Ok(state)
    }
}
