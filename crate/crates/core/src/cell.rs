//! Simulated Li-ion cell used as ground truth.
//!
//! The cell is a Rint model: an OCV source behind a series resistance, with
//! exact charge integration, a temperature-dependent released-capacity
//! factor and the same 5 %/month storage loss the gauge models (adjustable
//! for mismatch experiments). It exists to be the oracle the estimator is
//! judged against, so its bookkeeping is exact where the gauge's is not.

use crate::gauge::Sample;
use crate::ocv::OcvTable;

/// Time constant of the simulated charger's CV-phase current decay, seconds.
/// Any strictly decreasing profile that reaches the taper current would do;
/// nothing downstream may depend on this value.
const CV_DECAY_TIME_CONSTANT: f64 = 600.0;

/// Released-capacity fraction versus temperature, linearly interpolated
/// between anchor points and clamped outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityFactorCurve {
    anchors: Vec<(f64, f64)>,
}

impl Default for CapacityFactorCurve {
    fn default() -> Self {
        // Vendor-curve anchors: full capacity at 25 °C, 80 % near 5 °C,
        // 60 % at -10 °C, slightly derated when hot.
        CapacityFactorCurve {
            anchors: vec![(-10.0, 0.6), (5.0, 0.8), (25.0, 1.0), (45.0, 0.95), (60.0, 0.9)],
        }
    }
}

impl CapacityFactorCurve {
    /// Builds a curve from `(temperature, fraction)` anchors sorted by
    /// temperature. Panics if empty or unsorted; fractions must be in (0, 1].
    pub fn new(anchors: Vec<(f64, f64)>) -> Self {
        assert!(!anchors.is_empty(), "capacity curve needs at least one anchor");
        for pair in anchors.windows(2) {
            assert!(pair[0].0 < pair[1].0, "capacity curve anchors must be sorted");
        }
        assert!(
            anchors.iter().all(|&(_, f)| f > 0.0 && f <= 1.0),
            "capacity fractions must be in (0, 1]"
        );
        CapacityFactorCurve { anchors }
    }

    /// Released-capacity fraction at `temp`.
    pub fn factor(&self, temp: f64) -> f64 {
        let first = self.anchors[0];
        let last = self.anchors[self.anchors.len() - 1];
        if temp <= first.0 {
            return first.1;
        }
        if temp >= last.0 {
            return last.1;
        }
        for pair in self.anchors.windows(2) {
            let ((t0, f0), (t1, f1)) = (pair[0], pair[1]);
            if temp <= t1 {
                return f0 + (f1 - f0) * (temp - t0) / (t1 - t0);
            }
        }
        last.1
    }
}

/// Ground-truth cell state. All charge quantities in mAh, resistance in
/// ohms, temperature in °C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    /// True stored charge.
    pub q_true: f64,
    /// True capacity at 25 °C.
    pub q_capacity: f64,
    /// Series (Rint) resistance.
    pub r_internal: f64,
    /// Cell temperature; an exogenous input, the model does not self-heat.
    pub temp: f64,
    /// Storage-loss rate as a fraction of capacity per month. Matches the
    /// gauge's default so compensation accuracy can be tested in isolation;
    /// change it to study model mismatch.
    pub self_discharge_per_month: f64,
}

impl CellState {
    pub fn new(q_capacity: f64, r_internal: f64, temp: f64) -> Self {
        assert!(q_capacity > 0.0, "cell capacity must be positive");
        assert!(r_internal >= 0.0, "internal resistance cannot be negative");
        CellState {
            q_true: 0.0,
            q_capacity,
            r_internal,
            temp,
            self_discharge_per_month: 0.05,
        }
    }

    /// Default pack: two parallel cells, 4400 mAh total, 50 mΩ, 25 °C.
    pub fn default_pack() -> Self {
        CellState::new(4400.0, 0.05, 25.0)
    }

    /// Sets the stored charge to `soc` percent of the releasable capacity at
    /// the current temperature.
    pub fn with_soc(mut self, soc: f64) -> Self {
        self.q_true = self.capacity_bound() * soc.clamp(0.0, 100.0) / 100.0;
        self
    }

    /// Charge the cell can actually hold at its current temperature.
    pub fn capacity_bound(&self) -> f64 {
        self.q_capacity * CapacityFactorCurve::default().factor(self.temp)
    }

    /// True state of charge in percent of the temperature-adjusted capacity.
    pub fn true_soc(&self) -> f64 {
        100.0 * self.q_true / self.capacity_bound()
    }

    /// Rest (open-circuit) voltage at the current true SOC.
    pub fn ocv(&self, table: &OcvTable) -> f64 {
        table.ocv_from_soc(self.true_soc())
    }

    /// Integrates `i` mA over `dt` seconds and reports the terminal voltage
    /// under that current: OCV plus the signed IR step, so charging raises
    /// the terminal and discharging sags it. Charge clamps at the capacity
    /// bound and at zero.
    pub fn apply_current(&self, i: f64, dt: f64, table: &OcvTable) -> (CellState, f64) {
        debug_assert!(dt > 0.0);
        let mut next = *self;
        next.q_true = (next.q_true + i * dt / 3600.0).clamp(0.0, next.capacity_bound());
        let v_terminal = next.ocv(table) + i * next.r_internal / 1000.0;
        (next, v_terminal)
    }

    /// Storage loss over `hours` at rest: capacity times the monthly rate,
    /// prorated per hour and floored at empty.
    pub fn advance_storage(&self, hours: f64) -> CellState {
        debug_assert!(hours >= 0.0);
        let mut next = *self;
        let loss = self.self_discharge_per_month / 720.0 * self.q_capacity * hours;
        next.q_true = (next.q_true - loss).max(0.0);
        next
    }

    /// Moves the cell to a new ambient temperature. The stored charge is
    /// clamped into the new capacity bound, since cooling shrinks what the
    /// cell can release.
    pub fn set_temperature(&self, temp: f64) -> CellState {
        let mut next = *self;
        next.temp = temp;
        next.q_true = next.q_true.min(next.capacity_bound());
        next
    }
}

/// Stepwise CC-CV charger against a [`CellState`].
///
/// Constant current until the terminal voltage reaches the CV setpoint (or
/// the cell saturates), then an exponentially decaying current holding the
/// terminal at the setpoint, ending once the current tapers to `i_taper`.
#[derive(Debug, Clone)]
pub struct CcCvCharger {
    i_cc: f64,
    v_cv: f64,
    i_taper: f64,
    dt: f64,
    next_t: f64,
    cv_started_at: Option<f64>,
    done: bool,
}

impl CcCvCharger {
    /// `t0` is the timestamp of the sample before the first emitted one.
    pub fn new(i_cc: f64, v_cv: f64, i_taper: f64, dt: f64, t0: f64) -> Self {
        assert!(i_cc > 0.0 && i_taper > 0.0 && i_cc >= i_taper, "need i_cc >= i_taper > 0");
        assert!(dt > 0.0);
        CcCvCharger { i_cc, v_cv, i_taper, dt, next_t: t0, cv_started_at: None, done: false }
    }

    /// Advances the cell by one sample period and emits the sample the
    /// acquisition chain would see, or `None` once charging has terminated.
    pub fn step(&mut self, cell: &mut CellState, table: &OcvTable) -> Option<Sample> {
        if self.done {
            return None;
        }
        let t = self.next_t + self.dt;
        self.next_t = t;
        let i = match self.cv_started_at {
            None => self.i_cc,
            Some(tc) => self.i_cc * (-(t - tc) / CV_DECAY_TIME_CONSTANT).exp(),
        };
        let (next, v_raw) = cell.apply_current(i, self.dt, table);
        *cell = next;
        let in_cv = self.cv_started_at.is_some();
        // The charger never lets the terminal exceed the setpoint; during CV
        // it holds the terminal there by construction.
        let v_emit = if in_cv { self.v_cv } else { v_raw.min(self.v_cv) };
        if !in_cv && (v_raw >= self.v_cv || cell.q_true >= cell.capacity_bound()) {
            self.cv_started_at = Some(t);
        }
        if in_cv && i <= self.i_taper {
            self.done = true;
        }
        Some(Sample { t, i_bat: i, v_bat: v_emit, temp: cell.temp })
    }
}

/// Stepwise constant-current discharger: fixed current until the terminal
/// voltage hits the cutoff or the cell runs out of charge.
#[derive(Debug, Clone)]
pub struct ConstantCurrentDischarger {
    i: f64,
    v_cutoff: f64,
    dt: f64,
    next_t: f64,
    done: bool,
}

impl ConstantCurrentDischarger {
    pub fn new(i: f64, v_cutoff: f64, dt: f64, t0: f64) -> Self {
        assert!(i > 0.0, "discharge current must be positive");
        assert!(dt > 0.0);
        ConstantCurrentDischarger { i, v_cutoff, dt, next_t: t0, done: false }
    }

    pub fn step(&mut self, cell: &mut CellState, table: &OcvTable) -> Option<Sample> {
        if self.done {
            return None;
        }
        let t = self.next_t + self.dt;
        self.next_t = t;
        let (next, v) = cell.apply_current(-self.i, self.dt, table);
        *cell = next;
        if v <= self.v_cutoff || cell.q_true <= 0.0 {
            self.done = true;
        }
        Some(Sample { t, i_bat: -self.i, v_bat: v, temp: cell.temp })
    }
}

/// Runs a full CC-CV charge and collects the emitted samples.
pub fn cc_cv_charge(
    cell: &mut CellState,
    table: &OcvTable,
    i_cc: f64,
    v_cv: f64,
    i_taper: f64,
    dt: f64,
    t0: f64,
) -> Vec<Sample> {
    let mut charger = CcCvCharger::new(i_cc, v_cv, i_taper, dt, t0);
    let mut out = Vec::new();
    while let Some(sample) = charger.step(cell, table) {
        out.push(sample);
    }
    out
}

/// Runs a constant-current discharge to the cutoff and collects the samples.
pub fn constant_current_discharge(
    cell: &mut CellState,
    table: &OcvTable,
    i: f64,
    v_cutoff: f64,
    dt: f64,
    t0: f64,
) -> Vec<Sample> {
    let mut load = ConstantCurrentDischarger::new(i, v_cutoff, dt, t0);
    let mut out = Vec::new();
    while let Some(sample) = load.step(cell, table) {
        out.push(sample);
    }
    out
}
