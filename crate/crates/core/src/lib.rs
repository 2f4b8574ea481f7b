//! # fuelgauge
//!
//! A Coulomb-counting battery fuel gauge for Li-ion cells, together with the
//! machinery to validate it: a ground-truth simulated cell, a model of a
//! 10-bit acquisition chain, and a scenario harness that scores the
//! estimator against the simulator.
//!
//! The estimator improves plain Coulomb counting in four ways:
//!
//! - **Initial SOC from rest voltage.** An eight-segment piecewise-linear
//!   SOC-OCV map ([`OcvTable`]) turns a rested terminal voltage into a
//!   starting SOC, with the low-voltage segments masked out below 15 °C and
//!   5 °C where they cannot be trusted.
//! - **Mode-dispatched bookkeeping.** Samples classify into charge,
//!   discharge or open circuit by current direction; each mode maintains its
//!   own accumulator and SOC/DOD stay exact complements.
//! - **Self-discharge compensation.** Open-circuit hours accrue a modeled
//!   5 %/month storage loss that is settled against the books the moment the
//!   battery wakes up.
//! - **Full/empty recalibration.** Hitting the charger's CV taper anchors
//!   SOC to 100 %; hitting the discharge cutoff anchors it to 0 % and
//!   re-learns the releasable capacity from the charge actually extracted,
//!   so the estimate tracks the cell rather than its nameplate.
//!
//! Reported SOC is additionally weighted by a banded temperature
//! coefficient ([`alpha`]), as a display-side view.
//!
//! ## Quick start
//!
//! ```rust
//! use fuelgauge::{GaugeConfig, GaugeState, OcvTable, Sample};
//!
//! let table = OcvTable::default_25c();
//! let config = GaugeConfig::default();
//!
//! // A rested pack showing 3.60 V at 25 °C is at 13.4 %.
//! let mut gauge = GaugeState::initialize(3.60, 25.0, &config, &table).unwrap();
//!
//! // Charge at 4.4 A for one second.
//! let sample = Sample { t: 1.0, i_bat: 4400.0, v_bat: 3.82, temp: 25.0 };
//! gauge = gauge.step(&sample, &config).unwrap();
//! assert!(gauge.soc > 13.4);
//! assert_eq!(gauge.soc + gauge.dod, 100.0);
//! ```
//!
//! ## Validation harness
//!
//! [`run`] executes a scripted [`Scenario`] end to end: the simulated cell
//! ([`CellState`]) produces true samples, the measurement frontend
//! ([`measure`]) quantizes them the way the 10-bit hardware would, and the
//! gauge consumes the result while the runner records truth next to
//! estimate. [`compare`] runs the same scenario on exact and quantized
//! measurements and reports the accumulated-capacity divergence between the
//! two, which isolates what the ADC alone costs.

pub mod cell;
pub mod frontend;
pub mod gauge;
pub mod harness;
pub mod ocv;
pub mod scenario;

pub use cell::{
    cc_cv_charge, constant_current_discharge, CapacityFactorCurve, CcCvCharger, CellState,
    ConstantCurrentDischarger,
};
pub use frontend::{measure, sense_current, AdcModel, SenseCircuit};
pub use gauge::{
    alpha, classify_mode, delta_q, detect_full, GaugeConfig, GaugeError, GaugeState, Mode, Sample,
};
pub use harness::{
    compare, run, soc_lookup, write_compare_csv, write_run_csv, CompareReport, RunReport, RunRow,
    RunSummary,
};
pub use ocv::{allowed_segments, OcvOutOfRange, OcvSegment, OcvTable, SegmentMask, TableDiagnostic, TableError};
pub use scenario::{Phase, Scenario, ScenarioError};
