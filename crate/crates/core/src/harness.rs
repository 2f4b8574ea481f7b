//! Scenario runner: wires the simulated cell through the measurement chain
//! into the gauge, records per-sample truth next to the estimate, and writes
//! plot-ready CSV traces.
//!
//! [`run`] executes a scenario once, through the scenario's ADC if it has
//! one. [`compare`] executes it twice, on exact and on quantized
//! measurements, and reports the pointwise accumulated-capacity divergence
//! between the two as a percentage of rated capacity. Everything is
//! deterministic: the same scenario yields byte-identical CSV.

use crate::cell::{CcCvCharger, CellState, ConstantCurrentDischarger};
use crate::frontend::{measure, AdcModel, SenseCircuit};
use crate::gauge::{GaugeState, Mode, Sample};
use crate::ocv::{OcvOutOfRange, OcvTable};
use crate::scenario::{Phase, Scenario, ScenarioError};
use std::io::Write;

/// One recorded sample: the measured quantities the gauge consumed plus the
/// simulator truth at that instant.
#[derive(Debug, Clone, Copy)]
pub struct RunRow {
    pub t: f64,
    pub mode: Mode,
    pub i_meas: f64,
    pub v_meas: f64,
    pub temp: f64,
    pub soc_true: f64,
    pub soc_est: f64,
    pub soc_reported: f64,
    pub dod: f64,
    /// Estimated minus true SOC, percentage points.
    pub err_pct: f64,
    /// Running integral of measured current, mAh.
    pub cap_mah: f64,
}

/// Error statistics over a run, recomputable from the rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub max_abs_err_pct: f64,
    pub mean_abs_err_pct: f64,
    pub final_err_pct: f64,
    /// Peak instantaneous sense-resistor dissipation seen, watts.
    pub peak_dissipation_w: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
    pub summary: RunSummary,
}

/// Paired ideal-precision/quantized runs of the same scenario, with the
/// accumulated-capacity error series between them.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub ideal: RunReport,
    pub quantized: RunReport,
    /// Per-row `(cap_quant - cap_ideal) / q_rated * 100`.
    pub cap_err_pct: Vec<f64>,
    pub max_abs_cap_err_pct: f64,
    pub mean_abs_cap_err_pct: f64,
    pub final_cap_err_pct: f64,
}

/// Direct SOC-OCV spot check against the default table.
pub fn soc_lookup(ocv: f64, temp: f64) -> Result<f64, OcvOutOfRange> {
    OcvTable::default_25c().soc_from_ocv(ocv, temp)
}

enum Measurement {
    Exact,
    Quantized { adc: AdcModel, sense: SenseCircuit },
}

impl Measurement {
    fn apply(&self, truth: &Sample) -> Sample {
        match self {
            Measurement::Exact => *truth,
            Measurement::Quantized { adc, sense } => measure(truth, sense, adc),
        }
    }
}

struct Recorder<'a> {
    gauge: GaugeState,
    scenario: &'a Scenario,
    measurement: Measurement,
    rows: Vec<RunRow>,
    cap_mah: f64,
    last_t: f64,
}

impl<'a> Recorder<'a> {
    /// Initializes the gauge from the cell's rest voltage at t = 0 and
    /// records the initial observation as the first row.
    fn new(
        scenario: &'a Scenario,
        cell: &CellState,
        measurement: Measurement,
    ) -> Result<Self, ScenarioError> {
        let rest = Sample { t: 0.0, i_bat: 0.0, v_bat: cell.ocv(&scenario.table), temp: cell.temp };
        let seen = measurement.apply(&rest);
        // The scenario starts from rest by construction, which satisfies the
        // configured OCV dwell; a masked (cold) rest voltage falls back to
        // the nearer endpoint with the state flagged coarse.
        let gauge = match GaugeState::initialize(seen.v_bat, seen.temp, &scenario.gauge, &scenario.table)
        {
            Ok(g) => g,
            Err(crate::gauge::GaugeError::OcvOutOfRange(_)) => {
                GaugeState::initialize_fallback(seen.v_bat, seen.temp, &scenario.gauge, &scenario.table)
            }
            Err(other) => return Err(other.into()),
        };
        let mut recorder = Recorder {
            gauge,
            scenario,
            measurement,
            rows: Vec::new(),
            cap_mah: 0.0,
            last_t: 0.0,
        };
        recorder.push_row(&seen, cell);
        Ok(recorder)
    }

    fn push_row(&mut self, seen: &Sample, cell: &CellState) {
        self.rows.push(RunRow {
            t: seen.t,
            mode: self.gauge.mode,
            i_meas: seen.i_bat,
            v_meas: seen.v_bat,
            temp: seen.temp,
            soc_true: cell.true_soc(),
            soc_est: self.gauge.soc,
            soc_reported: self.gauge.reported_soc(seen.temp),
            dod: self.gauge.dod,
            err_pct: self.gauge.soc - cell.true_soc(),
            cap_mah: self.cap_mah,
        });
    }

    /// Feeds one true sample through the measurement path and the gauge.
    fn ingest(&mut self, truth: &Sample, cell: &CellState) -> Result<(), ScenarioError> {
        let seen = self.measurement.apply(truth);
        self.gauge = self.gauge.step(&seen, &self.scenario.gauge)?;
        self.cap_mah += seen.i_bat * (seen.t - self.last_t) / 3600.0;
        self.last_t = seen.t;
        self.push_row(&seen, cell);
        Ok(())
    }

    fn finish(self) -> RunReport {
        let sense = self.scenario.sense;
        let mut max_abs = 0.0f64;
        let mut sum_abs = 0.0f64;
        let mut peak_w = 0.0f64;
        for row in &self.rows {
            max_abs = max_abs.max(row.err_pct.abs());
            sum_abs += row.err_pct.abs();
            peak_w = peak_w.max(sense.dissipation_watts(row.i_meas));
        }
        let summary = RunSummary {
            max_abs_err_pct: max_abs,
            mean_abs_err_pct: sum_abs / self.rows.len() as f64,
            final_err_pct: self.rows.last().map(|r| r.err_pct).unwrap_or(0.0),
            peak_dissipation_w: peak_w,
        };
        RunReport { rows: self.rows, summary }
    }
}

fn run_with(scenario: &Scenario, measurement: Measurement) -> Result<RunReport, ScenarioError> {
    scenario.validate()?;
    let table = &scenario.table;
    let mut cell = CellState::new(
        scenario.cell_capacity,
        scenario.cell_r_internal,
        scenario.initial_temp,
    )
    .with_soc(scenario.initial_soc);
    cell.self_discharge_per_month = scenario.cell_self_discharge_per_month;

    let mut recorder = Recorder::new(scenario, &cell, measurement)?;
    let dt = scenario.gauge.sample_period;
    let mut t = 0.0f64;

    for phase in &scenario.phases {
        match *phase {
            Phase::CcCvCharge { i_cc, v_cv, i_taper } => {
                let mut charger = CcCvCharger::new(i_cc, v_cv, i_taper, dt, t);
                while let Some(truth) = charger.step(&mut cell, table) {
                    recorder.ingest(&truth, &cell)?;
                    t = truth.t;
                }
            }
            Phase::Discharge { i, v_cutoff } => {
                let mut load = ConstantCurrentDischarger::new(i, v_cutoff, dt, t);
                while let Some(truth) = load.step(&mut cell, table) {
                    recorder.ingest(&truth, &cell)?;
                    t = truth.t;
                }
            }
            Phase::Storage { hours } => {
                // One sample per stored hour keeps month-long rests cheap;
                // the gauge integrates the coarser timestamps identically.
                let mut remaining = hours;
                while remaining > 1e-9 {
                    let h = remaining.min(1.0);
                    remaining -= h;
                    cell = cell.advance_storage(h);
                    t += h * 3600.0;
                    let truth =
                        Sample { t, i_bat: 0.0, v_bat: cell.ocv(table), temp: cell.temp };
                    recorder.ingest(&truth, &cell)?;
                }
            }
            Phase::SetTemperature { deg_c } => {
                cell = cell.set_temperature(deg_c);
            }
        }
    }
    Ok(recorder.finish())
}

/// Runs a scenario through its configured measurement chain (exact when the
/// scenario has no ADC).
pub fn run(scenario: &Scenario) -> Result<RunReport, ScenarioError> {
    let measurement = match scenario.adc {
        Some(adc) => Measurement::Quantized { adc, sense: scenario.sense },
        None => Measurement::Exact,
    };
    run_with(scenario, measurement)
}

/// Runs the identical scenario twice, once on exact measurements and once
/// through the ADC, and derives the accumulated-capacity error series
/// between the two legs in percent of rated capacity.
pub fn compare(scenario: &Scenario) -> Result<CompareReport, ScenarioError> {
    let ideal = run_with(scenario, Measurement::Exact)?;
    let quant_measurement = match scenario.adc {
        Some(adc) => Measurement::Quantized { adc, sense: scenario.sense },
        None => Measurement::Exact,
    };
    let quantized = run_with(scenario, quant_measurement)?;
    debug_assert_eq!(ideal.rows.len(), quantized.rows.len());

    let q_rated = scenario.gauge.q_rated;
    let cap_err_pct: Vec<f64> = ideal
        .rows
        .iter()
        .zip(&quantized.rows)
        .map(|(i, q)| (q.cap_mah - i.cap_mah) / q_rated * 100.0)
        .collect();
    let max_abs = cap_err_pct.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mean_abs = cap_err_pct.iter().map(|e| e.abs()).sum::<f64>() / cap_err_pct.len() as f64;
    let final_err = *cap_err_pct.last().unwrap_or(&0.0);
    Ok(CompareReport {
        ideal,
        quantized,
        cap_err_pct,
        max_abs_cap_err_pct: max_abs,
        mean_abs_cap_err_pct: mean_abs,
        final_cap_err_pct: final_err,
    })
}

const RUN_HEADER: &str =
    "time_s,mode,i_meas_mA,v_meas_V,temp_C,soc_true_pct,soc_est_pct,soc_reported_pct,dod_pct,err_pct";

fn write_row(out: &mut impl Write, row: &RunRow) -> std::io::Result<()> {
    write!(
        out,
        "{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        row.t,
        row.mode.as_str(),
        row.i_meas,
        row.v_meas,
        row.temp,
        row.soc_true,
        row.soc_est,
        row.soc_reported,
        row.dod,
        row.err_pct
    )
}

/// Writes a run trace as CSV: header plus one line per sample, numeric
/// fields with six fractional digits.
pub fn write_run_csv(report: &RunReport, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{RUN_HEADER}")?;
    for row in &report.rows {
        write_row(out, row)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Writes a compare trace: the quantized run's columns plus both capacity
/// series and their pointwise error.
pub fn write_compare_csv(report: &CompareReport, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{RUN_HEADER},cap_ideal_mAh,cap_quant_mAh,cap_err_pct")?;
    for ((row, ideal), err) in report
        .quantized
        .rows
        .iter()
        .zip(&report.ideal.rows)
        .zip(&report.cap_err_pct)
    {
        write_row(out, row)?;
        writeln!(out, ",{:.6},{:.6},{:.6}", ideal.cap_mah, row.cap_mah, err)?;
    }
    Ok(())
}
