//! Scripted test scenarios.
//!
//! A scenario is an ordered list of phases run against the simulated cell,
//! plus the configuration of everything around it. Scenarios live in plain
//! text, one phase or directive per line, `#` comments allowed:
//!
//! ```text
//! # 1C charge then a rest month
//! init_soc 0
//! set q_rated_mah 4400
//! charge 4400 4.2 10        # i_cc_mA  v_cv_V  i_taper_mA
//! storage 720               # hours
//! discharge 4400 3.3        # i_mA  v_cutoff_V
//! temperature 10            # ambient setpoint, °C
//! table other_cell.txt      # optional SOC-OCV table override
//! ```

use crate::frontend::{AdcModel, SenseCircuit};
use crate::gauge::{GaugeConfig, GaugeError};
use crate::ocv::{OcvTable, TableError};
use std::path::Path;
use thiserror::Error;

/// One step of a scenario script.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// CC-CV charge: constant `i_cc` mA to `v_cv` volts, taper to `i_taper` mA.
    CcCvCharge { i_cc: f64, v_cv: f64, i_taper: f64 },
    /// Constant-current discharge of `i` mA down to `v_cutoff` volts.
    Discharge { i: f64, v_cutoff: f64 },
    /// Rest for `hours` at open circuit, self-discharging.
    Storage { hours: f64 },
    /// Instantaneous ambient-temperature change; emits no samples.
    SetTemperature { deg_c: f64 },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
}

/// A complete experiment description: phases plus every knob of the gauge,
/// cell and measurement chain.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub phases: Vec<Phase>,
    /// True SOC of the cell at the start, percent.
    pub initial_soc: f64,
    /// Ambient temperature at the start, °C.
    pub initial_temp: f64,
    pub gauge: GaugeConfig,
    /// True cell capacity at 25 °C, mAh.
    pub cell_capacity: f64,
    /// Cell series resistance, ohms.
    pub cell_r_internal: f64,
    /// Cell storage-loss rate, fraction per month.
    pub cell_self_discharge_per_month: f64,
    /// Measurement chain; `None` runs on exact measurements.
    pub adc: Option<AdcModel>,
    pub sense: SenseCircuit,
    pub table: OcvTable,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            phases: Vec::new(),
            initial_soc: 0.0,
            initial_temp: 25.0,
            gauge: GaugeConfig::default(),
            cell_capacity: 4400.0,
            cell_r_internal: 0.05,
            cell_self_discharge_per_month: 0.05,
            adc: Some(AdcModel::default()),
            sense: SenseCircuit::default(),
            table: OcvTable::default_25c(),
        }
    }
}

impl Scenario {
    /// The reference experiment: the 4400 mAh pack charged from empty at 1C
    /// CC-CV to the 10 mA taper, sampled once per second through the
    /// 10-bit / 1 mV / 0.1 ohm acquisition chain.
    pub fn default_charge_1c() -> Self {
        Scenario {
            phases: vec![Phase::CcCvCharge { i_cc: 4400.0, v_cv: 4.2, i_taper: 10.0 }],
            ..Scenario::default()
        }
    }

    /// Parses the scenario text format. `table` directives resolve relative
    /// to `base_dir` when given.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let mut scenario = Scenario::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| ScenarioError::Parse { line: n + 1, reason };
            let mut fields = line.split_whitespace();
            let keyword = fields.next().unwrap();
            let args: Vec<&str> = fields.collect();
            let need = |count: usize| {
                if args.len() == count {
                    Ok(())
                } else {
                    Err(err(format!(
                        "`{keyword}` takes {count} argument(s), found {}",
                        args.len()
                    )))
                }
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(format!("bad number {s:?}: {e}")))
            };
            match keyword {
                "charge" => {
                    need(3)?;
                    scenario.phases.push(Phase::CcCvCharge {
                        i_cc: num(args[0])?,
                        v_cv: num(args[1])?,
                        i_taper: num(args[2])?,
                    });
                }
                "discharge" => {
                    need(2)?;
                    scenario.phases.push(Phase::Discharge {
                        i: num(args[0])?,
                        v_cutoff: num(args[1])?,
                    });
                }
                "storage" => {
                    need(1)?;
                    scenario.phases.push(Phase::Storage { hours: num(args[0])? });
                }
                "temperature" => {
                    need(1)?;
                    scenario.phases.push(Phase::SetTemperature { deg_c: num(args[0])? });
                }
                "init_soc" => {
                    need(1)?;
                    scenario.initial_soc = num(args[0])?;
                }
                "init_temp" => {
                    need(1)?;
                    scenario.initial_temp = num(args[0])?;
                }
                "table" => {
                    need(1)?;
                    let path = match base_dir {
                        Some(dir) => dir.join(args[0]),
                        None => Path::new(args[0]).to_path_buf(),
                    };
                    scenario.table = OcvTable::load_str(&std::fs::read_to_string(path)?)?;
                }
                "set" => {
                    need(2)?;
                    scenario.apply_override(args[0], num(args[1])?).map_err(err)?;
                }
                other => return Err(err(format!("unknown keyword {other:?}"))),
            }
        }
        Ok(scenario)
    }

    /// Loads and parses a scenario file; `table` directives resolve relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    // Negated comparisons so NaN values fail the checks too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn apply_override(&mut self, key: &str, value: f64) -> Result<(), String> {
        match key {
            "q_rated_mah" => self.gauge.q_rated = value,
            "sample_period_s" => self.gauge.sample_period = value,
            "self_discharge_per_month" => self.gauge.self_discharge_per_month = value,
            "idle_threshold_ma" => self.gauge.idle_current_threshold = value,
            "taper_ma" => self.gauge.taper_current = value,
            "full_voltage_v" => self.gauge.full_voltage = value,
            "empty_cutoff_v" => self.gauge.empty_cutoff_voltage = value,
            "rest_time_s" => self.gauge.rest_time_for_ocv = value,
            "coulombic_efficiency" => self.gauge.coulombic_efficiency = value,
            "cell_capacity_mah" => self.cell_capacity = value,
            "cell_r_ohms" => self.cell_r_internal = value,
            "cell_self_discharge_per_month" => self.cell_self_discharge_per_month = value,
            "sense_r_ohms" => {
                if !(value > 0.0) {
                    return Err("sense_r_ohms must be positive".into());
                }
                self.sense = SenseCircuit::new(value);
            }
            "adc_bits" => {
                let bits = value as u32;
                if bits < 1 || (bits as f64) != value {
                    return Err(format!("adc_bits must be a positive integer, got {value}"));
                }
                let lsb = self.adc.map(|a| a.lsb).unwrap_or(AdcModel::default().lsb);
                self.adc = Some(AdcModel::new(bits, lsb));
            }
            // An LSB of zero switches the run to exact measurements.
            "adc_lsb_v" => {
                if value == 0.0 {
                    self.adc = None;
                } else if value > 0.0 {
                    let bits = self.adc.map(|a| a.bits).unwrap_or(AdcModel::default().bits);
                    self.adc = Some(AdcModel::new(bits, value));
                } else {
                    return Err("adc_lsb_v cannot be negative".into());
                }
            }
            other => return Err(format!("unknown setting {other:?}")),
        }
        Ok(())
    }

    /// Checks phase parameters and the embedded gauge config.
    // Negated comparisons so NaN parameters fail validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |reason: String| Err(ScenarioError::Invalid(reason));
        if self.phases.is_empty() {
            return invalid("scenario has no phases".into());
        }
        for (k, phase) in self.phases.iter().enumerate() {
            let at = k + 1;
            match *phase {
                Phase::CcCvCharge { i_cc, v_cv, i_taper } => {
                    if !(i_cc > 0.0 && i_taper > 0.0 && i_cc >= i_taper) {
                        return invalid(format!(
                            "phase {at}: charge needs i_cc >= i_taper > 0 (got {i_cc}, {i_taper})"
                        ));
                    }
                    if !(v_cv > 0.0) {
                        return invalid(format!("phase {at}: CV setpoint must be positive"));
                    }
                }
                Phase::Discharge { i, v_cutoff } => {
                    if !(i > 0.0) {
                        return invalid(format!("phase {at}: discharge current must be positive"));
                    }
                    if !v_cutoff.is_finite() {
                        return invalid(format!("phase {at}: cutoff must be finite"));
                    }
                }
                Phase::Storage { hours } => {
                    if !(hours >= 0.0) {
                        return invalid(format!("phase {at}: storage hours must be >= 0"));
                    }
                }
                Phase::SetTemperature { deg_c } => {
                    if !deg_c.is_finite() {
                        return invalid(format!("phase {at}: temperature must be finite"));
                    }
                }
            }
        }
        if !(0.0..=100.0).contains(&self.initial_soc) {
            return invalid(format!("initial SOC {} outside [0, 100]", self.initial_soc));
        }
        if !(self.cell_capacity > 0.0) {
            return invalid("cell capacity must be positive".into());
        }
        if !(self.cell_r_internal >= 0.0) {
            return invalid("cell resistance cannot be negative".into());
        }
        self.gauge.validate()?;
        Ok(())
    }
}
