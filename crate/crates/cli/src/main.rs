//! Command-line harness around the fuelgauge library.
//!
//! Verbs:
//! - `run`: execute a scenario file, write the CSV trace
//! - `compare`: execute it on exact and quantized measurements, write the
//!   paired CSV with the capacity-error series
//! - `soc-lookup`: spot-check the SOC-OCV map
//! - `validate-table`: diagnose an SOC-OCV table file
//!
//! Exit code 0 on success, 1 on scenario or validation failure.

use clap::{Parser, Subcommand};
use fuelgauge::{AdcModel, OcvTable, Scenario};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fuelgauge", about = "Coulomb-counting fuel gauge simulation harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace as CSV.
    Run {
        /// Scenario file (plain text, one phase or directive per line).
        #[arg(long)]
        scenario: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Stream seed, echoed into the summary. Runs are deterministic;
        /// the seed labels the run.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a scenario twice, on exact and on quantized measurements, and
    /// write the paired trace with the accumulated-capacity error series.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's ADC resolution in bits.
        #[arg(long)]
        adc_bits: Option<u32>,
        /// Override the scenario's LSB in millivolts; 0 disables
        /// quantization entirely.
        #[arg(long)]
        lsb_mv: Option<f64>,
    },
    /// Print the SOC for a rested terminal voltage at a temperature.
    SocLookup {
        /// Open-circuit voltage in volts.
        #[arg(long)]
        ocv: f64,
        /// Ambient temperature in °C.
        #[arg(long)]
        temp: f64,
    },
    /// Load an SOC-OCV table file and print its diagnostics.
    ValidateTable {
        #[arg(long)]
        table: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run { scenario, out, seed } => {
            let scenario = Scenario::load(&scenario).map_err(|e| e.to_string())?;
            let report = fuelgauge::run(&scenario).map_err(|e| e.to_string())?;
            let mut file = BufWriter::new(File::create(&out).map_err(|e| e.to_string())?);
            fuelgauge::write_run_csv(&report, &mut file).map_err(|e| e.to_string())?;
            file.flush().map_err(|e| e.to_string())?;
            let s = report.summary;
            println!(
                "run: seed {seed}, {} samples -> {}",
                report.rows.len(),
                out.display()
            );
            println!(
                "soc error vs oracle: max |err| {:.6} %, mean |err| {:.6} %, final {:.6} %",
                s.max_abs_err_pct, s.mean_abs_err_pct, s.final_err_pct
            );
            println!("peak sense dissipation: {:.3} W", s.peak_dissipation_w);
            Ok(())
        }
        Command::Compare { scenario, out, adc_bits, lsb_mv } => {
            let mut scenario = Scenario::load(&scenario).map_err(|e| e.to_string())?;
            apply_adc_overrides(&mut scenario, adc_bits, lsb_mv)?;
            let cmp = fuelgauge::compare(&scenario).map_err(|e| e.to_string())?;
            let mut file = BufWriter::new(File::create(&out).map_err(|e| e.to_string())?);
            fuelgauge::write_compare_csv(&cmp, &mut file).map_err(|e| e.to_string())?;
            file.flush().map_err(|e| e.to_string())?;
            match scenario.adc {
                Some(adc) => println!(
                    "compare: {} samples, {}-bit / {} mV ADC -> {}",
                    cmp.quantized.rows.len(),
                    adc.bits,
                    adc.lsb * 1000.0,
                    out.display()
                ),
                None => println!(
                    "compare: {} samples, quantization disabled -> {}",
                    cmp.quantized.rows.len(),
                    out.display()
                ),
            }
            println!(
                "accumulated-capacity error: max |err| {:.6} %, mean |err| {:.6} %, final {:.6} %",
                cmp.max_abs_cap_err_pct, cmp.mean_abs_cap_err_pct, cmp.final_cap_err_pct
            );
            Ok(())
        }
        Command::SocLookup { ocv, temp } => match fuelgauge::soc_lookup(ocv, temp) {
            Ok(soc) => {
                println!("{soc:.2}");
                Ok(())
            }
            Err(e) => Err(e.to_string()),
        },
        Command::ValidateTable { table } => {
            let text = std::fs::read_to_string(&table).map_err(|e| e.to_string())?;
            let parsed = OcvTable::parse_str(&text).map_err(|e| e.to_string())?;
            let diagnostics = parsed.validate();
            if diagnostics.is_empty() {
                println!("{}: {} segments, no diagnostics", table.display(), parsed.segments().len());
                return Ok(());
            }
            let mut fatal = 0;
            for d in &diagnostics {
                println!("{}: {d}", if d.is_fatal() { "error" } else { "note" });
                fatal += d.is_fatal() as u32;
            }
            if fatal > 0 {
                Err(format!("{fatal} fatal diagnostic(s)"))
            } else {
                println!(
                    "{}: {} segments, {} breakpoint discontinuities (expected for the published coefficients)",
                    table.display(),
                    parsed.segments().len(),
                    diagnostics.len()
                );
                Ok(())
            }
        }
    }
}

fn apply_adc_overrides(
    scenario: &mut Scenario,
    adc_bits: Option<u32>,
    lsb_mv: Option<f64>,
) -> Result<(), String> {
    if let Some(mv) = lsb_mv {
        if mv < 0.0 {
            return Err("--lsb-mv cannot be negative".into());
        }
        if mv == 0.0 {
            scenario.adc = None;
        } else {
            let bits = scenario.adc.map(|a| a.bits).unwrap_or(AdcModel::default().bits);
            scenario.adc = Some(AdcModel::new(bits, mv / 1000.0));
        }
    }
    if let Some(bits) = adc_bits {
        if bits == 0 {
            return Err("--adc-bits must be at least 1".into());
        }
        let lsb = scenario.adc.map(|a| a.lsb).unwrap_or(AdcModel::default().lsb);
        scenario.adc = Some(AdcModel::new(bits, lsb));
    }
    Ok(())
}
