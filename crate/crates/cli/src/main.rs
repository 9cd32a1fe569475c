//! `wdmqkd`: calibration, sweeps and end-to-end runs for QKD sharing a fibre
//! with coherent classical channels.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod calibration;
mod config;
mod e2e;
mod failure;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use calibration::CalibrationFile;
use config::ConfigDocument;
use failure::{config_err, io_err, CliResult};
use sweep::SweepKind;

const CALIBRATION_FILE: &str = "calibration.toml";

#[derive(Parser)]
#[command(
    name = "wdmqkd",
    version,
    about = "QKD and classical WDM coexistence planner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (TOML).
    #[arg(long, global = true, default_value = "wdmqkd.toml")]
    config: PathBuf,
    /// Calibration file; defaults to calibration.toml in the output directory.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "WDMQKD_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the e2e seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit Raman coefficients and the classical link model.
    Calibrate,
    /// Write one sweep table as CSV.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
    },
    /// Simulate a session and distil a final key.
    E2e,
}

fn read(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {what} {}: {e}", path.display())))
}

fn load_calibration(cli: &Cli) -> CliResult<CalibrationFile> {
    let path = cli
        .calibration
        .clone()
        .unwrap_or_else(|| cli.out.join(CALIBRATION_FILE));
    CalibrationFile::parse(&read(&path, "calibration file")?)
}

fn run(cli: &Cli) -> CliResult<()> {
    let doc = ConfigDocument::parse(&read(&cli.config, "config")?)
        .map_err(|e| config_err(format!("{}: {e}", cli.config.display())))?;
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out.display().to_string(), e))?;
    let started = Instant::now();
    match &cli.command {
        Command::Calibrate => {
            let (cal, fits) = calibration::calibrate(&doc)?;
            let path = cli
                .calibration
                .clone()
                .unwrap_or_else(|| cli.out.join(CALIBRATION_FILE));
            fs::write(&path, cal.to_toml()).map_err(|e| io_err(&path.display().to_string(), e))?;
            for f in &fits {
                println!(
                    "{} -> {} nm: rho = {:.6e} /(km GHz), measured {} cps, reproduced {:.1} cps",
                    f.classical_nm, f.quantum_nm, f.rho, f.measured_cps, f.predicted_cps
                );
            }
            let link = &cal.classical;
            println!(
                "classical: {} channels, ase_power_w = {:.6e}, nli_coeff = {:.6e}",
                link.n_channels, link.ase_power_w, link.nli_coeff
            );
            println!("wrote {}", path.display());
        }
        Command::Sweep { kind } => {
            let cal = load_calibration(cli)?;
            let table = sweep::run(*kind, &doc, &cal)?;
            let path = cli.out.join(kind.file_name());
            table.write(&path)?;
            println!("wrote {} ({} rows)", path.display(), table.rows.len());
        }
        Command::E2e => {
            let cal = load_calibration(cli)?;
            let s = e2e::run(&doc, &cal, cli.seed, &cli.out)?;
            println!(
                "QBER {:.4}, leakage {} bits, final key {} bits, efficiency {:.3}",
                s.qber, s.leakage_bits, s.m, s.efficiency
            );
            println!("wrote keys and summary to {}", cli.out.display());
        }
    }
    eprintln!("done in {:.2} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
