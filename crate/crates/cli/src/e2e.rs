//! Simulated session followed by the full post-processing chain.

use std::fs;
use std::path::Path;

use serde::Serialize;

use wdmqkd_core::channel::Direction;
use wdmqkd_core::keyrate::KeyRateReport;
use wdmqkd_core::postproc::{crc::block_crc, run_postprocessing, CascadeConfig, PostprocConfig};
use wdmqkd_core::simkd::{empirical_keyrate, simulate, RunConfig, SimChannel};

use crate::calibration::CalibrationFile;
use crate::config::{ConfigDocument, KeyRateSource};
use crate::failure::{io_err, protocol_err, CliResult};

pub const ALICE_KEY: &str = "alice_key.bin";
pub const BOB_KEY: &str = "bob_key.bin";
pub const TRANSCRIPT: &str = "transcript.csv";
pub const SUMMARY: &str = "summary.toml";

#[derive(Debug, Serialize)]
pub struct Summary {
    pub quantum_nm: f64,
    pub direction: Direction,
    pub length_km: f64,
    pub power_dbm: f64,
    pub n_pulses: u64,
    pub seed: u64,
    pub key_rate_source: &'static str,
    pub sifted_bits: usize,
    pub qber: f64,
    pub secure: bool,
    pub key_bps: f64,
    pub leakage_bits: u64,
    pub verified: bool,
    pub m: usize,
    pub efficiency: f64,
    /// Session length at the system clock.
    pub seconds: f64,
    pub key_crc: u32,
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_err(&path.display().to_string(), e))
}

fn write_summary(out: &Path, s: &Summary) -> CliResult<()> {
    let text = toml::to_string(s).map_err(|e| io_err("summary", e))?;
    write(&out.join(SUMMARY), text.as_bytes())
}

pub fn run(
    doc: &ConfigDocument,
    cal: &CalibrationFile,
    seed_override: Option<u64>,
    out: &Path,
) -> CliResult<Summary> {
    let e2e = doc.e2e()?;
    let seed = seed_override.unwrap_or(e2e.seed);
    let mut sc = doc.scenario(cal, doc.scenario.quantum_nm)?;
    if let Some(q) = e2e.forced_qber {
        sc.system.e_opt = q;
    }
    // Old keys must not survive a failed rerun.
    for f in [ALICE_KEY, BOB_KEY, TRANSCRIPT, SUMMARY] {
        let p = out.join(f);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| io_err(&p.display().to_string(), e))?;
        }
    }

    let channel = SimChannel::from_scenario(&sc, e2e.power_dbm)?;
    let eta = channel.eta;
    let sim = simulate(&RunConfig {
        n_pulses: e2e.n_pulses,
        seed,
        channel,
    })?;
    let pair = &sim.pair;
    let report: KeyRateReport = match e2e.key_rate_source {
        KeyRateSource::Analytic => sc.key_report(e2e.power_dbm)?.2,
        KeyRateSource::Empirical => empirical_keyrate(pair, eta, &sc.protocol, &sc.system)?,
    };
    let mut summary = Summary {
        quantum_nm: sc.quantum.wavelength_nm,
        direction: sc.direction,
        length_km: sc.fiber.length_km,
        power_dbm: e2e.power_dbm,
        n_pulses: e2e.n_pulses,
        seed,
        key_rate_source: match e2e.key_rate_source {
            KeyRateSource::Analytic => "analytic",
            KeyRateSource::Empirical => "empirical",
        },
        sifted_bits: pair.alice_bits.len(),
        qber: sim.observables.e_mu,
        secure: report.secure,
        key_bps: report.r_bps,
        leakage_bits: 0,
        verified: false,
        m: 0,
        efficiency: 0.0,
        seconds: e2e.n_pulses as f64 / sc.system.clock_hz,
        key_crc: 0,
    };
    if !report.secure {
        write_summary(out, &summary)?;
        return Err(protocol_err(format!(
            "secure=false: no positive key rate at QBER {:.4}, keys withheld",
            summary.qber
        )));
    }

    let cfg = PostprocConfig {
        cascade: CascadeConfig {
            passes: e2e.cascade_passes,
            block_factor: e2e.cascade_block_factor,
            shuffle_seed: seed.wrapping_add(2),
        },
        security_margin: e2e.security_margin,
        tag_bits: e2e.tag_bits,
        seed: seed.wrapping_add(1),
    };
    let pp = run_postprocessing(
        &pair.alice_bits,
        &pair.bob_bits,
        sim.observables.e_mu,
        &report,
        &cfg,
    )?;
    summary.leakage_bits = pp.alice.leakage_bits;
    summary.verified = pp.alice.verified && pp.bob.verified;
    summary.m = pp.alice.m;
    summary.efficiency = pp.efficiency;
    if !summary.verified {
        write_summary(out, &summary)?;
        return Err(protocol_err(
            "verification failed after reconciliation, keys withheld",
        ));
    }
    if summary.m == 0 {
        write_summary(out, &summary)?;
        return Err(protocol_err(format!(
            "final key length is zero for {} sifted bits, keys withheld",
            summary.sifted_bits
        )));
    }
    summary.key_crc = block_crc(&pp.alice.key);

    write(&out.join(ALICE_KEY), &pp.alice.key.to_bytes())?;
    write(&out.join(BOB_KEY), &pp.bob.key.to_bytes())?;
    let path = out.join(TRANSCRIPT);
    let ctx = path.display().to_string();
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&ctx, e))?;
    w.write_record(["pass", "block", "start", "end", "parity"])
        .map_err(|e| io_err(&ctx, e))?;
    for r in &pp.transcript {
        w.write_record([
            r.pass.to_string(),
            r.block.to_string(),
            r.start.to_string(),
            r.end.to_string(),
            u8::from(r.parity).to_string(),
        ])
        .map_err(|e| io_err(&ctx, e))?;
    }
    w.flush().map_err(|e| io_err(&ctx, e))?;
    write_summary(out, &summary)?;
    Ok(summary)
}
