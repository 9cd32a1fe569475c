//! Versioned calibration file: Raman coefficients and the fitted classical link.

use serde::{Deserialize, Serialize};

use wdmqkd_core::channel::{
    calibrate_raman, power_to_count_rate, raman_power, RamanCalibration, RamanMeasurement,
};
use wdmqkd_core::classical::{calibrate_classical, ClassicalLinkModel};
use wdmqkd_core::units::db_to_ratio;

use crate::config::ConfigDocument;
use crate::failure::{config_err, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub format_version: u32,
    pub raman: RamanCalibration,
    pub classical: ClassicalLinkModel,
}

impl CalibrationFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cal: CalibrationFile =
            toml::from_str(text).map_err(|e| config_err(format!("calibration file: {e}")))?;
        if cal.format_version != FORMAT_VERSION {
            return Err(config_err(format!(
                "calibration format_version {} is not supported (expected {FORMAT_VERSION})",
                cal.format_version
            )));
        }
        if !cal.classical.is_calibrated() {
            return Err(config_err(
                "calibration classical.ase_power_w must be positive",
            ));
        }
        Ok(cal)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }
}

/// Fitted coefficient together with the count rate it reproduces.
pub struct RamanFit {
    pub classical_nm: f64,
    pub quantum_nm: f64,
    pub rho: f64,
    pub measured_cps: f64,
    pub predicted_cps: f64,
}

pub fn calibrate(doc: &ConfigDocument) -> CliResult<(CalibrationFile, Vec<RamanFit>)> {
    let bench = doc.raman()?;
    if bench.measurements.is_empty() {
        return Err(config_err("raman.measurements is empty"));
    }
    if doc.classical.anchors.len() < 2 {
        return Err(config_err(format!(
            "classical.anchors needs at least 2 entries, found {}",
            doc.classical.anchors.len()
        )));
    }
    let spool = doc.fiber_spec(bench.length_km)?;
    let mut raman = RamanCalibration::default();
    let mut fits = Vec::new();
    for m in &bench.measurements {
        let filter = doc.raman_filter(m.quantum_nm)?;
        let meas = RamanMeasurement {
            classical_nm: m.classical_nm,
            measured_cps: m.measured_cps,
            launch_power_w: m.launch_power_mw * 1e-3,
            direction: m.direction,
        };
        let rho = calibrate_raman(&meas, &spool, &filter, &bench.detector)?;
        raman.insert(m.classical_nm, m.quantum_nm, rho)?;
        let back = raman_power(
            m.direction,
            meas.launch_power_w,
            rho,
            filter.passband_ghz,
            &spool,
            m.classical_nm,
            m.quantum_nm,
        )? * db_to_ratio(filter.insertion_loss_db);
        let predicted_cps = power_to_count_rate(back, m.quantum_nm, &bench.detector)?;
        fits.push(RamanFit {
            classical_nm: m.classical_nm,
            quantum_nm: m.quantum_nm,
            rho,
            measured_cps: m.measured_cps,
            predicted_cps,
        });
    }
    let c = &doc.classical;
    let start = ClassicalLinkModel {
        channel_power_dbm: c.channel_power_dbm,
        fiber_atten_db_per_km: c.fiber_atten_db_per_km,
        ..ClassicalLinkModel::uncalibrated(c.n_channels, c.wdm_loss_db)
    };
    let classical = calibrate_classical(&start, &c.anchors)?;
    Ok((
        CalibrationFile {
            format_version: FORMAT_VERSION,
            raman,
            classical,
        },
        fits,
    ))
}
