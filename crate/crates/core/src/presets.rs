//! Parameter sets of the reference deployment: SSMF attenuations, the Raman
//! bench measurements, the QKD receiver and the 4-channel 64-QAM and
//! 32-channel 16-QAM classical systems.

use crate::channel::{
    calibrate_raman, DetectorSpec, Direction, FiberSpec, RamanCalibration, RamanMeasurement,
    WdmFilterSpec,
};
use crate::classical::{
    calibrate_classical, ClassicalAnchor, ClassicalLinkModel, FecSpec, FrameSpec, QamFormat,
};
use crate::error::{config, Result};
use crate::keyrate::{DecoyProtocol, QkdSystemSpec};
use crate::planner::{ClassicalPlan, QuantumPath, Scenario};
use crate::units::dbm_to_w;

pub const CLASSICAL_NM: f64 = 1550.0;
pub const O_BAND_NM: f64 = 1310.0;
pub const C_BAND_QKD_NM: f64 = 1550.12;

/// Length of the Raman measurement spool.
pub const BENCH_LENGTH_KM: f64 = 13.6;
pub const BENCH_LAUNCH_DBM: f64 = 6.0;
pub const BENCH_CPS_1310: f64 = 6.2e3;
pub const BENCH_CPS_1550_12: f64 = 440.4e3;

/// Afterpulse probability that reproduces the measured QBER floor of the
/// deployed InGaAs detectors.
pub const DEPLOYED_AFTERPULSE_PROB: f64 = 0.025;

pub fn fiber(length_km: f64) -> FiberSpec {
    FiberSpec {
        length_km,
        attenuation: vec![(O_BAND_NM, 0.33), (CLASSICAL_NM, 0.2), (C_BAND_QKD_NM, 0.2)],
    }
}

/// Gated detector of the Raman bench (1.25 GHz, 180 ps gates).
pub fn bench_detector() -> DetectorSpec {
    DetectorSpec {
        efficiency: 0.1,
        dark_prob_per_gate: 1e-6,
        gate_rate_hz: 1.25e9,
        gate_width_s: 180e-12,
        dead_time_s: 0.0,
        afterpulse_prob: 0.0,
    }
}

/// QKD receiver detector at the 625 MHz system clock.
pub fn qkd_detector() -> DetectorSpec {
    DetectorSpec {
        efficiency: 0.1,
        dark_prob_per_gate: 1e-6,
        gate_rate_hz: 625e6,
        gate_width_s: 180e-12,
        dead_time_s: 200e-9,
        afterpulse_prob: DEPLOYED_AFTERPULSE_PROB,
    }
}

/// CWDM demultiplexer port followed by the 100 GHz bandpass filter.
///
/// The CWDM passband is 24 times the bandpass width, matching the Raman
/// reduction the narrow filter provides.
pub fn quantum_path_1310() -> QuantumPath {
    QuantumPath {
        wavelength_nm: O_BAND_NM,
        filters: vec![
            WdmFilterSpec {
                center_nm: O_BAND_NM,
                passband_ghz: 2400.0,
                insertion_loss_db: 0.0,
                isolation_db: 180.0,
            },
            WdmFilterSpec {
                center_nm: O_BAND_NM,
                passband_ghz: 100.0,
                insertion_loss_db: 0.5,
                isolation_db: 0.5,
            },
        ],
        signal_extra_loss_db: 0.0,
    }
}

/// DWDM port followed by a 20 GHz fibre Bragg grating with 3.2 dB extra loss.
pub fn quantum_path_1550_12() -> QuantumPath {
    QuantumPath {
        wavelength_nm: C_BAND_QKD_NM,
        filters: vec![
            WdmFilterSpec {
                center_nm: C_BAND_QKD_NM,
                passband_ghz: 100.0,
                insertion_loss_db: 0.0,
                isolation_db: 180.0,
            },
            WdmFilterSpec {
                center_nm: C_BAND_QKD_NM,
                passband_ghz: 20.0,
                insertion_loss_db: 3.2,
                isolation_db: 3.2,
            },
        ],
        signal_extra_loss_db: 3.2,
    }
}

pub fn quantum_path(wavelength_nm: f64) -> Result<QuantumPath> {
    if (wavelength_nm - O_BAND_NM).abs() < 1e-6 {
        Ok(quantum_path_1310())
    } else if (wavelength_nm - C_BAND_QKD_NM).abs() < 1e-6 {
        Ok(quantum_path_1550_12())
    } else {
        Err(config(format!(
            "no reference quantum path at {wavelength_nm} nm (use 1310 or 1550.12)"
        )))
    }
}

/// Forward count-rate readings of the Raman bench at 6 dBm.
pub fn bench_measurements() -> [(f64, RamanMeasurement); 2] {
    let m = |cps| RamanMeasurement {
        classical_nm: CLASSICAL_NM,
        measured_cps: cps,
        launch_power_w: dbm_to_w(BENCH_LAUNCH_DBM),
        direction: Direction::Co,
    };
    [
        (O_BAND_NM, m(BENCH_CPS_1310)),
        (C_BAND_QKD_NM, m(BENCH_CPS_1550_12)),
    ]
}

/// Raman coefficients fitted to the bench readings.
pub fn raman_calibration() -> Result<RamanCalibration> {
    let spool = fiber(BENCH_LENGTH_KM);
    let det = bench_detector();
    let mut cal = RamanCalibration::default();
    for (q_nm, m) in bench_measurements() {
        let filter = quantum_path(q_nm)?.equivalent_filter()?;
        let rho = calibrate_raman(&m, &spool, &filter, &det)?;
        cal.insert(m.classical_nm, q_nm, rho)?;
    }
    Ok(cal)
}

pub fn four_channel_anchors() -> Vec<ClassicalAnchor> {
    vec![
        ClassicalAnchor::OptimumPower {
            length_km: 50.0,
            total_dbm: 4.0,
        },
        ClassicalAnchor::Ber {
            length_km: 80.0,
            total_dbm: 8.0,
            ber: 0.0214,
            m: 64,
        },
    ]
}

pub fn thirty_two_channel_anchors() -> Vec<ClassicalAnchor> {
    vec![
        ClassicalAnchor::OptimumPower {
            length_km: 50.0,
            total_dbm: 11.0,
        },
        ClassicalAnchor::Ber {
            length_km: 50.0,
            total_dbm: 11.0,
            ber: 0.0014,
            m: 16,
        },
    ]
}

/// Four 336 Gbps 64-QAM channels with soft-decision FEC.
pub fn four_channel_plan() -> Result<ClassicalPlan> {
    Ok(ClassicalPlan {
        wavelength_nm: CLASSICAL_NM,
        link: calibrate_classical(
            &ClassicalLinkModel {
                channel_power_dbm: 4.0,
                ..ClassicalLinkModel::uncalibrated(4, 1.6)
            },
            &four_channel_anchors(),
        )?,
        qam: QamFormat::qam64(),
        frame: FrameSpec::default(),
        fec: FecSpec::soft20(),
    })
}

/// Thirty-two 224 Gbps 16-QAM channels with hard-decision FEC.
pub fn thirty_two_channel_plan() -> Result<ClassicalPlan> {
    Ok(ClassicalPlan {
        wavelength_nm: CLASSICAL_NM,
        link: calibrate_classical(
            &ClassicalLinkModel {
                channel_power_dbm: 11.0,
                ..ClassicalLinkModel::uncalibrated(32, 2.0)
            },
            &thirty_two_channel_anchors(),
        )?,
        qam: QamFormat::qam16(),
        frame: FrameSpec::default(),
        fec: FecSpec::hard7(),
    })
}

pub fn scenario(
    quantum_nm: f64,
    direction: Direction,
    length_km: f64,
    classical: ClassicalPlan,
) -> Result<Scenario> {
    let sc = Scenario {
        fiber: fiber(length_km),
        direction,
        quantum: quantum_path(quantum_nm)?,
        classical,
        protocol: DecoyProtocol::default(),
        system: QkdSystemSpec::default(),
        detector: qkd_detector(),
        calibration: raman_calibration()?,
    };
    sc.validate()?;
    Ok(sc)
}

/// 1310 nm QKD with the 4-channel classical system.
pub fn scenario_1310(direction: Direction, length_km: f64) -> Result<Scenario> {
    scenario(O_BAND_NM, direction, length_km, four_channel_plan()?)
}

/// 1550.12 nm QKD with the 4-channel classical system.
pub fn scenario_1550_12(direction: Direction, length_km: f64) -> Result<Scenario> {
    scenario(C_BAND_QKD_NM, direction, length_km, four_channel_plan()?)
}
