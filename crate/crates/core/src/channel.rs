//! Fibre attenuation, spontaneous Raman scattering, filter crosstalk and
//! the conversion of optical noise into single-photon detector counts.
//!
//! Raman generation is modelled with a single scattering coefficient `rho`
//! per (classical, quantum) wavelength pair, in units of 1/(km*GHz): the
//! fraction of launched classical power converted into the quantum band
//! per km of fibre and per GHz of receiver bandwidth. Forward (co-propagating)
//! noise is generated along the fibre and attenuated at the quantum
//! wavelength on its way to the far end; backward noise is generated along the
//! fibre and returns to the launch end.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::units::{db_per_km_to_per_km, db_to_ratio, photon_energy_j};

const WAVELENGTH_TOL_NM: f64 = 1e-6;

/// Propagation direction of the quantum signal relative to the classical light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Quantum and classical light travel the same way; forward Raman noise.
    Co,
    /// Quantum light travels against the classical light; backward Raman noise.
    Counter,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Co => f.write_str("co"),
            Direction::Counter => f.write_str("counter"),
        }
    }
}

/// A single span of standard single-mode fibre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub length_km: f64,
    /// `(wavelength_nm, attenuation_db_per_km)` entries.
    pub attenuation: Vec<(f64, f64)>,
}

impl FiberSpec {
    pub fn new(length_km: f64, attenuation: Vec<(f64, f64)>) -> Result<Self> {
        let fiber = FiberSpec {
            length_km,
            attenuation,
        };
        fiber.validate()?;
        Ok(fiber)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km >= 0.0) || !self.length_km.is_finite() {
            return Err(config(format!(
                "fiber length must be >= 0 km, got {}",
                self.length_km
            )));
        }
        for &(nm, a) in &self.attenuation {
            if !(a > 0.0 && a < 1.0) {
                return Err(config(format!(
                    "attenuation at {nm} nm must be in (0, 1) dB/km, got {a}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_length(&self, length_km: f64) -> Self {
        FiberSpec {
            length_km,
            attenuation: self.attenuation.clone(),
        }
    }

    pub fn attenuation_db_per_km(&self, wavelength_nm: f64) -> Result<f64> {
        self.attenuation
            .iter()
            .find(|(nm, _)| (nm - wavelength_nm).abs() <= WAVELENGTH_TOL_NM)
            .map(|&(_, a)| a)
            .ok_or_else(|| config(format!("no attenuation entry for {wavelength_nm} nm")))
    }

    fn alpha_per_km(&self, wavelength_nm: f64) -> Result<f64> {
        self.attenuation_db_per_km(wavelength_nm)
            .map(db_per_km_to_per_km)
    }
}

/// A WDM filter or multiplexer port on the quantum path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WdmFilterSpec {
    pub center_nm: f64,
    pub passband_ghz: f64,
    pub insertion_loss_db: f64,
    /// Out-of-band suppression of the classical channels.
    pub isolation_db: f64,
}

impl WdmFilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.passband_ghz > 0.0) {
            return Err(config(format!(
                "filter passband must be positive, got {} GHz",
                self.passband_ghz
            )));
        }
        if !(self.insertion_loss_db >= 0.0) || !(self.isolation_db >= 0.0) {
            return Err(config("filter losses must be non-negative"));
        }
        if self.insertion_loss_db > self.isolation_db {
            return Err(config(format!(
                "filter insertion loss {} dB exceeds isolation {} dB",
                self.insertion_loss_db, self.isolation_db
            )));
        }
        Ok(())
    }
}

/// Gated single-photon detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub dark_prob_per_gate: f64,
    pub gate_rate_hz: f64,
    pub gate_width_s: f64,
    pub dead_time_s: f64,
    /// Probability that a click triggers a later spurious click.
    #[serde(default)]
    pub afterpulse_prob: f64,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(config(format!(
                    "detector {name} must be in [0, 1], got {v}"
                )))
            }
        };
        unit("efficiency", self.efficiency)?;
        unit("dark_prob_per_gate", self.dark_prob_per_gate)?;
        unit("afterpulse_prob", self.afterpulse_prob)?;
        if self.afterpulse_prob >= 1.0 {
            return Err(config("afterpulse_prob must be < 1"));
        }
        if !(self.gate_rate_hz > 0.0) || !(self.gate_width_s > 0.0) {
            return Err(config("detector gate rate and width must be positive"));
        }
        if !(self.dead_time_s >= 0.0) {
            return Err(config("detector dead time must be non-negative"));
        }
        if self.duty_cycle() > 1.0 {
            return Err(config(format!(
                "detector duty cycle {} exceeds 1",
                self.duty_cycle()
            )));
        }
        if self.dark_prob_per_gate >= 1e-3 {
            return Err(config(format!(
                "dark count probability {} per gate is not a single-photon detector",
                self.dark_prob_per_gate
            )));
        }
        Ok(())
    }

    pub fn duty_cycle(&self) -> f64 {
        self.gate_width_s * self.gate_rate_hz
    }

    pub fn dark_cps(&self) -> f64 {
        self.dark_prob_per_gate * self.gate_rate_hz
    }

    /// Dead time expressed in whole gates.
    pub fn dead_gates(&self) -> u64 {
        (self.dead_time_s * self.gate_rate_hz).round() as u64
    }
}

/// One calibrated Raman coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanCoefficient {
    pub classical_nm: f64,
    pub quantum_nm: f64,
    /// 1/(km*GHz).
    pub rho: f64,
}

/// Scattering coefficients per (classical, quantum) wavelength pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanCalibration {
    pub coefficients: Vec<RamanCoefficient>,
}

impl RamanCalibration {
    pub fn insert(&mut self, classical_nm: f64, quantum_nm: f64, rho: f64) -> Result<()> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Calibration(format!(
                "Raman coefficient must be positive, got {rho}"
            )));
        }
        let same = |c: &RamanCoefficient| {
            (c.classical_nm - classical_nm).abs() <= WAVELENGTH_TOL_NM
                && (c.quantum_nm - quantum_nm).abs() <= WAVELENGTH_TOL_NM
        };
        match self.coefficients.iter_mut().find(|c| same(c)) {
            Some(c) => c.rho = rho,
            None => self.coefficients.push(RamanCoefficient {
                classical_nm,
                quantum_nm,
                rho,
            }),
        }
        Ok(())
    }

    pub fn rho(&self, classical_nm: f64, quantum_nm: f64) -> Result<f64> {
        self.coefficients
            .iter()
            .find(|c| {
                (c.classical_nm - classical_nm).abs() <= WAVELENGTH_TOL_NM
                    && (c.quantum_nm - quantum_nm).abs() <= WAVELENGTH_TOL_NM
            })
            .map(|c| c.rho)
            .ok_or_else(|| {
                config(format!(
                    "no Raman calibration for {classical_nm} nm -> {quantum_nm} nm"
                ))
            })
    }
}

/// Noise contributions at the QKD receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseBudget {
    pub raman_cps: f64,
    pub dark_cps: f64,
    pub crosstalk_cps: f64,
    pub afterpulse_cps: f64,
    /// Background yield Y0: sum of the components divided by the gate rate.
    pub total_y0_per_gate: f64,
}

/// Fibre transmittance at `wavelength_nm` with `extra_loss_db` of lumped loss.
pub fn transmittance(fiber: &FiberSpec, wavelength_nm: f64, extra_loss_db: f64) -> Result<f64> {
    let a = fiber.attenuation_db_per_km(wavelength_nm)?;
    Ok(db_to_ratio(a * fiber.length_km + extra_loss_db))
}

fn check_pair(classical_nm: f64, quantum_nm: f64) -> Result<()> {
    if (classical_nm - quantum_nm).abs() <= WAVELENGTH_TOL_NM {
        return Err(domain(format!(
            "classical and quantum wavelengths coincide at {quantum_nm} nm"
        )));
    }
    Ok(())
}

/// (e^(-aq L) - e^(-ac L)) / (ac - aq), written as e^(-ac L) * L * exprel((ac-aq) L)
/// so that the equal-attenuation limit L e^(-a L) is reached continuously.
fn forward_length_factor(ac: f64, aq: f64, length_km: f64) -> f64 {
    let x = (ac - aq) * length_km;
    let exprel = if x.abs() < 1e-8 {
        1.0 + x / 2.0
    } else {
        x.exp_m1() / x
    };
    (-ac * length_km).exp() * length_km * exprel
}

fn backward_length_factor(ac: f64, aq: f64, length_km: f64) -> f64 {
    let s = ac + aq;
    -(-s * length_km).exp_m1() / s
}

/// Forward spontaneous Raman power (W) reaching the far end of the fibre
/// inside a receiver bandwidth of `bandwidth_ghz`.
pub fn raman_forward_power(
    p_launch_w: f64,
    rho: f64,
    bandwidth_ghz: f64,
    fiber: &FiberSpec,
    classical_nm: f64,
    quantum_nm: f64,
) -> Result<f64> {
    check_pair(classical_nm, quantum_nm)?;
    let ac = fiber.alpha_per_km(classical_nm)?;
    let aq = fiber.alpha_per_km(quantum_nm)?;
    Ok(p_launch_w * rho * bandwidth_ghz * forward_length_factor(ac, aq, fiber.length_km))
}

/// Backward spontaneous Raman power (W) returning to the launch end.
pub fn raman_backward_power(
    p_launch_w: f64,
    rho: f64,
    bandwidth_ghz: f64,
    fiber: &FiberSpec,
    classical_nm: f64,
    quantum_nm: f64,
) -> Result<f64> {
    check_pair(classical_nm, quantum_nm)?;
    let ac = fiber.alpha_per_km(classical_nm)?;
    let aq = fiber.alpha_per_km(quantum_nm)?;
    Ok(p_launch_w * rho * bandwidth_ghz * backward_length_factor(ac, aq, fiber.length_km))
}

pub fn raman_power(
    direction: Direction,
    p_launch_w: f64,
    rho: f64,
    bandwidth_ghz: f64,
    fiber: &FiberSpec,
    classical_nm: f64,
    quantum_nm: f64,
) -> Result<f64> {
    match direction {
        Direction::Co => raman_forward_power(
            p_launch_w,
            rho,
            bandwidth_ghz,
            fiber,
            classical_nm,
            quantum_nm,
        ),
        Direction::Counter => raman_backward_power(
            p_launch_w,
            rho,
            bandwidth_ghz,
            fiber,
            classical_nm,
            quantum_nm,
        ),
    }
}

/// Detector count rate (cps) for optical power `p_w` at the detector input.
///
/// The raw rate `flux * efficiency * duty` is corrected for non-paralyzable
/// dead time as `raw / (1 + raw * dead_time)`.
pub fn power_to_count_rate(p_w: f64, wavelength_nm: f64, det: &DetectorSpec) -> Result<f64> {
    if !(p_w >= 0.0) {
        return Err(domain(format!(
            "optical power must be non-negative, got {p_w} W"
        )));
    }
    let raw = p_w / photon_energy_j(wavelength_nm) * det.efficiency * det.duty_cycle();
    Ok(raw / (1.0 + raw * det.dead_time_s))
}

/// Inverse of [`power_to_count_rate`].
pub fn count_rate_to_power(cps: f64, wavelength_nm: f64, det: &DetectorSpec) -> Result<f64> {
    if !(cps >= 0.0) {
        return Err(domain(format!(
            "count rate must be non-negative, got {cps}"
        )));
    }
    let saturation = cps * det.dead_time_s;
    if saturation >= 1.0 {
        return Err(Error::Calibration(format!(
            "{cps} cps is beyond the dead-time limit of the detector"
        )));
    }
    let raw = cps / (1.0 - saturation);
    let gain = det.efficiency * det.duty_cycle();
    if !(gain > 0.0) {
        return Err(Error::Calibration("detector has zero efficiency".into()));
    }
    Ok(raw / gain * photon_energy_j(wavelength_nm))
}

/// A Raman count-rate reading used to fit `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanMeasurement {
    pub classical_nm: f64,
    pub measured_cps: f64,
    pub launch_power_w: f64,
    pub direction: Direction,
}

/// Fits `rho` for the pair (classical, filter centre) from a measured count rate.
///
/// The reading is taken behind `filter`, whose centre wavelength is the
/// quantum wavelength, with detector `det`.
pub fn calibrate_raman(
    m: &RamanMeasurement,
    fiber: &FiberSpec,
    filter: &WdmFilterSpec,
    det: &DetectorSpec,
) -> Result<f64> {
    if !(m.launch_power_w > 0.0) {
        return Err(Error::Calibration(format!(
            "launch power must be positive, got {} W",
            m.launch_power_w
        )));
    }
    if !(m.measured_cps > det.dark_cps()) {
        return Err(Error::Calibration(format!(
            "measured {} cps is not above the dark floor of {} cps",
            m.measured_cps,
            det.dark_cps()
        )));
    }
    let at_detector = count_rate_to_power(m.measured_cps, filter.center_nm, det)?;
    let at_fiber_end = at_detector / db_to_ratio(filter.insertion_loss_db);
    // Unit-rho power gives the full linear response.
    let unit = raman_power(
        m.direction,
        m.launch_power_w,
        1.0,
        filter.passband_ghz,
        fiber,
        m.classical_nm,
        filter.center_nm,
    )?;
    if !(unit > 0.0) {
        return Err(Error::Calibration(
            "zero Raman response (zero fibre length?)".into(),
        ));
    }
    Ok(at_fiber_end / unit)
}

/// Inputs for a receiver noise budget.
#[derive(Debug, Clone)]
pub struct NoiseInputs<'a> {
    pub fiber: &'a FiberSpec,
    pub classical_nm: f64,
    pub quantum_nm: f64,
    /// Total classical launch power.
    pub launch_power_w: f64,
    pub direction: Direction,
    pub calibration: &'a RamanCalibration,
    /// Narrow filter in front of the detector; sets the Raman bandwidth.
    pub receiver_filter: &'a WdmFilterSpec,
    /// Total out-of-band isolation between classical channels and the detector.
    pub isolation_db: f64,
    pub detector: &'a DetectorSpec,
    /// Mean probability per gate that a signal photon clicks (drives afterpulsing).
    pub signal_click_prob: f64,
}

pub fn noise_budget(inp: &NoiseInputs<'_>) -> Result<NoiseBudget> {
    let det = inp.detector;
    let rho = inp.calibration.rho(inp.classical_nm, inp.quantum_nm)?;
    let raman_w = raman_power(
        inp.direction,
        inp.launch_power_w,
        rho,
        inp.receiver_filter.passband_ghz,
        inp.fiber,
        inp.classical_nm,
        inp.quantum_nm,
    )? * db_to_ratio(inp.receiver_filter.insertion_loss_db);
    let raman_cps = power_to_count_rate(raman_w, inp.quantum_nm, det)?;

    // Leaked classical light: a counter-propagating receiver sits at the launch end.
    let fiber_t = match inp.direction {
        Direction::Co => transmittance(inp.fiber, inp.classical_nm, 0.0)?,
        Direction::Counter => 1.0,
    };
    let leak_w = inp.launch_power_w * fiber_t * db_to_ratio(inp.isolation_db);
    let crosstalk_cps = power_to_count_rate(leak_w, inp.classical_nm, det)?;

    let dark_cps = det.dark_cps();
    let base_per_gate = (raman_cps + crosstalk_cps + dark_cps) / det.gate_rate_hz;
    let p = det.afterpulse_prob;
    let afterpulse_per_gate = p * (inp.signal_click_prob + base_per_gate) / (1.0 - p);
    let afterpulse_cps = afterpulse_per_gate * det.gate_rate_hz;

    Ok(NoiseBudget {
        raman_cps,
        dark_cps,
        crosstalk_cps,
        afterpulse_cps,
        total_y0_per_gate: (raman_cps + dark_cps + crosstalk_cps + afterpulse_cps)
            / det.gate_rate_hz,
    })
}
