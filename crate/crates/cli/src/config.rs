//! Scenario configuration document (TOML) and its translation into core types.

use serde::Deserialize;

use wdmqkd_core::channel::{DetectorSpec, Direction, FiberSpec, WdmFilterSpec};
use wdmqkd_core::classical::{ClassicalAnchor, FecKind, FecSpec, FrameSpec, QamFormat};
use wdmqkd_core::keyrate::{DecoyProtocol, QkdSystemSpec};
use wdmqkd_core::planner::{
    ClassicalPlan, PlanObjective, PowerSchedule, PowerStep, QuantumPath, Scenario,
};

use crate::calibration::CalibrationFile;
use crate::failure::{config_err, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub fiber: FiberSection,
    pub scenario: ScenarioSection,
    pub quantum: Vec<QuantumPath>,
    pub detector: DetectorSpec,
    #[serde(default)]
    pub protocol: DecoyProtocol,
    #[serde(default)]
    pub system: QkdSystemSpec,
    pub classical: ClassicalSection,
    pub raman: Option<RamanSection>,
    #[serde(default)]
    pub sweep: SweepSection,
    pub e2e: Option<E2eSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attenuation {
    pub wavelength_nm: f64,
    pub db_per_km: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    pub length_km: f64,
    pub attenuation: Vec<Attenuation>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub quantum_nm: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    pub wavelength_nm: f64,
    pub n_channels: u32,
    pub wdm_loss_db: f64,
    #[serde(default = "default_atten")]
    pub fiber_atten_db_per_km: f64,
    /// Nominal total launch power.
    pub channel_power_dbm: f64,
    pub qam: QamFormat,
    #[serde(default)]
    pub frame: FrameSpec,
    pub fec: FecKind,
    #[serde(default)]
    pub anchors: Vec<ClassicalAnchor>,
}

fn default_atten() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanMeasurementEntry {
    pub classical_nm: f64,
    pub quantum_nm: f64,
    pub measured_cps: f64,
    pub launch_power_mw: f64,
    pub direction: Direction,
}

/// Bench used to measure the Raman coefficients.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanSection {
    pub length_km: f64,
    pub detector: DetectorSpec,
    pub measurements: Vec<RamanMeasurementEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverSection {
    /// The wavelength whose key rate starts higher, then the one that wins at high power.
    pub quantum_nm: [f64; 2],
    pub lo_dbm: f64,
    pub hi_dbm: f64,
    pub step_db: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub powers_dbm: Vec<f64>,
    #[serde(default)]
    pub distances_km: Vec<f64>,
    /// Launch power by distance for distance sweeps, as `{ from_km, power_dbm }`.
    #[serde(default)]
    pub schedule: Vec<PowerStep>,
    pub crossover: Option<CrossoverSection>,
    #[serde(default)]
    pub objective: PlanObjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyRateSource {
    /// Finite-block analytic report of the scenario.
    #[default]
    Analytic,
    /// Decoy analysis of the simulated tallies.
    Empirical,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E2eSection {
    pub n_pulses: u64,
    pub seed: u64,
    pub power_dbm: f64,
    #[serde(default)]
    pub key_rate_source: KeyRateSource,
    /// Replaces the optical error rate on both the simulated and analysed link.
    pub forced_qber: Option<f64>,
    #[serde(default = "default_passes")]
    pub cascade_passes: u32,
    #[serde(default = "default_block_factor")]
    pub cascade_block_factor: f64,
    #[serde(default = "default_margin")]
    pub security_margin: u64,
    #[serde(default = "default_tag_bits")]
    pub tag_bits: usize,
}

fn default_passes() -> u32 {
    4
}

fn default_block_factor() -> f64 {
    0.73
}

fn default_margin() -> u64 {
    wdmqkd_core::postproc::DEFAULT_SECURITY_MARGIN
}

fn default_tag_bits() -> usize {
    wdmqkd_core::postproc::auth::DEFAULT_TAG_BITS
}

fn same_nm(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-6
}

impl ConfigDocument {
    pub fn parse(text: &str) -> CliResult<Self> {
        let doc: ConfigDocument = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    fn has_attenuation(&self, nm: f64) -> bool {
        self.fiber
            .attenuation
            .iter()
            .any(|a| same_nm(a.wavelength_nm, nm))
    }

    fn require_attenuation(&self, nm: f64, key: &str) -> CliResult<()> {
        if self.has_attenuation(nm) {
            Ok(())
        } else {
            Err(config_err(format!(
                "fiber.attenuation has no entry for {nm} nm (referenced by {key})"
            )))
        }
    }

    fn validate(&self) -> CliResult<()> {
        fn at(key: &str) -> impl Fn(wdmqkd_core::Error) -> crate::failure::Failure + '_ {
            move |e| config_err(format!("{key}: {e}"))
        }
        self.fiber_spec(self.fiber.length_km).map_err(at("fiber"))?;
        for (i, a) in self.fiber.attenuation.iter().enumerate() {
            if !(a.db_per_km >= 0.0) {
                return Err(config_err(format!(
                    "fiber.attenuation[{i}].db_per_km must be non-negative, got {}",
                    a.db_per_km
                )));
            }
        }
        self.require_attenuation(self.scenario.quantum_nm, "scenario.quantum_nm")?;
        self.require_attenuation(self.classical.wavelength_nm, "classical.wavelength_nm")?;
        for (i, q) in self.quantum.iter().enumerate() {
            self.require_attenuation(q.wavelength_nm, &format!("quantum[{i}].wavelength_nm"))?;
            for f in &q.filters {
                f.validate().map_err(at(&format!("quantum[{i}].filters")))?;
            }
            q.equivalent_filter()
                .map_err(at(&format!("quantum[{i}].filters")))?;
        }
        self.quantum_path(self.scenario.quantum_nm)?;
        self.detector.validate().map_err(at("detector"))?;
        self.protocol.validate().map_err(at("protocol"))?;
        self.system.validate().map_err(at("system"))?;
        self.classical.qam.validate().map_err(at("classical.qam"))?;
        self.classical
            .frame
            .validate()
            .map_err(at("classical.frame"))?;
        if self.classical.n_channels == 0 {
            return Err(config_err("classical.n_channels must be at least 1"));
        }
        if let Some(r) = &self.raman {
            if !(r.length_km > 0.0) {
                return Err(config_err(format!(
                    "raman.length_km must be positive, got {}",
                    r.length_km
                )));
            }
            r.detector.validate().map_err(at("raman.detector"))?;
            for (i, m) in r.measurements.iter().enumerate() {
                let key = |f: &str| format!("raman.measurements[{i}].{f}");
                if !(m.launch_power_mw > 0.0) {
                    return Err(config_err(format!(
                        "{} must be positive, got {}",
                        key("launch_power_mw"),
                        m.launch_power_mw
                    )));
                }
                if !(m.measured_cps > 0.0) {
                    return Err(config_err(format!(
                        "{} must be positive, got {}",
                        key("measured_cps"),
                        m.measured_cps
                    )));
                }
                self.require_attenuation(m.classical_nm, &key("classical_nm"))?;
                self.require_attenuation(m.quantum_nm, &key("quantum_nm"))?;
                self.quantum_path(m.quantum_nm).map_err(|_| {
                    config_err(format!("{} has no [[quantum]] entry", key("quantum_nm")))
                })?;
            }
        }
        if let Some(c) = &self.sweep.crossover {
            for (i, nm) in c.quantum_nm.iter().enumerate() {
                self.quantum_path(*nm).map_err(|_| {
                    config_err(format!(
                        "sweep.crossover.quantum_nm[{i}] = {nm} has no [[quantum]] entry"
                    ))
                })?;
            }
            if !(c.step_db > 0.0) || !(c.hi_dbm > c.lo_dbm) {
                return Err(config_err(
                    "sweep.crossover needs lo_dbm < hi_dbm and step_db > 0",
                ));
            }
        }
        if let Some(e) = &self.e2e {
            if e.n_pulses == 0 {
                return Err(config_err("e2e.n_pulses must be at least 1"));
            }
            if let Some(q) = e.forced_qber {
                if !(0.0..=0.5).contains(&q) {
                    return Err(config_err(format!(
                        "e2e.forced_qber must be in [0, 0.5], got {q}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn fiber_spec(&self, length_km: f64) -> wdmqkd_core::Result<FiberSpec> {
        FiberSpec::new(
            length_km,
            self.fiber
                .attenuation
                .iter()
                .map(|a| (a.wavelength_nm, a.db_per_km))
                .collect(),
        )
    }

    pub fn quantum_path(&self, nm: f64) -> CliResult<&QuantumPath> {
        self.quantum
            .iter()
            .find(|q| same_nm(q.wavelength_nm, nm))
            .ok_or_else(|| {
                config_err(format!(
                    "scenario.quantum_nm = {nm} has no [[quantum]] entry"
                ))
            })
    }

    pub fn raman_filter(&self, quantum_nm: f64) -> CliResult<WdmFilterSpec> {
        self.quantum_path(quantum_nm)?
            .equivalent_filter()
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn raman(&self) -> CliResult<&RamanSection> {
        self.raman
            .as_ref()
            .ok_or_else(|| config_err("missing [raman] section with the bench measurements"))
    }

    pub fn e2e(&self) -> CliResult<&E2eSection> {
        self.e2e
            .as_ref()
            .ok_or_else(|| config_err("missing [e2e] section"))
    }

    pub fn schedule(&self) -> PowerSchedule {
        if self.sweep.schedule.is_empty() {
            PowerSchedule::constant(self.classical.channel_power_dbm)
        } else {
            let pairs: Vec<_> = self
                .sweep
                .schedule
                .iter()
                .map(|s| (s.from_km, s.power_dbm))
                .collect();
            PowerSchedule::from_pairs(&pairs)
        }
    }

    /// The configured scenario with QKD at `quantum_nm`.
    pub fn scenario(&self, cal: &CalibrationFile, quantum_nm: f64) -> CliResult<Scenario> {
        let link = &cal.classical;
        if link.n_channels != self.classical.n_channels {
            return Err(config_err(format!(
                "calibration was fitted for {} classical channels, classical.n_channels is {}",
                link.n_channels, self.classical.n_channels
            )));
        }
        let sc = Scenario {
            fiber: self
                .fiber_spec(self.fiber.length_km)
                .map_err(|e| config_err(format!("fiber: {e}")))?,
            direction: self.scenario.direction,
            quantum: self.quantum_path(quantum_nm)?.clone(),
            classical: ClassicalPlan {
                wavelength_nm: self.classical.wavelength_nm,
                link: link.clone(),
                qam: self.classical.qam.clone(),
                frame: self.classical.frame.clone(),
                fec: FecSpec::of_kind(self.classical.fec),
            },
            protocol: self.protocol.clone(),
            system: self.system.clone(),
            detector: self.detector.clone(),
            calibration: cal.raman.clone(),
        };
        sc.validate()
            .map_err(|e| config_err(format!("calibration: {e}")))?;
        Ok(sc)
    }
}
