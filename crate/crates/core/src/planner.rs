//! Scenario evaluation: Raman noise to background yield to key rate, plus the
//! classical BER and throughput at the same launch power.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    noise_budget, transmittance, DetectorSpec, Direction, FiberSpec, NoiseInputs, RamanCalibration,
    WdmFilterSpec,
};
use crate::classical::{
    effective_snr, fec_gate, net_throughput, qam_ber, ClassicalLinkModel, FecSpec, FrameSpec,
    QamFormat,
};
use crate::error::{config, Error, Result};
use crate::keyrate::{analyze, model_observables, DecoyProtocol, KeyRateReport, QkdSystemSpec};
use crate::units::dbm_to_w;

/// Filters between the fibre and the quantum detector, and losses on the signal path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumPath {
    pub wavelength_nm: f64,
    pub filters: Vec<WdmFilterSpec>,
    /// Signal-only loss on top of fibre and receiver loss.
    #[serde(default)]
    pub signal_extra_loss_db: f64,
}

impl QuantumPath {
    /// Collapses the cascade into one equivalent filter: narrowest passband,
    /// summed insertion loss and isolation.
    pub fn equivalent_filter(&self) -> Result<WdmFilterSpec> {
        if self.filters.is_empty() {
            return Err(config("quantum path needs at least one filter"));
        }
        Ok(WdmFilterSpec {
            center_nm: self.wavelength_nm,
            passband_ghz: self
                .filters
                .iter()
                .map(|f| f.passband_ghz)
                .fold(f64::INFINITY, f64::min),
            insertion_loss_db: self.filters.iter().map(|f| f.insertion_loss_db).sum(),
            isolation_db: self.filters.iter().map(|f| f.isolation_db).sum(),
        })
    }
}

/// Classical WDM traffic sharing the fibre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalPlan {
    /// Representative wavelength of the C-band channels for Raman arithmetic.
    pub wavelength_nm: f64,
    pub link: ClassicalLinkModel,
    pub qam: QamFormat,
    #[serde(default)]
    pub frame: FrameSpec,
    pub fec: FecSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub fiber: FiberSpec,
    pub direction: Direction,
    pub quantum: QuantumPath,
    pub classical: ClassicalPlan,
    pub protocol: DecoyProtocol,
    pub system: QkdSystemSpec,
    pub detector: DetectorSpec,
    pub calibration: RamanCalibration,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        self.protocol.validate()?;
        self.system.validate()?;
        self.detector.validate()?;
        self.classical.qam.validate()?;
        self.classical.frame.validate()?;
        for f in &self.quantum.filters {
            f.validate()?;
        }
        self.quantum.equivalent_filter()?;
        if (self.quantum.wavelength_nm - self.classical.wavelength_nm).abs() < 1e-6 {
            return Err(config(
                "quantum wavelength coincides with the classical channels",
            ));
        }
        self.fiber
            .attenuation_db_per_km(self.quantum.wavelength_nm)?;
        self.fiber
            .attenuation_db_per_km(self.classical.wavelength_nm)?;
        self.calibration
            .rho(self.classical.wavelength_nm, self.quantum.wavelength_nm)?;
        Ok(())
    }

    pub fn at_length(&self, length_km: f64) -> Scenario {
        Scenario {
            fiber: self.fiber.with_length(length_km),
            ..self.clone()
        }
    }

    /// Overall signal transmittance including Bob's optics and detector efficiency.
    pub fn signal_eta(&self) -> Result<f64> {
        Ok(transmittance(
            &self.fiber,
            self.quantum.wavelength_nm,
            self.system.bob_loss_db + self.quantum.signal_extra_loss_db,
        )? * self.detector.efficiency)
    }

    /// Mean probability per clock that a signal photon clicks.
    fn signal_click_prob(&self, eta: f64) -> f64 {
        let p = &self.protocol;
        p.p_signal * -(-eta * p.mu).exp_m1() + p.p_decoy * -(-eta * p.nu).exp_m1()
    }

    /// Background yield per gate at total classical launch power `power_dbm`.
    pub fn background_yield(&self, power_dbm: f64) -> Result<f64> {
        let eta = self.signal_eta()?;
        let filter = self.quantum.equivalent_filter()?;
        let budget = noise_budget(&NoiseInputs {
            fiber: &self.fiber,
            classical_nm: self.classical.wavelength_nm,
            quantum_nm: self.quantum.wavelength_nm,
            launch_power_w: dbm_to_w(power_dbm),
            direction: self.direction,
            calibration: &self.calibration,
            receiver_filter: &filter,
            isolation_db: filter.isolation_db,
            detector: &self.detector,
            signal_click_prob: self.signal_click_prob(eta),
        })?;
        Ok(budget.total_y0_per_gate.min(1.0))
    }

    /// Finite-block key-rate report at total launch power `power_dbm`.
    pub fn key_report(&self, power_dbm: f64) -> Result<(f64, f64, KeyRateReport)> {
        let eta = self.signal_eta()?;
        let y0 = self.background_yield(power_dbm)?;
        let obs = model_observables(&self.protocol, eta, y0, self.system.e_opt)?;
        Ok((y0, obs.e_mu, analyze(&obs, &self.protocol, &self.system)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanPoint {
    pub distance_km: f64,
    pub power_dbm: f64,
    pub direction: Direction,
    pub y0: f64,
    pub qber: f64,
    pub key_bps: f64,
    pub secure: bool,
    pub ber_raw: f64,
    pub fec_pass: bool,
    pub net_bps: f64,
}

impl PlanPoint {
    pub fn feasible(&self) -> bool {
        self.fec_pass && self.key_bps > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub points: Vec<PlanPoint>,
    /// Index into `points` of the selected operating point.
    pub chosen: Option<usize>,
    /// Why nothing was chosen, for plans with an empty feasible set.
    pub diagnostics: Option<String>,
}

impl PlanReport {
    fn sweep(points: Vec<PlanPoint>) -> Self {
        PlanReport {
            points,
            chosen: None,
            diagnostics: None,
        }
    }

    pub fn chosen_point(&self) -> Option<&PlanPoint> {
        self.chosen.map(|i| &self.points[i])
    }

    /// The chosen point, or [`Error::Infeasible`].
    pub fn require_chosen(&self) -> Result<&PlanPoint> {
        self.chosen_point().ok_or_else(|| {
            Error::Infeasible(
                self.diagnostics
                    .clone()
                    .unwrap_or_else(|| "no point chosen".into()),
            )
        })
    }
}

pub fn evaluate_point(scenario: &Scenario, distance_km: f64, power_dbm: f64) -> Result<PlanPoint> {
    let sc = scenario.at_length(distance_km);
    let (y0, qber, report) = sc.key_report(power_dbm)?;
    let c = &sc.classical;
    let snr = effective_snr(&c.link, power_dbm, distance_km)?;
    let ber_raw = qam_ber(snr, c.qam.m)?;
    let fec_pass = fec_gate(ber_raw, &c.fec).passed();
    let net_bps = if fec_pass {
        net_throughput(&c.qam, &c.frame, &c.fec, c.link.n_channels)
    } else {
        0.0
    };
    Ok(PlanPoint {
        distance_km,
        power_dbm,
        direction: sc.direction,
        y0,
        qber,
        key_bps: report.r_bps,
        secure: report.secure,
        ber_raw,
        fec_pass,
        net_bps,
    })
}

fn evaluate_all(scenario: &Scenario, grid: &[(f64, f64)]) -> Result<Vec<PlanPoint>> {
    grid.par_iter()
        .map(|&(d, p)| evaluate_point(scenario, d, p))
        .collect()
}

/// Key rate and classical figures over total launch powers at the scenario length.
pub fn keyrate_vs_power(scenario: &Scenario, power_grid: &[f64]) -> Result<PlanReport> {
    let l = scenario.fiber.length_km;
    let grid: Vec<_> = power_grid.iter().map(|&p| (l, p)).collect();
    evaluate_all(scenario, &grid).map(PlanReport::sweep)
}

/// One step of a distance-to-power schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerStep {
    pub from_km: f64,
    pub power_dbm: f64,
}

/// Launch power as a step function of distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSchedule {
    pub steps: Vec<PowerStep>,
}

impl PowerSchedule {
    pub fn constant(power_dbm: f64) -> Self {
        PowerSchedule {
            steps: vec![PowerStep {
                from_km: 0.0,
                power_dbm,
            }],
        }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        PowerSchedule {
            steps: pairs
                .iter()
                .map(|&(from_km, power_dbm)| PowerStep { from_km, power_dbm })
                .collect(),
        }
    }

    /// Power of the last step starting at or before `distance_km`; the first
    /// step also covers shorter distances.
    pub fn power_at(&self, distance_km: f64) -> Result<f64> {
        let mut steps = self.steps.clone();
        steps.sort_by(|a, b| a.from_km.total_cmp(&b.from_km));
        let first = steps
            .first()
            .ok_or_else(|| config("empty power schedule"))?;
        Ok(steps
            .iter()
            .rev()
            .find(|s| s.from_km <= distance_km)
            .unwrap_or(first)
            .power_dbm)
    }
}

pub fn keyrate_vs_distance(
    scenario: &Scenario,
    distances: &[f64],
    schedule: &PowerSchedule,
) -> Result<PlanReport> {
    let grid = distances
        .iter()
        .map(|&d| Ok((d, schedule.power_at(d)?)))
        .collect::<Result<Vec<_>>>()?;
    evaluate_all(scenario, &grid).map(PlanReport::sweep)
}

/// Launch power (dBm) where the key rate of `a` falls below that of `b`.
///
/// Scans `[lo_dbm, hi_dbm]` in `step_db` steps for the first change from
/// `key_a > key_b` to `key_a < key_b` and bisects it to 1e-4 dB.
pub fn crossover_power(
    a: &Scenario,
    b: &Scenario,
    lo_dbm: f64,
    hi_dbm: f64,
    step_db: f64,
) -> Result<f64> {
    if !(step_db > 0.0) || !(hi_dbm > lo_dbm) {
        return Err(config("crossover scan needs lo < hi and a positive step"));
    }
    let diff = |p: f64| -> Result<f64> { Ok(a.key_report(p)?.2.r_bps - b.key_report(p)?.2.r_bps) };
    let n = ((hi_dbm - lo_dbm) / step_db).ceil() as usize;
    let mut prev_p = lo_dbm;
    let mut prev = diff(prev_p)?;
    for i in 1..=n {
        let p = (lo_dbm + i as f64 * step_db).min(hi_dbm);
        let d = diff(p)?;
        if prev > 0.0 && d < 0.0 {
            let (mut lo, mut hi) = (prev_p, p);
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                if diff(mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        prev_p = p;
        prev = d;
    }
    Err(Error::NotFound(format!(
        "no key-rate crossover between {lo_dbm} and {hi_dbm} dBm"
    )))
}

/// Lowest launch power in `[lo_dbm, hi_dbm]` at which the key rate is zero.
pub fn keyrate_cutoff(scenario: &Scenario, lo_dbm: f64, hi_dbm: f64) -> Result<f64> {
    let key = |p: f64| -> Result<f64> { Ok(scenario.key_report(p)?.2.r_bps) };
    if key(lo_dbm)? <= 0.0 {
        return Err(Error::NotFound(format!(
            "key rate already zero at {lo_dbm} dBm"
        )));
    }
    if key(hi_dbm)? > 0.0 {
        return Err(Error::NotFound(format!(
            "key rate still positive at {hi_dbm} dBm"
        )));
    }
    let (mut lo, mut hi) = (lo_dbm, hi_dbm);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if key(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanObjective {
    /// Highest key rate among FEC-passing points, ties toward lower power.
    #[default]
    MaxKeyRate,
    /// Lowest classical BER among points that also carry a key, then highest key rate.
    ClassicalFirst,
}

fn preference(objective: PlanObjective, a: &PlanPoint, b: &PlanPoint) -> std::cmp::Ordering {
    let by_key = b.key_bps.total_cmp(&a.key_bps);
    let by_power = a
        .power_dbm
        .total_cmp(&b.power_dbm)
        .then(a.distance_km.total_cmp(&b.distance_km));
    match objective {
        PlanObjective::MaxKeyRate => by_key.then(by_power),
        PlanObjective::ClassicalFirst => {
            a.ber_raw.total_cmp(&b.ber_raw).then(by_key).then(by_power)
        }
    }
}

/// Evaluates every (distance, power) pair and picks the preferred feasible one.
pub fn joint_plan(
    scenario: &Scenario,
    distances: &[f64],
    powers: &[f64],
    objective: PlanObjective,
) -> Result<PlanReport> {
    if distances.is_empty() || powers.is_empty() {
        return Err(config(
            "joint plan needs non-empty distance and power grids",
        ));
    }
    let grid: Vec<_> = distances
        .iter()
        .flat_map(|&d| powers.iter().map(move |&p| (d, p)))
        .collect();
    let points = evaluate_all(scenario, &grid)?;
    let chosen = (0..points.len())
        .filter(|&i| points[i].feasible())
        .min_by(|&i, &j| preference(objective, &points[i], &points[j]));
    let diagnostics = match chosen {
        Some(_) => None,
        None => {
            let fec = points.iter().filter(|p| p.fec_pass).count();
            let key = points.iter().filter(|p| p.key_bps > 0.0).count();
            Some(format!(
                "{} points: {fec} pass FEC, {key} have a positive key rate, none both",
                points.len()
            ))
        }
    };
    Ok(PlanReport {
        points,
        chosen,
        diagnostics,
    })
}
