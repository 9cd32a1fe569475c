//! Analytic decoy-state BB84 key rate: gain and QBER model, vacuum plus weak
//! decoy bounds on the single-photon contribution, finite-block fluctuation
//! shifts and the secure key rate per clock cycle.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// Intensities and sending probabilities of the decoy protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoyProtocol {
    pub mu: f64,
    pub nu: f64,
    pub p_signal: f64,
    pub p_decoy: f64,
    pub p_vacuum: f64,
    pub basis_match_prob: f64,
}

impl Default for DecoyProtocol {
    fn default() -> Self {
        DecoyProtocol {
            mu: 0.6,
            nu: 0.2,
            p_signal: 0.75,
            p_decoy: 0.125,
            p_vacuum: 0.125,
            basis_match_prob: 0.5,
        }
    }
}

impl DecoyProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < self.mu) {
            return Err(config(format!(
                "decoy intensities need 0 < nu < mu, got mu={} nu={}",
                self.mu, self.nu
            )));
        }
        let ps = [self.p_signal, self.p_decoy, self.p_vacuum];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(config("sending probabilities must lie in [0, 1]"));
        }
        if (ps.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(config("sending probabilities must sum to 1"));
        }
        if !(self.basis_match_prob > 0.0 && self.basis_match_prob <= 1.0) {
            return Err(config("basis_match_prob must be in (0, 1]"));
        }
        Ok(())
    }

    /// Fraction of pulses contributing to the key: signal states in matched bases.
    pub fn sifting_factor(&self) -> f64 {
        self.p_signal * self.basis_match_prob
    }
}

/// System constants of the QKD link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QkdSystemSpec {
    pub clock_hz: f64,
    pub e_opt: f64,
    pub f_ec: f64,
    /// Detection events per parameter-estimation block.
    pub block_size: u64,
    pub n_sigma: f64,
    pub bob_loss_db: f64,
}

impl Default for QkdSystemSpec {
    fn default() -> Self {
        QkdSystemSpec {
            clock_hz: 625e6,
            e_opt: 0.005,
            f_ec: 1.25,
            block_size: 1_000_000,
            n_sigma: 5.0,
            bob_loss_db: 3.0,
        }
    }
}

impl QkdSystemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz > 0.0) {
            return Err(config("clock_hz must be positive"));
        }
        if !(0.0..=0.5).contains(&self.e_opt) {
            return Err(config(format!(
                "e_opt must be in [0, 0.5], got {}",
                self.e_opt
            )));
        }
        if !(self.f_ec >= 1.0) {
            return Err(config(format!("f_ec must be >= 1, got {}", self.f_ec)));
        }
        if self.block_size == 0 {
            return Err(config("block_size must be positive"));
        }
        if !(self.n_sigma >= 0.0) {
            return Err(config("n_sigma must be non-negative"));
        }
        if !(self.bob_loss_db >= 0.0) {
            return Err(config("bob_loss_db must be non-negative"));
        }
        Ok(())
    }
}

/// Measured or modelled gains and error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelObservables {
    pub q_mu: f64,
    pub q_nu: f64,
    pub e_mu: f64,
    pub e_nu: f64,
    /// Background yield, used where a larger value is the conservative choice.
    pub y0: f64,
    /// Background yield, used where a smaller value is the conservative choice.
    pub y0_lower: f64,
    pub eta: f64,
}

/// Single-photon and vacuum estimates from the decoy analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoyBounds {
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub q1: f64,
    pub q0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub q1: f64,
    pub q0: f64,
    /// Signal gain and QBER entering the error-correction term.
    pub q_mu: f64,
    pub e_mu: f64,
    /// Unclamped rate per clock cycle; may be negative.
    pub r_per_pulse: f64,
    pub r_bps: f64,
    pub secure: bool,
    pub estimation_failed: bool,
    /// Fewer detections than one estimation block were available.
    pub insufficient_block: bool,
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!(
            "binary entropy argument {x} outside [0, 1]"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

fn h2(x: f64) -> f64 {
    binary_entropy(x.clamp(0.0, 1.0)).unwrap_or(0.0)
}

/// Gain and QBER of a weak coherent source of mean photon number `mu`.
pub fn gain_and_qber(mu: f64, eta: f64, y0: f64, e_opt: f64) -> Result<(f64, f64)> {
    if !(mu >= 0.0) || !(0.0..=1.0).contains(&eta) || !(0.0..=1.0).contains(&y0) {
        return Err(domain(format!(
            "invalid gain inputs mu={mu} eta={eta} y0={y0}"
        )));
    }
    if !(0.0..=0.5).contains(&e_opt) {
        return Err(domain(format!("e_opt {e_opt} outside [0, 0.5]")));
    }
    let signal = -(-eta * mu).exp_m1();
    let q = y0 + (1.0 - y0) * signal;
    if q <= 0.0 {
        return Err(Error::UndefinedQber);
    }
    let e = (0.5 * y0 + e_opt * (1.0 - y0) * signal) / q;
    Ok((q, e))
}

/// Asymptotic observables of the Poissonian channel model.
pub fn model_observables(
    proto: &DecoyProtocol,
    eta: f64,
    y0: f64,
    e_opt: f64,
) -> Result<ChannelObservables> {
    let (q_mu, e_mu) = gain_and_qber(proto.mu, eta, y0, e_opt)?;
    let (q_nu, e_nu) = gain_and_qber(proto.nu, eta, y0, e_opt)?;
    Ok(ChannelObservables {
        q_mu,
        q_nu,
        e_mu,
        e_nu,
        y0,
        y0_lower: y0,
        eta,
    })
}

/// Vacuum plus weak decoy lower bound on Y1 and upper bound on e1.
///
/// Returns [`Error::EstimationFailed`] when the yield bound is not positive.
pub fn decoy_bounds(obs: &ChannelObservables, proto: &DecoyProtocol) -> Result<DecoyBounds> {
    let (mu, nu) = (proto.mu, proto.nu);
    if !(nu > 0.0 && nu < mu) {
        return Err(domain(format!(
            "decoy bounds need 0 < nu < mu, got {mu}, {nu}"
        )));
    }
    let y1 = mu / (mu * nu - nu * nu)
        * (obs.q_nu * nu.exp()
            - obs.q_mu * mu.exp() * nu * nu / (mu * mu)
            - (mu * mu - nu * nu) / (mu * mu) * obs.y0);
    if !(y1 > 0.0) {
        return Err(Error::EstimationFailed(format!(
            "single-photon yield bound {y1:.3e} is not positive"
        )));
    }
    let y1 = y1.min(1.0);
    let e1 = ((obs.e_nu * obs.q_nu * nu.exp() - 0.5 * obs.y0_lower) / (y1 * nu)).clamp(0.0, 0.5);
    Ok(DecoyBounds {
        y1_lower: y1,
        e1_upper: e1,
        q1: y1 * mu * (-mu).exp(),
        q0: obs.y0_lower * (-mu).exp(),
    })
}

/// `x` shifted by `n_sigma` standard deviations of a rate estimated from `n` trials.
pub fn fluctuation_shift(x: f64, n: f64, n_sigma: f64, upward: bool) -> f64 {
    if !(x > 0.0) || !(n > 0.0) {
        return x.max(0.0);
    }
    let d = n_sigma * (x / n).sqrt();
    if upward {
        x + d
    } else {
        (x - d).max(0.0)
    }
}

/// Pulse counts per intensity (signal, decoy, vacuum) spent on one estimation block.
pub fn block_pulse_counts(
    obs: &ChannelObservables,
    proto: &DecoyProtocol,
    spec: &QkdSystemSpec,
) -> [f64; 3] {
    let q_avg = proto.p_signal * obs.q_mu + proto.p_decoy * obs.q_nu + proto.p_vacuum * obs.y0;
    let total = if q_avg > 0.0 {
        spec.block_size as f64 / q_avg
    } else {
        f64::INFINITY
    };
    [
        proto.p_signal * total,
        proto.p_decoy * total,
        proto.p_vacuum * total,
    ]
}

/// Worst-case observables for explicit pulse counts `[n_mu, n_nu, n_vacuum]`.
pub fn fluctuation_adjust_counts(
    obs: &ChannelObservables,
    counts: [f64; 3],
    n_sigma: f64,
) -> ChannelObservables {
    if n_sigma == 0.0 {
        return *obs;
    }
    let [n_mu, n_nu, n_vac] = counts;
    let q_mu = fluctuation_shift(obs.q_mu, n_mu, n_sigma, true).min(1.0);
    let q_nu = fluctuation_shift(obs.q_nu, n_nu, n_sigma, false);
    let eq_mu = fluctuation_shift(obs.e_mu * obs.q_mu, n_mu, n_sigma, true);
    let eq_nu = fluctuation_shift(obs.e_nu * obs.q_nu, n_nu, n_sigma, true);
    let e_mu = if obs.q_mu > 0.0 {
        (eq_mu / obs.q_mu).min(0.5)
    } else {
        0.5
    };
    let e_nu = if q_nu > 0.0 {
        (eq_nu / q_nu).min(0.5)
    } else {
        0.5
    };
    ChannelObservables {
        q_mu,
        q_nu,
        e_mu,
        e_nu,
        y0: fluctuation_shift(obs.y0, n_vac, n_sigma, true).min(1.0),
        y0_lower: fluctuation_shift(obs.y0_lower, n_vac, n_sigma, false),
        eta: obs.eta,
    }
}

/// Worst-case observables for one block of `spec.block_size` detections.
pub fn fluctuation_adjust(
    obs: &ChannelObservables,
    proto: &DecoyProtocol,
    spec: &QkdSystemSpec,
) -> ChannelObservables {
    fluctuation_adjust_counts(obs, block_pulse_counts(obs, proto, spec), spec.n_sigma)
}

/// Secure key rate for the given (possibly already adjusted) observables.
pub fn secure_key_rate(
    obs: &ChannelObservables,
    proto: &DecoyProtocol,
    spec: &QkdSystemSpec,
) -> Result<KeyRateReport> {
    let failed = |obs: &ChannelObservables| KeyRateReport {
        y1_lower: 0.0,
        e1_upper: 0.5,
        q1: 0.0,
        q0: 0.0,
        q_mu: obs.q_mu,
        e_mu: obs.e_mu,
        r_per_pulse: 0.0,
        r_bps: 0.0,
        secure: false,
        estimation_failed: true,
        insufficient_block: false,
    };
    let b = match decoy_bounds(obs, proto) {
        Ok(b) => b,
        Err(Error::EstimationFailed(_)) => return Ok(failed(obs)),
        Err(e) => return Err(e),
    };
    let r = proto.sifting_factor()
        * (-obs.q_mu * spec.f_ec * h2(obs.e_mu) + b.q1 * (1.0 - h2(b.e1_upper)) + b.q0);
    Ok(KeyRateReport {
        y1_lower: b.y1_lower,
        e1_upper: b.e1_upper,
        q1: b.q1,
        q0: b.q0,
        q_mu: obs.q_mu,
        e_mu: obs.e_mu,
        r_per_pulse: r,
        r_bps: r.max(0.0) * spec.clock_hz,
        secure: r > 0.0,
        estimation_failed: false,
        insufficient_block: false,
    })
}

/// Finite-block key rate: [`fluctuation_adjust`] followed by [`secure_key_rate`].
pub fn analyze(
    obs: &ChannelObservables,
    proto: &DecoyProtocol,
    spec: &QkdSystemSpec,
) -> Result<KeyRateReport> {
    secure_key_rate(&fluctuation_adjust(obs, proto, spec), proto, spec)
}
