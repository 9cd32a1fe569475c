//! Coherent M-QAM classical channels: frame and FEC throughput arithmetic and a
//! launch-power dependent SNR model with an amplified-noise floor and a cubic
//! nonlinear-interference term.
//!
//! Launch powers are total powers over all WDM channels; the per-channel power
//! is the total divided by the channel count.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{config, domain, Error, Result};
use crate::units::{db_per_km_to_per_km, dbm_to_w, w_to_dbm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QamFormat {
    pub m: u32,
    pub baud_ghz: f64,
    pub polarizations: u32,
}

impl QamFormat {
    pub fn qam16() -> Self {
        QamFormat {
            m: 16,
            baud_ghz: 28.0,
            polarizations: 2,
        }
    }

    pub fn qam64() -> Self {
        QamFormat {
            m: 64,
            baud_ghz: 28.0,
            polarizations: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.m, 16 | 64) {
            return Err(config(format!("unsupported QAM order {}", self.m)));
        }
        if !(self.baud_ghz > 0.0) || self.polarizations == 0 {
            return Err(config("baud rate and polarization count must be positive"));
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.m.trailing_zeros()
    }

    pub fn gross_bps(&self) -> f64 {
        self.baud_ghz * 1e9 * f64::from(self.bits_per_symbol()) * f64::from(self.polarizations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub preamble_symbols: u64,
    pub data_symbols: u64,
    pub pilots_per_block: u64,
    pub block_symbols: u64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            preamble_symbols: 4696,
            data_symbols: 102_400,
            pilots_per_block: 2,
            block_symbols: 512,
        }
    }
}

impl FrameSpec {
    pub fn pilot_symbols(&self) -> u64 {
        self.data_symbols / self.block_symbols * self.pilots_per_block
    }

    pub fn payload_symbols(&self) -> u64 {
        self.data_symbols - self.pilot_symbols()
    }

    /// `(payload, total)` symbol counts per frame.
    pub fn efficiency_ratio(&self) -> (u64, u64) {
        (
            self.payload_symbols(),
            self.preamble_symbols + self.data_symbols,
        )
    }

    pub fn efficiency(&self) -> f64 {
        let (p, t) = self.efficiency_ratio();
        p as f64 / t as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_symbols == 0 || self.data_symbols == 0 {
            return Err(config("frame needs non-zero data and block sizes"));
        }
        if self.pilot_symbols() >= self.data_symbols {
            return Err(config("pilots exhaust the data symbols"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FecKind {
    Hard7,
    Soft20,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FecSpec {
    pub kind: FecKind,
    pub ber_threshold: f64,
    pub overhead: f64,
}

impl FecSpec {
    pub fn hard7() -> Self {
        FecSpec {
            kind: FecKind::Hard7,
            ber_threshold: 4.5e-3,
            overhead: 0.07,
        }
    }

    pub fn soft20() -> Self {
        FecSpec {
            kind: FecKind::Soft20,
            ber_threshold: 2.4e-2,
            overhead: 0.20,
        }
    }

    pub fn of_kind(kind: FecKind) -> Self {
        match kind {
            FecKind::Hard7 => Self::hard7(),
            FecKind::Soft20 => Self::soft20(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FecVerdict {
    Pass,
    Fail,
}

impl FecVerdict {
    pub fn passed(self) -> bool {
        self == FecVerdict::Pass
    }
}

/// Post-FEC BER assumed for a passing frame.
pub const POST_FEC_BER: f64 = 1e-15;

pub fn fec_gate(ber_raw: f64, fec: &FecSpec) -> FecVerdict {
    if ber_raw <= fec.ber_threshold {
        FecVerdict::Pass
    } else {
        FecVerdict::Fail
    }
}

pub fn net_throughput(qam: &QamFormat, frame: &FrameSpec, fec: &FecSpec, n_channels: u32) -> f64 {
    qam.gross_bps() * frame.efficiency() / (1.0 + fec.overhead) * f64::from(n_channels)
}

/// Rounds to `digits` significant figures.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalLinkModel {
    pub n_channels: u32,
    /// Nominal total launch power.
    pub channel_power_dbm: f64,
    /// Per-channel amplified noise referred to the transmitter, for a lossless span.
    pub ase_power_w: f64,
    /// Nonlinear interference per unit effective length, 1/(W^2 km).
    pub nli_coeff: f64,
    pub wdm_loss_db: f64,
    pub fiber_atten_db_per_km: f64,
}

impl ClassicalLinkModel {
    pub fn uncalibrated(n_channels: u32, wdm_loss_db: f64) -> Self {
        ClassicalLinkModel {
            n_channels,
            channel_power_dbm: 0.0,
            ase_power_w: 0.0,
            nli_coeff: 0.0,
            wdm_loss_db,
            fiber_atten_db_per_km: 0.2,
        }
    }

    pub fn is_calibrated(&self) -> bool {
        self.ase_power_w > 0.0 && self.ase_power_w.is_finite() && self.nli_coeff >= 0.0
    }

    fn per_channel_w(&self, total_dbm: f64) -> f64 {
        dbm_to_w(total_dbm) / f64::from(self.n_channels.max(1))
    }

    fn span_gain(&self, length_km: f64) -> f64 {
        10f64.powf((self.fiber_atten_db_per_km * length_km + self.wdm_loss_db) / 10.0)
    }

    fn effective_length(&self, length_km: f64) -> f64 {
        let a = db_per_km_to_per_km(self.fiber_atten_db_per_km);
        -(-a * length_km).exp_m1() / a
    }

    /// Noise floor and nonlinear coefficient at `length_km`.
    pub fn noise_terms(&self, length_km: f64) -> (f64, f64) {
        (
            self.ase_power_w * self.span_gain(length_km),
            self.nli_coeff * self.effective_length(length_km),
        )
    }

    /// Total launch power maximising the SNR.
    pub fn optimum_launch_dbm(&self, length_km: f64) -> Result<f64> {
        if !self.is_calibrated() || self.nli_coeff == 0.0 {
            return Err(config(
                "optimum launch power needs a calibrated nonlinear model",
            ));
        }
        let (ase, kappa) = self.noise_terms(length_km);
        let p = (ase / (2.0 * kappa)).cbrt();
        Ok(w_to_dbm(p * f64::from(self.n_channels.max(1))))
    }
}

/// Per-symbol SNR of one channel when `p_launch_dbm` is launched in total.
pub fn effective_snr(model: &ClassicalLinkModel, p_launch_dbm: f64, length_km: f64) -> Result<f64> {
    if !model.is_calibrated() {
        return Err(config("classical link model is not calibrated"));
    }
    if !(length_km >= 0.0) {
        return Err(domain(format!("negative length {length_km} km")));
    }
    let p = model.per_channel_w(p_launch_dbm);
    let (ase, kappa) = model.noise_terms(length_km);
    Ok(p / (ase + kappa * p * p * p))
}

fn qam_prefactor(m: u32) -> Result<(f64, f64)> {
    if !matches!(m, 4 | 16 | 64 | 256) {
        return Err(config(format!("unsupported QAM order {m}")));
    }
    let mf = f64::from(m);
    let k = f64::from(m.trailing_zeros());
    Ok((2.0 / k * (1.0 - 1.0 / mf.sqrt()), 3.0 / (2.0 * (mf - 1.0))))
}

/// Gray-coded square-QAM BER approximation.
pub fn qam_ber(snr_per_symbol: f64, m: u32) -> Result<f64> {
    if !(snr_per_symbol >= 0.0) {
        return Err(domain(format!("negative SNR {snr_per_symbol}")));
    }
    let (a, c) = qam_prefactor(m)?;
    Ok((a * erfc((c * snr_per_symbol).sqrt())).clamp(0.0, 0.5))
}

/// Inverse of [`qam_ber`] on its unclamped range.
pub fn ber_to_snr(ber: f64, m: u32) -> Result<f64> {
    let (a, c) = qam_prefactor(m)?;
    let y = ber / a;
    if !(y > 0.0 && y < 1.0) {
        return Err(domain(format!(
            "BER {ber} outside the invertible range for {m}-QAM"
        )));
    }
    let x = erfc_inv(y);
    Ok(x * x / c)
}

/// Calibration constraint for [`calibrate_classical`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassicalAnchor {
    /// The SNR is maximal at this total launch power.
    OptimumPower { length_km: f64, total_dbm: f64 },
    /// Measured raw BER of `m`-QAM at this total launch power.
    Ber {
        length_km: f64,
        total_dbm: f64,
        ber: f64,
        m: u32,
    },
}

/// Least-squares fit of `ase_power_w` and `nli_coeff`.
///
/// Each anchor is linear in the two unknowns: a BER anchor fixes
/// `1/SNR = ase*G/P + nli*Le*P^2` and an optimum anchor fixes
/// `ase*G = 2*nli*Le*P^3`.
pub fn calibrate_classical(
    model: &ClassicalLinkModel,
    anchors: &[ClassicalAnchor],
) -> Result<ClassicalLinkModel> {
    let mut rows: Vec<([f64; 2], f64)> = Vec::with_capacity(anchors.len());
    for anch in anchors {
        match *anch {
            ClassicalAnchor::OptimumPower {
                length_km,
                total_dbm,
            } => {
                let p = model.per_channel_w(total_dbm);
                let g = model.span_gain(length_km);
                let le = model.effective_length(length_km);
                rows.push(([1.0, -2.0 * le * p * p * p / g], 0.0));
            }
            ClassicalAnchor::Ber {
                length_km,
                total_dbm,
                ber,
                m,
            } => {
                let snr = ber_to_snr(ber, m)
                    .map_err(|e| Error::Calibration(format!("BER anchor: {e}")))?;
                let p = model.per_channel_w(total_dbm);
                let g = model.span_gain(length_km);
                let le = model.effective_length(length_km);
                rows.push(([g / p * snr, le * p * p * snr], 1.0));
            }
        }
    }
    if rows.iter().all(|r| r.1 == 0.0) {
        return Err(Error::Calibration(
            "anchors fix only ratios; at least one BER anchor is required".into(),
        ));
    }
    // Column scaling keeps the 2x2 normal equations well conditioned.
    let scale: [f64; 2] = std::array::from_fn(|j| {
        rows.iter()
            .map(|r| r.0[j].abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    });
    let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, y) in &rows {
        let (x0, x1) = (a[0] / scale[0], a[1] / scale[1]);
        // Unit rows weight every anchor equally.
        let w = x0.hypot(x1);
        if !(w > 0.0) {
            continue;
        }
        let (x0, x1, y) = (x0 / w, x1 / w, y / w);
        s00 += x0 * x0;
        s01 += x0 * x1;
        s11 += x1 * x1;
        t0 += x0 * y;
        t1 += x1 * y;
    }
    let det = s00 * s11 - s01 * s01;
    if !(det.abs() > 1e-12 * (s00 * s11).max(f64::MIN_POSITIVE)) {
        return Err(Error::Calibration(
            "classical anchors are underdetermined".into(),
        ));
    }
    let ase = (s11 * t0 - s01 * t1) / det / scale[0];
    let nli = (s00 * t1 - s01 * t0) / det / scale[1];
    if !(ase > 0.0) || !(nli >= 0.0) {
        return Err(Error::Calibration(format!(
            "anchors imply unphysical parameters (ase={ase:.3e} W, nli={nli:.3e})"
        )));
    }
    Ok(ClassicalLinkModel {
        ase_power_w: ase,
        nli_coeff: nli,
        ..model.clone()
    })
}
