//! Post-processing of sifted keys: reconciliation, verification, privacy
//! amplification and message authentication.

pub mod auth;
mod bits;
pub mod cascade;
pub mod crc;
pub mod toeplitz;

pub use auth::{SessionAuthenticator, Tag};
pub use bits::BitBlock;
pub use cascade::{cascade_reconcile, CascadeConfig, CascadeOutcome, ParityRecord};
pub use crc::crc_verify;
pub use toeplitz::{toeplitz_hash, ToeplitzSeed};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::KeyRateReport;

/// Bits subtracted from every final key for verification and estimation residuals.
pub const DEFAULT_SECURITY_MARGIN: u64 = 64;

/// Final key length for `n_sifted` reconciled bits.
///
/// `m = floor(n * (Q1 (1 - H(e1)) + Q0) / Q_mu - leakage - margin)`, clamped at zero.
pub fn compute_final_length(
    n_sifted: usize,
    report: &KeyRateReport,
    leakage_bits: u64,
    security_margin: u64,
) -> usize {
    if !report.secure || !(report.q_mu > 0.0) {
        return 0;
    }
    let h = crate::keyrate::binary_entropy(report.e1_upper.clamp(0.0, 1.0)).unwrap_or(1.0);
    let secret = n_sifted as f64 * (report.q1 * (1.0 - h) + report.q0) / report.q_mu;
    let m = (secret - leakage_bits as f64 - security_margin as f64).floor();
    if m > 0.0 {
        (m as usize).min(n_sifted)
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocConfig {
    pub cascade: CascadeConfig,
    pub security_margin: u64,
    pub tag_bits: usize,
    /// Seeds the Toeplitz matrix and the simulated pre-shared authentication key.
    pub seed: u64,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        PostprocConfig {
            cascade: CascadeConfig::default(),
            security_margin: DEFAULT_SECURITY_MARGIN,
            tag_bits: auth::DEFAULT_TAG_BITS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub postproc_seed: u64,
    pub shuffle_seed: u64,
    pub toeplitz_seed_crc: u32,
    pub config_digest: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalKeyRecord {
    pub key: BitBlock,
    pub leakage_bits: u64,
    pub verified: bool,
    pub m: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostprocOutcome {
    pub alice: FinalKeyRecord,
    pub bob: FinalKeyRecord,
    pub transcript: Vec<ParityRecord>,
    pub corrected_bits: usize,
    /// Leakage relative to `n H(qber)` for the true error rate.
    pub efficiency: f64,
    pub residual_errors: usize,
}

/// Verification message: both CRC values and the agreed output length.
fn verification_message(crc_a: u32, crc_b: u32, m: usize) -> BitBlock {
    let mut msg = BitBlock::from_u64(u64::from(crc_a) | u64::from(crc_b) << 32, 64);
    for i in 0..32 {
        msg.push((m as u64) >> i & 1 == 1);
    }
    msg
}

/// Cascade, CRC check, authenticated agreement on the output length and
/// Toeplitz hashing with a shared random seed.
///
/// Unverified runs return records with `verified = false` and empty keys.
pub fn run_postprocessing(
    alice: &BitBlock,
    bob: &BitBlock,
    qber_estimate: f64,
    report: &KeyRateReport,
    cfg: &PostprocConfig,
) -> Result<PostprocOutcome> {
    let cas = cascade_reconcile(alice, bob, qber_estimate, &cfg.cascade)?;
    let n = alice.len();
    let verified = crc_verify(alice, &cas.corrected);
    let m = if verified {
        compute_final_length(n, report, cas.leakage_bits, cfg.security_margin)
    } else {
        0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let msg_bits = 96;
    let auth_key = BitBlock::random(msg_bits + 3 * cfg.tag_bits, &mut rng);
    let mut auth_a = SessionAuthenticator::new(&auth_key, msg_bits, cfg.tag_bits)?;
    let mut auth_b = SessionAuthenticator::new(&auth_key, msg_bits, cfg.tag_bits)?;
    let msg = verification_message(crc::block_crc(alice), crc::block_crc(&cas.corrected), m);
    let tag = auth_a.authenticate(&msg)?;
    if !auth_b.verify(&msg, &tag)? {
        return Err(Error::Abort(
            "verification message failed authentication".into(),
        ));
    }

    let seed = ToeplitzSeed::random(n, m, &mut rng)?;
    let (ka, kb) = if verified && m > 0 {
        (
            toeplitz_hash(alice, &seed)?,
            toeplitz_hash(&cas.corrected, &seed)?,
        )
    } else {
        (BitBlock::default(), BitBlock::default())
    };
    let provenance = Provenance {
        postproc_seed: cfg.seed,
        shuffle_seed: cfg.cascade.shuffle_seed,
        toeplitz_seed_crc: crc::block_crc(seed.bits()),
        config_digest: crc::crc32(format!("{cfg:?}").as_bytes()),
    };
    let record = |key: BitBlock| FinalKeyRecord {
        key,
        leakage_bits: cas.leakage_bits,
        verified,
        m: if verified { m } else { 0 },
        provenance: provenance.clone(),
    };
    let errors = alice.hamming_distance(bob);
    let ideal = n as f64 * crate::keyrate::binary_entropy(errors as f64 / n.max(1) as f64)?;
    Ok(PostprocOutcome {
        alice: record(ka),
        bob: record(kb),
        corrected_bits: cas.flipped,
        efficiency: if ideal > 0.0 {
            cas.leakage_bits as f64 / ideal
        } else {
            f64::INFINITY
        },
        residual_errors: alice.hamming_distance(&cas.corrected),
        transcript: cas.transcript,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(secure: bool) -> KeyRateReport {
        KeyRateReport {
            y1_lower: 1e-3,
            e1_upper: 0.02,
            q1: 3e-4,
            q0: 1e-6,
            q_mu: 7e-4,
            e_mu: 0.017,
            r_per_pulse: 1e-5,
            r_bps: 1e4,
            secure,
            estimation_failed: false,
            insufficient_block: false,
        }
    }

    #[test]
    fn final_length_clamps() {
        assert_eq!(compute_final_length(1_000_000, &report(false), 0, 64), 0);
        assert_eq!(compute_final_length(1000, &report(true), 1000, 64), 0);
        let m = compute_final_length(1_000_000, &report(true), 100_000, 64);
        let h = crate::keyrate::binary_entropy(0.02).unwrap();
        let want = (1e6 * (3e-4 * (1.0 - h) + 1e-6) / 7e-4 - 100_064.0).floor() as usize;
        assert_eq!(m, want);
    }
}
