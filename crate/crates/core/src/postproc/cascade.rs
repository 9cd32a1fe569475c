//! Cascade reconciliation: shuffled-block parity comparison with binary
//! search and back-tracking into earlier passes.
//!
//! Alice's side is an in-process parity oracle that records every parity it
//! discloses; Bob's side corrects his copy. Each disclosed parity is one bit
//! of leakage, and a parity already disclosed is answered from the cache.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BitBlock;
use crate::error::{config, domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    pub passes: u32,
    /// First-pass block size is `ceil(block_factor / qber)`.
    pub block_factor: f64,
    pub shuffle_seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            passes: 4,
            block_factor: 0.73,
            shuffle_seed: 0,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.passes < 2 {
            return Err(config("cascade needs at least 2 passes"));
        }
        if !(self.block_factor > 0.0) {
            return Err(config("cascade block factor must be positive"));
        }
        Ok(())
    }

    /// First-pass block size for `n` bits at estimated error rate `qber`.
    pub fn initial_block(&self, qber: f64, n: usize) -> usize {
        let k = if qber > 0.0 {
            (self.block_factor / qber).ceil()
        } else {
            n as f64
        };
        (k.min(n as f64) as usize).max(2)
    }
}

/// One disclosed parity: pass, top-level block, and the sub-range
/// `[start, end)` of positions in that pass's order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParityRecord {
    pub pass: u32,
    pub block: usize,
    pub start: usize,
    pub end: usize,
    pub parity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeOutcome {
    pub corrected: BitBlock,
    pub leakage_bits: u64,
    pub transcript: Vec<ParityRecord>,
    pub flipped: usize,
    pub block_sizes: Vec<usize>,
}

struct Pass {
    order: Vec<usize>,
    position: Vec<usize>,
    block: usize,
}

struct AliceOracle<'a> {
    key: &'a BitBlock,
    cache: HashMap<(u32, usize, usize), bool>,
    transcript: Vec<ParityRecord>,
}

impl AliceOracle<'_> {
    fn parity(&mut self, pass: u32, p: &Pass, start: usize, end: usize) -> bool {
        if let Some(&v) = self.cache.get(&(pass, start, end)) {
            return v;
        }
        let v = self.key.parity_of(p.order[start..end].iter().copied());
        self.cache.insert((pass, start, end), v);
        self.transcript.push(ParityRecord {
            pass,
            block: start / p.block,
            start,
            end,
            parity: v,
        });
        v
    }
}

pub fn cascade_reconcile(
    alice: &BitBlock,
    bob: &BitBlock,
    qber_estimate: f64,
    cfg: &CascadeConfig,
) -> Result<CascadeOutcome> {
    cfg.validate()?;
    if alice.len() != bob.len() {
        return Err(domain(format!(
            "cascade inputs differ in length: {} vs {}",
            alice.len(),
            bob.len()
        )));
    }
    let n = alice.len();
    let mut bob = bob.clone();
    let mut oracle = AliceOracle {
        key: alice,
        cache: HashMap::new(),
        transcript: Vec::new(),
    };
    let mut passes: Vec<Pass> = Vec::new();
    let mut flipped = 0;
    if n == 0 {
        return Ok(CascadeOutcome {
            corrected: bob,
            leakage_bits: 0,
            transcript: Vec::new(),
            flipped,
            block_sizes: Vec::new(),
        });
    }
    let k1 = cfg.initial_block(qber_estimate, n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);

    for pass in 0..cfg.passes {
        let mut order: Vec<usize> = (0..n).collect();
        if pass > 0 {
            order.shuffle(&mut rng);
        }
        let mut position = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            position[i] = pos;
        }
        let block = k1.saturating_mul(1 << pass.min(40)).min(n);
        passes.push(Pass {
            order,
            position,
            block,
        });

        let p = &passes[pass as usize];
        let mut queue: Vec<(u32, usize)> = Vec::new();
        for b in 0..n.div_ceil(block) {
            let (s, e) = (b * block, ((b + 1) * block).min(n));
            let a = oracle.parity(pass, p, s, e);
            if a != bob.parity_of(p.order[s..e].iter().copied()) {
                queue.push((pass, b));
            }
        }

        while let Some((q, b)) = queue.pop() {
            let p = &passes[q as usize];
            let (mut s, mut e) = (b * p.block, ((b + 1) * p.block).min(n));
            let a = oracle.parity(q, p, s, e);
            if a == bob.parity_of(p.order[s..e].iter().copied()) {
                continue;
            }
            while e - s > 1 {
                let mid = s + (e - s) / 2;
                let a = oracle.parity(q, p, s, mid);
                if a != bob.parity_of(p.order[s..mid].iter().copied()) {
                    e = mid;
                } else {
                    s = mid;
                }
            }
            let bit = p.order[s];
            bob.flip(bit);
            flipped += 1;
            for (r, other) in passes.iter().enumerate() {
                if r as u32 != q {
                    queue.push((r as u32, other.position[bit] / other.block));
                }
            }
        }

        if oracle.transcript.len() > n {
            return Err(Error::Abort(format!(
                "cascade disclosed {} parities for {n} bits",
                oracle.transcript.len()
            )));
        }
    }

    Ok(CascadeOutcome {
        corrected: bob,
        leakage_bits: oracle.transcript.len() as u64,
        transcript: oracle.transcript,
        flipped,
        block_sizes: passes.iter().map(|p| p.block).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn noisy(n: usize, qber: f64, seed: u64) -> (BitBlock, BitBlock) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = BitBlock::random(n, &mut rng);
        let mut b = a.clone();
        let t = (qber * u32::MAX as f64) as u32;
        for i in 0..n {
            if rng.next_u32() < t {
                b.flip(i);
            }
        }
        (a, b)
    }

    #[test]
    fn identical_inputs_leak_block_parities() {
        let (a, _) = noisy(10_000, 0.0, 1);
        let out = cascade_reconcile(&a, &a, 0.02, &CascadeConfig::default()).unwrap();
        assert_eq!(out.corrected, a);
        let expected: usize = out
            .block_sizes
            .iter()
            .map(|k| 10_000usize.div_ceil(*k))
            .sum();
        assert_eq!(out.leakage_bits as usize, expected);
        assert_eq!(out.block_sizes, vec![37, 74, 148, 296]);
        assert_eq!(out.flipped, 0);
    }

    #[test]
    fn single_error_found_in_first_pass() {
        let (a, _) = noisy(1024, 0.0, 2);
        let mut b = a.clone();
        b.flip(700);
        let out = cascade_reconcile(&a, &b, 1.0 / 1024.0, &CascadeConfig::default()).unwrap();
        assert_eq!(out.corrected, a);
        assert_eq!(out.flipped, 1);
        let tops: usize = out.block_sizes.iter().map(|k| 1024usize.div_ceil(*k)).sum();
        let k1 = out.block_sizes[0];
        let extra = ((k1 as f64).log2().ceil()) as usize;
        let sub: Vec<_> = out
            .transcript
            .iter()
            .filter(|r| {
                let k = out.block_sizes[r.pass as usize];
                (r.start, r.end) != (r.block * k, ((r.block + 1) * k).min(1024))
            })
            .collect();
        assert!(sub.iter().all(|r| r.pass == 0));
        assert!(sub.len() <= extra);
        assert_eq!(out.leakage_bits as usize, tops + sub.len());
    }

    #[test]
    fn transcript_accounts_for_leakage() {
        let (a, b) = noisy(20_000, 0.03, 3);
        let out = cascade_reconcile(&a, &b, 0.03, &CascadeConfig::default()).unwrap();
        assert_eq!(out.transcript.len() as u64, out.leakage_bits);
        let mut seen = std::collections::HashSet::new();
        for r in &out.transcript {
            assert!(
                seen.insert((r.pass, r.start, r.end)),
                "parity disclosed twice"
            );
        }
        assert_eq!(out.corrected, a);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = BitBlock::zeros(10);
        let b = BitBlock::zeros(11);
        assert!(cascade_reconcile(&a, &b, 0.02, &CascadeConfig::default()).is_err());
        let cfg = CascadeConfig {
            passes: 1,
            ..CascadeConfig::default()
        };
        assert!(cascade_reconcile(&a, &a, 0.02, &cfg).is_err());
    }

    #[test]
    fn hopeless_error_rate_aborts() {
        let (a, b) = noisy(4096, 0.5, 4);
        let r = cascade_reconcile(&a, &b, 0.5, &CascadeConfig::default());
        assert!(matches!(r, Err(Error::Abort(_))));
    }
}
