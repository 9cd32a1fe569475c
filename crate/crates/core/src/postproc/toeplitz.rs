//! Privacy amplification by Toeplitz hashing over GF(2).

use rand::RngCore;
use serde::Serialize;

use super::BitBlock;
use crate::error::{domain, Result};

/// Diagonals of an `m x n` Toeplitz matrix: `T[i][j] = bits[i - j + n - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToeplitzSeed {
    bits: BitBlock,
    n: usize,
    m: usize,
}

impl ToeplitzSeed {
    pub fn new(bits: BitBlock, n: usize, m: usize) -> Result<Self> {
        if m > n {
            return Err(domain(format!(
                "output length {m} exceeds input length {n}"
            )));
        }
        let want = (n + m).saturating_sub(1);
        if bits.len() != want {
            return Err(domain(format!(
                "Toeplitz seed for {m}x{n} needs {want} bits, got {}",
                bits.len()
            )));
        }
        Ok(ToeplitzSeed { bits, n, m })
    }

    pub fn random<R: RngCore + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Self> {
        Self::new(BitBlock::random((n + m).saturating_sub(1), rng), n, m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bits(&self) -> &BitBlock {
        &self.bits
    }

    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.bits.get(i + self.n - 1 - j)
    }

    /// Dense rows, for checks against a plain matrix-vector product.
    pub fn matrix(&self) -> Vec<Vec<bool>> {
        (0..self.m)
            .map(|i| (0..self.n).map(|j| self.entry(i, j)).collect())
            .collect()
    }
}

/// Plain GF(2) product of dense `rows` with `x`.
pub fn gf2_matvec(rows: &[Vec<bool>], x: &[bool]) -> Vec<bool> {
    rows.iter()
        .map(|r| {
            assert_eq!(r.len(), x.len(), "matrix width differs from vector length");
            r.iter().zip(x).fold(false, |acc, (&a, &b)| acc ^ (a & b))
        })
        .collect()
}

/// `y = T x` over GF(2).
///
/// Row `i` of `T` read left to right is the reversed seed starting at
/// offset `m - 1 - i`, so each output bit is the parity of `x` AND a
/// 64-bit-aligned window of the reversed seed.
pub fn toeplitz_hash(input: &BitBlock, seed: &ToeplitzSeed) -> Result<BitBlock> {
    if input.len() != seed.n {
        return Err(domain(format!(
            "input has {} bits, seed expects {}",
            input.len(),
            seed.n
        )));
    }
    let rev = seed.bits.reversed();
    let xw = input.words();
    let mut out = BitBlock::zeros(seed.m);
    for i in 0..seed.m {
        let off = seed.m - 1 - i;
        let acc = xw
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &w)| acc ^ (w & rev.window64(off + 64 * k)));
        if acc.count_ones() & 1 == 1 {
            out.set(i, true);
        }
    }
    Ok(out)
}
