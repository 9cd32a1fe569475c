use rand::RngCore;
use serde::Serialize;

/// Packed bit string; bit `i` lives in word `i / 64` at position `i % 64`.
/// Bits past `len` in the last word are always zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct BitBlock {
    words: Vec<u64>,
    len: usize,
}

impl BitBlock {
    pub fn zeros(len: usize) -> Self {
        BitBlock {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut b = Self::zeros(bits.len());
        for (i, &v) in bits.iter().enumerate() {
            if v {
                b.words[i / 64] |= 1 << (i % 64);
            }
        }
        b
    }

    /// Lowest `len` bits of `value`, least significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut b = Self::zeros(len);
        if len > 0 {
            b.words[0] = value;
            b.clear_tail();
        }
        b
    }

    /// Bit `i` is bit `i % 8` of byte `i / 8`.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        assert!(len <= bytes.len() * 8);
        let mut b = Self::zeros(len);
        for (i, &byte) in bytes.iter().enumerate().take(len.div_ceil(8)) {
            b.words[i / 8] |= u64::from(byte) << (8 * (i % 8));
        }
        b.clear_tail();
        b
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut b = Self::zeros(len);
        for w in &mut b.words {
            *w = rng.next_u64();
        }
        b.clear_tail();
        b
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn push(&mut self, v: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn parity(&self) -> bool {
        self.words.iter().fold(0, |acc, w| acc ^ w.count_ones()) & 1 == 1
    }

    /// Parity of the bits at `indices`.
    pub fn parity_of<I: IntoIterator<Item = usize>>(&self, indices: I) -> bool {
        indices.into_iter().fold(false, |acc, i| acc ^ self.get(i))
    }

    pub fn xor(&self, other: &BitBlock) -> BitBlock {
        assert_eq!(self.len, other.len, "xor of blocks with different lengths");
        BitBlock {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
        }
    }

    pub fn hamming_distance(&self, other: &BitBlock) -> usize {
        self.xor(other).count_ones()
    }

    /// 64 bits starting at `pos`, zero-filled past the end.
    pub fn window64(&self, pos: usize) -> u64 {
        let (w, s) = (pos / 64, pos % 64);
        let lo = self.words.get(w).copied().unwrap_or(0);
        if s == 0 {
            return lo;
        }
        let hi = self.words.get(w + 1).copied().unwrap_or(0);
        lo >> s | hi << (64 - s)
    }

    pub fn slice(&self, start: usize, end: usize) -> BitBlock {
        assert!(start <= end && end <= self.len);
        let len = end - start;
        let mut b = BitBlock {
            words: (0..len.div_ceil(64))
                .map(|k| self.window64(start + 64 * k))
                .collect(),
            len,
        };
        b.clear_tail();
        b
    }

    pub fn reversed(&self) -> BitBlock {
        let bits: Vec<bool> = (0..self.len).rev().map(|i| self.get(i)).collect();
        BitBlock::from_bools(&bits)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Little-endian packing matching [`BitBlock::from_bytes`].
    pub fn to_bytes(&self) -> Vec<u8> {
        self.words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(self.len.div_ceil(8))
            .collect()
    }
}
