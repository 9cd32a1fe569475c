//! Wegman-Carter style authenticator on a pre-shared key: a Toeplitz hash of
//! the message XOR a fresh one-time pad segment per tag.

use serde::Serialize;

use super::toeplitz::{toeplitz_hash, ToeplitzSeed};
use super::BitBlock;
use crate::error::{config, domain, Error, Result};

pub const DEFAULT_TAG_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Tag {
    /// Index of the pad segment that masked this tag.
    pub segment: usize,
    pub bits: BitBlock,
}

/// One party's view of the shared authentication key.
///
/// The first `n + t - 1` key bits seed the hash; the rest is cut into
/// `t`-bit pads, each usable once.
#[derive(Debug, Clone)]
pub struct SessionAuthenticator {
    seed: ToeplitzSeed,
    pads: BitBlock,
    tag_bits: usize,
    used: Vec<bool>,
    next: usize,
}

impl SessionAuthenticator {
    pub fn new(auth_key: &BitBlock, message_bits: usize, tag_bits: usize) -> Result<Self> {
        if tag_bits == 0 || tag_bits > message_bits {
            return Err(config(format!(
                "tag length {tag_bits} must be in 1..={message_bits}"
            )));
        }
        let seed_len = message_bits + tag_bits - 1;
        if auth_key.len() < seed_len + tag_bits {
            return Err(config(format!(
                "authentication key has {} bits, at least {} needed",
                auth_key.len(),
                seed_len + tag_bits
            )));
        }
        let seed = ToeplitzSeed::new(auth_key.slice(0, seed_len), message_bits, tag_bits)?;
        let pads = auth_key.slice(seed_len, auth_key.len());
        let segments = pads.len() / tag_bits;
        Ok(SessionAuthenticator {
            seed,
            pads,
            tag_bits,
            used: vec![false; segments],
            next: 0,
        })
    }

    pub fn segments_left(&self) -> usize {
        self.used.iter().filter(|u| !**u).count()
    }

    fn claim(&mut self, segment: usize) -> Result<BitBlock> {
        match self.used.get(segment) {
            None => Err(Error::Abort(format!(
                "authentication key exhausted (segment {segment} of {})",
                self.used.len()
            ))),
            Some(true) => Err(Error::Abort(format!("pad segment {segment} already used"))),
            Some(false) => {
                self.used[segment] = true;
                let s = segment * self.tag_bits;
                Ok(self.pads.slice(s, s + self.tag_bits))
            }
        }
    }

    fn mac(&self, message: &BitBlock, pad: &BitBlock) -> Result<BitBlock> {
        if message.len() != self.seed.n() {
            return Err(domain(format!(
                "message has {} bits, authenticator expects {}",
                message.len(),
                self.seed.n()
            )));
        }
        Ok(toeplitz_hash(message, &self.seed)?.xor(pad))
    }

    /// Tags `message` with the next unused pad segment.
    pub fn authenticate(&mut self, message: &BitBlock) -> Result<Tag> {
        while self.used.get(self.next) == Some(&true) {
            self.next += 1;
        }
        let segment = self.next;
        self.authenticate_with_segment(message, segment)
    }

    /// Tags `message` with an explicit segment; reusing a segment aborts.
    pub fn authenticate_with_segment(&mut self, message: &BitBlock, segment: usize) -> Result<Tag> {
        if message.len() != self.seed.n() {
            return Err(domain("message length does not match the authenticator"));
        }
        let pad = self.claim(segment)?;
        Ok(Tag {
            segment,
            bits: self.mac(message, &pad)?,
        })
    }

    /// Checks `tag`, consuming its pad segment on this side.
    pub fn verify(&mut self, message: &BitBlock, tag: &Tag) -> Result<bool> {
        let pad = self.claim(tag.segment)?;
        Ok(self.mac(message, &pad)? == tag.bits)
    }
}
