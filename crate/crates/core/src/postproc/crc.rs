//! Error verification with CRC-32 (ISO-HDLC: polynomial 0x04C11DB7 reflected,
//! init and final XOR 0xFFFFFFFF), computed over the little-endian byte packing
//! of a [`BitBlock`].

use super::BitBlock;

/// Probability that a corrupted block passes verification.
pub const UNDETECTED_ERROR_PROB: f64 = 1.0 / 4_294_967_296.0;

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

pub fn block_crc(block: &BitBlock) -> u32 {
    crc32(&block.to_bytes())
}

/// True when both blocks have the same length and CRC.
pub fn crc_verify(a: &BitBlock, b: &BitBlock) -> bool {
    a.len() == b.len() && block_crc(a) == block_crc(b)
}
