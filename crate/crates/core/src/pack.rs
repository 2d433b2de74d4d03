//! Little-endian bit packing of fixed-width coefficients.

use crate::error::{Error, Result};

/// Reads consecutive `width`-bit little-endian fields from a byte string.
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    /// Panics if fewer than `width` bits remain.
    pub fn read(&mut self, width: u32) -> u32 {
        assert!(width <= 32 && width as usize <= self.remaining());
        let mut value = 0u32;
        for k in 0..width as usize {
            let bit = (self.bytes[(self.pos + k) / 8] >> ((self.pos + k) % 8)) & 1;
            value |= (bit as u32) << k;
        }
        self.pos += width as usize;
        value
    }
}

pub fn packed_len(count: usize, width: u32) -> usize {
    (count * width as usize).div_ceil(8)
}

/// Packs the low `width` bits of each value.
pub fn pack(values: &[u32], width: u32) -> Vec<u8> {
    let mut out = vec![0u8; packed_len(values.len(), width)];
    let mut pos = 0usize;
    for &v in values {
        for k in 0..width as usize {
            if (v >> k) & 1 == 1 {
                out[pos / 8] |= 1 << (pos % 8);
            }
            pos += 1;
        }
    }
    out
}

pub fn unpack(bytes: &[u8], count: usize, width: u32) -> Result<Vec<u32>> {
    if bytes.len() != packed_len(count, width) {
        return Err(Error::Encoding(format!(
            "expected {} bytes for {count} x {width}-bit fields, got {}",
            packed_len(count, width),
            bytes.len()
        )));
    }
    let mut r = BitReader::new(bytes);
    Ok((0..count).map(|_| r.read(width)).collect())
}
