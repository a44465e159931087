//! Code-block segmentation with zero padding.

use serde::Serialize;

use super::PhyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segmentation {
    pub blocks: usize,
    pub pad_bits: usize,
    pub block_bits: usize,
}

impl Segmentation {
    /// Bits put on the link, padding included.
    pub fn padded_bits(&self) -> usize {
        self.blocks * self.block_bits
    }

    pub fn for_length(payload_bits: usize, block_bits: usize) -> Result<Self, PhyError> {
        if payload_bits == 0 {
            return Err(PhyError::EmptyPayload);
        }
        if block_bits == 0 {
            return Err(PhyError::InvalidConfig("block size must be positive".into()));
        }
        let blocks = payload_bits.div_ceil(block_bits);
        Ok(Self {
            blocks,
            pad_bits: blocks * block_bits - payload_bits,
            block_bits,
        })
    }
}

/// Splits unpacked payload bits into `block_bits`-sized blocks, zero-padding
/// the last one.
pub fn segment_payload(bits: &[u8], block_bits: usize) -> Result<(Vec<Vec<u8>>, Segmentation), PhyError> {
    let seg = Segmentation::for_length(bits.len(), block_bits)?;
    let blocks = bits
        .chunks(block_bits)
        .map(|c| {
            let mut b = c.to_vec();
            b.resize(block_bits, 0);
            b
        })
        .collect();
    Ok((blocks, seg))
}
