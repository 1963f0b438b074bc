//! Base-`2^bp` chunk decomposition of residues, least-significant chunk first.

use crate::error::{Error, Result};

/// Chunks are stored in `u8`, so the bit precision is capped at 8.
pub const MAX_BP: u32 = 8;

/// `K = ceil(bits / bp)`.
#[inline]
pub fn chunks_for(bits: u32, bp: u32) -> usize {
    bits.div_ceil(bp).max(1) as usize
}

pub(crate) fn check_bp(bp: u32) -> Result<()> {
    if bp == 0 || bp > MAX_BP {
        return Err(Error::OutOfRange(format!("chunk width {bp} not in [1, {MAX_BP}]")));
    }
    Ok(())
}

/// Split `a` into `k` chunks of `bp` bits.
pub fn chunk_decompose(a: u64, k: usize, bp: u32) -> Result<Vec<u8>> {
    check_bp(bp)?;
    let capacity = k as u32 * bp;
    if capacity < 64 && a >> capacity != 0 {
        return Err(Error::OutOfRange(format!(
            "{a} does not fit in {k} chunks of {bp} bits"
        )));
    }
    let mask = (1u64 << bp) - 1;
    Ok((0..k)
        .map(|i| {
            let shift = i as u32 * bp;
            if shift >= 64 {
                0
            } else {
                ((a >> shift) & mask) as u8
            }
        })
        .collect())
}

/// `Σ chunks[k]·2^{k·bp}`. Chunks may exceed `2^bp` (accumulator rows); overflow past
/// 64 bits is an error.
pub fn chunk_merge(chunks: &[u64], bp: u32) -> Result<u64> {
    let mut acc = 0u128;
    for (k, &c) in chunks.iter().enumerate() {
        let shift = k as u32 * bp;
        if c != 0 {
            if shift >= 64 {
                return Err(Error::OutOfRange("chunk merge exceeds 64 bits".into()));
            }
            acc += (c as u128) << shift;
        }
        if acc >> 64 != 0 {
            return Err(Error::OutOfRange("chunk merge exceeds 64 bits".into()));
        }
    }
    Ok(acc as u64)
}

/// A tensor of high-precision values, each held as `k` consecutive `bp`-bit chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkTensor {
    shape: Vec<usize>,
    bp: u32,
    k: usize,
    data: Vec<u8>,
}

impl ChunkTensor {
    pub fn decompose(values: &[u32], shape: &[usize], k: usize, bp: u32) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != values.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {count} values, got {}",
                values.len()
            )));
        }
        let mut data = Vec::with_capacity(count * k);
        for &v in values {
            data.extend(chunk_decompose(v as u64, k, bp)?);
        }
        Ok(Self {
            shape: shape.to_vec(),
            bp,
            k,
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bp(&self) -> u32 {
        self.bp
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Raw chunks, value-major: value `i` occupies `data[i*k..(i+1)*k]`.
    pub fn chunks(&self) -> &[u8] {
        &self.data
    }

    pub fn merge(&self) -> Vec<u64> {
        self.data
            .chunks(self.k)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, &x)| acc | (x as u64) << (i as u32 * self.bp))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decompose_examples() {
        assert_eq!(
            chunk_decompose(0x0A0B_0C0D, 4, 8).unwrap(),
            vec![0x0D, 0x0C, 0x0B, 0x0A]
        );
        assert_eq!(chunk_decompose(0, 4, 8).unwrap(), vec![0; 4]);
        assert_eq!(chunk_decompose(257, 2, 8).unwrap(), vec![1, 1]);
        assert!(matches!(chunk_decompose(1 << 16, 2, 8), Err(Error::OutOfRange(_))));
        assert!(chunk_decompose(1, 2, 9).is_err());
    }

    #[test]
    fn merge_examples() {
        assert_eq!(chunk_merge(&[1, 1], 8).unwrap(), 257);
        assert_eq!(chunk_merge(&[300, 2], 8).unwrap(), 812);
        assert!(chunk_merge(&[0, 0, 0, 0, 0, 0, 0, 0, 1], 8).is_err());
        assert!(chunk_merge(&[0, 0, 0, 0, 0, 0, 0, 1 << 9], 8).is_err());
        // Worst-case accumulator rows for K = 4 still fit.
        let big = (1u64 << 32) - 1;
        assert!(chunk_merge(&[big; 4], 8).is_ok());
    }

    #[test]
    fn chunk_counts() {
        assert_eq!(chunks_for(28, 8), 4);
        assert_eq!(chunks_for(5, 8), 1);
        assert_eq!(chunks_for(9, 8), 2);
        assert_eq!(chunks_for(28, 4), 7);
    }

    #[test]
    fn tensor_roundtrip() {
        let vals = [0u32, 1, 257, 0x0FFF_FFFF, 12345];
        let t = ChunkTensor::decompose(&vals, &[5], 4, 8).unwrap();
        assert_eq!(t.chunks().len(), 20);
        assert_eq!(t.merge(), vals.iter().map(|&v| v as u64).collect::<Vec<_>>());
        assert!(ChunkTensor::decompose(&vals, &[2, 2], 4, 8).is_err());
    }

    proptest! {
        #[test]
        fn decompose_merge_bijection(bp in 1u32..=8, k in 1usize..=8, raw in any::<u64>()) {
            let cap = bp * k as u32;
            let a = if cap >= 64 { raw } else { raw & ((1u64 << cap) - 1) };
            let chunks = chunk_decompose(a, k, bp).unwrap();
            prop_assert!(chunks.iter().all(|&c| (c as u32) < (1 << bp)));
            let wide: Vec<u64> = chunks.iter().map(|&c| c as u64).collect();
            prop_assert_eq!(chunk_merge(&wide, bp).unwrap(), a);
        }
    }
}
