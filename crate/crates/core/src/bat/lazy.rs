use super::check_bp_k;
use crate::error::{Error, Result};
use crate::matrix::ChunkMatrix;
use crate::modarith::{barrett_reduce, chunk_decompose, reduce64, Modulus, Reduction};

/// `R[k][l]` = chunk `l` of `2^{bp·(K+k)} mod q`: folds the high half of a `2K`-chunk
/// partial sum back onto the low bases with one small matrix product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LazyReductionMatrix {
    k: usize,
    bp: u32,
    q: u32,
    data: ChunkMatrix,
}

impl LazyReductionMatrix {
    pub fn new(m: &Modulus, bp: u32) -> Result<Self> {
        let k = m.chunks(bp);
        check_bp_k(bp, k, m)?;
        let q = m.q() as u128;
        let mask = (1u128 << bp) - 1;
        let data = ChunkMatrix::from_fn(k, k, |row, l| {
            let shift = bp * (k + row) as u32;
            let v = if shift >= 128 { 0 } else { (1u128 << shift) % q };
            ((v >> (l as u32 * bp)) & mask) as u8
        });
        Ok(Self { k, bp, q: m.q(), data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bp(&self) -> u32 {
        self.bp
    }

    pub fn matrix(&self) -> &ChunkMatrix {
        &self.data
    }

    pub fn row_value(&self, row: usize) -> u64 {
        (0..self.k).fold(0, |acc, l| {
            acc + ((self.data.get(row, l) as u64) << (l as u32 * self.bp))
        })
    }
}

/// Partially reduced value `merge(low) + merge(high @ R)`, congruent to the psum mod q.
pub fn lazy_partial(psum_chunks: &[u8], r: &LazyReductionMatrix) -> Result<u64> {
    let k = r.k;
    if psum_chunks.len() != 2 * k {
        return Err(Error::Shape(format!(
            "lazy reduction takes {} chunks, got {}",
            2 * k,
            psum_chunks.len()
        )));
    }
    let bp = r.bp;
    let low = psum_chunks[..k]
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &c)| acc + ((c as u64) << (i as u32 * bp)));
    let high = &psum_chunks[k..];
    let mut folded = 0u64;
    for l in 0..k {
        let s: u64 = (0..k).map(|row| high[row] as u64 * r.data.get(row, l) as u64).sum();
        folded += s << (l as u32 * bp);
    }
    Ok(low + folded)
}

/// Reduce a `2K`-chunk partial sum with one `1×K @ K×K` product plus a final canonical
/// reduction.
pub fn lazy_reduce64(psum_chunks: &[u8], r: &LazyReductionMatrix, m: &Modulus) -> Result<u32> {
    if r.q != m.q() {
        return Err(Error::Config("lazy reduction matrix built for another modulus".into()));
    }
    Ok(reduce64(lazy_partial(psum_chunks, r)?, m, Reduction::Barrett64))
}

impl LazyReductionMatrix {
    /// Convenience: chunk `z` and reduce it.
    pub fn reduce(&self, z: u64, m: &Modulus) -> Result<u32> {
        let cap = 2 * self.k as u32 * self.bp;
        if cap < 64 && z >> cap != 0 {
            return Err(Error::OutOfRange(format!("{z} exceeds {cap} bits")));
        }
        let mask = (1u64 << self.bp) - 1;
        let chunks: Vec<u8> = (0..2 * self.k)
            .map(|i| {
                let s = i as u32 * self.bp;
                if s >= 64 {
                    0
                } else {
                    ((z >> s) & mask) as u8
                }
            })
            .collect();
        lazy_reduce64(&chunks, self, m)
    }
}

/// `(a·b) mod q` when neither operand is known offline: a 1D convolution of the chunk
/// vectors produces `2K−1` partial sums, which are shift-accumulated and Barrett-reduced.
pub fn hpsm_conv(a: u32, b: u32, m: &Modulus, bp: u32) -> Result<u32> {
    let k = m.chunks(bp);
    check_bp_k(bp, k, m)?;
    if a >= m.q() || b >= m.q() {
        return Err(Error::OutOfRange("hpsm operands must be residues".into()));
    }
    let ac = chunk_decompose(a as u64, k, bp)?;
    let bc = chunk_decompose(b as u64, k, bp)?;
    // a padded with K−1 zeros on both sides, slid across b.
    let mut padded = vec![0u8; k - 1];
    padded.extend_from_slice(&ac);
    padded.extend(std::iter::repeat_n(0, k - 1));
    let mut psum = 0u64;
    for t in 0..2 * k - 1 {
        let mut acc = 0u32;
        for (j, &bj) in bc.iter().enumerate() {
            // psum_t = Σ_{i+j=t} a_i b_j
            acc += padded[t + k - 1 - j] as u32 * bj as u32;
        }
        psum += (acc as u64) << (t as u32 * bp);
    }
    Ok(barrett_reduce(psum, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modarith::gen_ntt_primes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lazy_rows_are_reduced_powers() {
        let m = Modulus::new(gen_ntt_primes(28, 4096, 1, &[]).unwrap()[0]).unwrap();
        let r = LazyReductionMatrix::new(&m, 8).unwrap();
        for row in 0..4 {
            assert_eq!(r.row_value(row) as u128, (1u128 << (8 * (4 + row))) % m.q() as u128);
        }
    }

    #[test]
    fn lazy_examples() {
        let m = Modulus::new(gen_ntt_primes(28, 4096, 1, &[]).unwrap()[0]).unwrap();
        let r = LazyReductionMatrix::new(&m, 8).unwrap();
        let small = [0x12u8, 0x34, 0x56, 0x78, 0, 0, 0, 0];
        assert_eq!(lazy_partial(&small, &r).unwrap(), 0x7856_3412);
        assert_eq!(r.reduce((m.q() as u64) << 32, &m).unwrap(), 0);
        let bound = (1u64 << 32) + 4 * (1u64 << 32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            let z: u64 = rng.gen();
            let chunks = z.to_le_bytes();
            assert!(lazy_partial(&chunks, &r).unwrap() < bound);
            assert_eq!(r.reduce(z, &m).unwrap() as u64, z % m.q() as u64);
        }
        assert!(lazy_partial(&[0; 3], &r).is_err());
    }

    #[test]
    fn hpsm_examples() {
        let m = Modulus::new(17).unwrap();
        assert_eq!(hpsm_conv(5, 7, &m, 8).unwrap(), 1);
        assert_eq!(hpsm_conv(0, 11, &m, 8).unwrap(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Modulus::new(gen_ntt_primes(28, 4096, 1, &[]).unwrap()[0]).unwrap();
        for _ in 0..100_000 {
            let (a, b) = (rng.gen_range(0..m.q()), rng.gen_range(0..m.q()));
            assert_eq!(hpsm_conv(a, b, &m, 8).unwrap(), m.mul(a, b));
        }
        assert!(hpsm_conv(m.q(), 1, &m, 8).is_err());
    }
}
