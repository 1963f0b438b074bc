//! Low-precision matrix engine: `bp`-bit operands, 32-bit accumulators.

mod modmul;

use std::ops::{Add, AddAssign};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ChunkMatrix, Matrix, ResidueMatrix};
use crate::modarith::{reduce64, Modulus, Reduction, MAX_BP};

pub use modmul::{
    mat_mod_mul, mat_mod_mul_counted, mat_mod_mul_planned, reference_mat_mod_mul, sparse_baseline_matmul, KnownMatrix,
};

/// Operation metering returned by every kernel call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    /// `bp`-bit multiply-accumulates issued to the matrix engine.
    pub multiplies: u64,
    /// Bytes of the left (known) operand.
    pub bytes_lhs: u64,
    /// Word-level modular multiplies (one per high-precision product).
    pub word_mults: u64,
    /// Runtime data-movement operations (transposes, shuffles, reorders), per element moved.
    pub perm_ops: u64,
}

impl Add for OpCount {
    type Output = OpCount;

    fn add(self, o: OpCount) -> OpCount {
        OpCount {
            multiplies: self.multiplies + o.multiplies,
            bytes_lhs: self.bytes_lhs + o.bytes_lhs,
            word_mults: self.word_mults + o.word_mults,
            perm_ops: self.perm_ops + o.perm_ops,
        }
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, o: OpCount) {
        *self = *self + o;
    }
}

/// Which axis holds the `K` chunk partial sums of one output value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeAxis {
    /// Rows `hK..hK+K` (left-known product `A_dense @ B_dense`).
    Rows,
    /// Columns `wK..wK+K` (right-known product `X_dense @ A_denseᵀ`).
    Cols,
}

/// A single accumulator bit flip, used to prove that verification catches corruption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub row: usize,
    pub col: usize,
    pub bit: u32,
}

/// Raw 32-bit accumulator output of [`matmul_lp`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccMatrix {
    data: Matrix<u32>,
    k: usize,
    v: usize,
    bp: u32,
    axis: MergeAxis,
    max_entry: u32,
}

impl AccMatrix {
    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn cols(&self) -> usize {
        self.data.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data.get(r, c)
    }

    pub fn data(&self) -> &Matrix<u32> {
        &self.data
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn bp(&self) -> u32 {
        self.bp
    }

    pub fn axis(&self) -> MergeAxis {
        self.axis
    }

    /// Largest accumulator value produced by the multiply.
    pub fn max_entry(&self) -> u32 {
        self.max_entry
    }

    /// `2bp + ceil(log2(K·V))`: the accumulator width the precondition guarantees.
    pub fn bound_bits(&self) -> u32 {
        precision_bits(self.bp, self.k * self.v)
    }

    pub fn inject_fault(&mut self, f: Fault) -> Result<()> {
        if f.row >= self.rows() || f.col >= self.cols() || f.bit >= 32 {
            return Err(Error::OutOfRange(format!("fault {f:?} outside the accumulator")));
        }
        let x = self.data.get(f.row, f.col);
        self.data.set(f.row, f.col, x ^ (1 << f.bit));
        Ok(())
    }
}

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

/// Accumulator bits needed for a reduction dimension of `kv` chunk products.
pub fn precision_bits(bp: u32, kv: usize) -> u32 {
    2 * bp + ceil_log2(kv)
}

/// Fails unless `kv` products of `bp`-bit operands always fit a 32-bit accumulator.
pub fn check_precision(bp: u32, kv: usize) -> Result<()> {
    if bp == 0 || bp > MAX_BP {
        return Err(Error::OutOfRange(format!("chunk width {bp} not in [1, {MAX_BP}]")));
    }
    let need = precision_bits(bp, kv);
    if need > 32 {
        return Err(Error::Precision(format!(
            "{kv} products of {bp}-bit chunks need {need} accumulator bits"
        )));
    }
    Ok(())
}

fn check_chunks(m: &ChunkMatrix, bp: u32) -> Result<()> {
    if bp < 8 {
        if let Some(&c) = m.as_slice().iter().find(|&&c| c >> bp != 0) {
            return Err(Error::OutOfRange(format!("chunk {c} exceeds {bp} bits")));
        }
    }
    Ok(())
}

fn finish(data: Matrix<u32>, k: usize, v: usize, bp: u32, axis: MergeAxis) -> AccMatrix {
    let max_entry = data.as_slice().iter().copied().max().unwrap_or(0);
    AccMatrix {
        data,
        k,
        v,
        bp,
        axis,
        max_entry,
    }
}

/// Exact `a @ b` over chunks, without layout requirements.
pub(crate) fn raw_product(a: &ChunkMatrix, b: &ChunkMatrix, bp: u32) -> Result<Matrix<u32>> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    check_precision(bp, a.cols())?;
    check_chunks(a, bp)?;
    check_chunks(b, bp)?;
    let w = b.cols();
    let mut out = vec![0u32; a.rows() * w];
    if w > 0 {
        out.par_chunks_mut(w).enumerate().for_each(|(i, orow)| {
            for (p, &x) in a.row(i).iter().enumerate() {
                let x = x as u32;
                for (o, &y) in orow.iter_mut().zip(b.row(p)) {
                    // exact: the precision check bounds every partial sum below 2^32
                    *o = o.wrapping_add(x.wrapping_mul(y as u32));
                }
            }
        });
    }
    Matrix::from_vec(a.rows(), w, out)
}

/// `A_dense (KH×KV) @ B_dense (KV×W)` with exact 32-bit accumulation.
///
/// `k` is the chunk count of the producing compilation; it is recorded for the merge.
pub fn matmul_lp(a: &ChunkMatrix, b: &ChunkMatrix, bp: u32, k: usize) -> Result<(AccMatrix, OpCount)> {
    if k == 0 || !a.rows().is_multiple_of(k) || !a.cols().is_multiple_of(k) {
        return Err(Error::Shape(format!(
            "{}x{} is not a {k}-chunk layout",
            a.rows(),
            a.cols()
        )));
    }
    let data = raw_product(a, b, bp)?;
    let ops = OpCount {
        multiplies: (a.rows() * a.cols() * b.cols()) as u64,
        bytes_lhs: (a.rows() * a.cols()) as u64,
        ..Default::default()
    };
    Ok((finish(data, k, a.cols() / k, bp, MergeAxis::Rows), ops))
}

/// `X_dense (R×KC) @ A_denseᵀ` where `A_dense` is `KC'×KC`: every output entry is a dot
/// product of two contiguous rows. Partial sums of one value sit in adjacent columns.
pub fn matmul_lp_nt(x: &ChunkMatrix, a: &ChunkMatrix, bp: u32, k: usize) -> Result<(AccMatrix, OpCount)> {
    if x.cols() != a.cols() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by the transpose of {}x{}",
            x.rows(),
            x.cols(),
            a.rows(),
            a.cols()
        )));
    }
    if k == 0 || !a.rows().is_multiple_of(k) || !a.cols().is_multiple_of(k) {
        return Err(Error::Shape(format!(
            "{}x{} is not a {k}-chunk layout",
            a.rows(),
            a.cols()
        )));
    }
    check_precision(bp, a.cols())?;
    check_chunks(x, bp)?;
    check_chunks(a, bp)?;
    let n = a.rows();
    let mut out = vec![0u32; x.rows() * n];
    if n > 0 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, orow)| {
            let xr = x.row(i);
            for (o, j) in orow.iter_mut().zip(0..n) {
                *o = xr
                    .iter()
                    .zip(a.row(j))
                    .fold(0u32, |s, (&p, &q)| s.wrapping_add((p as u32).wrapping_mul(q as u32)));
            }
        });
    }
    let ops = OpCount {
        multiplies: (x.rows() * x.cols() * n) as u64,
        bytes_lhs: (a.rows() * a.cols()) as u64,
        ..Default::default()
    };
    let data = Matrix::from_vec(x.rows(), n, out)?;
    Ok((finish(data, k, a.cols() / k, bp, MergeAxis::Cols), ops))
}

/// Merge each group of `K` partial sums (`Σ_k Z_k·2^{k·bp}`) and reduce it to `[0, q)`.
pub fn merge_reduce(z: &AccMatrix, k: usize, m: &Modulus, reduction: Reduction) -> Result<ResidueMatrix> {
    if k != z.k {
        return Err(Error::Shape(format!("accumulator holds {}-chunk groups, not {k}", z.k)));
    }
    let bp = z.bp;
    let (h, w) = match z.axis {
        MergeAxis::Rows => (z.rows() / k, z.cols()),
        MergeAxis::Cols => (z.rows(), z.cols() / k),
    };
    let src = z.data.as_slice();
    let zc = z.cols();
    let merge_at = |r: usize, c: usize| -> Result<u32> {
        let mut acc = 0u128;
        for i in 0..k {
            let idx = match z.axis {
                MergeAxis::Rows => (r * k + i) * zc + c,
                MergeAxis::Cols => r * zc + c * k + i,
            };
            acc += (src[idx] as u128) << (i as u32 * bp);
        }
        let acc =
            u64::try_from(acc).map_err(|_| Error::Precision(format!("merged value at ({r}, {c}) exceeds 64 bits")))?;
        Ok(reduce64(acc, m, reduction))
    };
    let mut out = vec![0u32; h * w];
    if w > 0 {
        out.par_chunks_mut(w)
            .enumerate()
            .try_for_each(|(r, row)| -> Result<()> {
                for (c, o) in row.iter_mut().enumerate() {
                    *o = merge_at(r, c)?;
                }
                Ok(())
            })?;
    }
    ResidueMatrix::from_vec(h, w, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wide_matmul(a: &ChunkMatrix, b: &ChunkMatrix) -> Vec<u64> {
        let mut out = vec![0u64; a.rows() * b.cols()];
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                out[i * b.cols() + j] = (0..a.cols()).map(|p| a.get(i, p) as u64 * b.get(p, j) as u64).sum();
            }
        }
        out
    }

    #[test]
    fn identity_and_scalar() {
        let b = ChunkMatrix::from_fn(4, 3, |r, c| (r * 3 + c) as u8);
        let (z, ops) = matmul_lp(&Matrix::<u32>::identity(4).map(|x| x as u8), &b, 8, 1).unwrap();
        assert_eq!(z.data().map(|x| x as u8), b);
        assert_eq!(ops.multiplies, 4 * 4 * 3);
        let (z, _) = matmul_lp(
            &ChunkMatrix::from_fn(1, 1, |_, _| 200),
            &ChunkMatrix::from_fn(1, 1, |_, _| 201),
            8,
            1,
        )
        .unwrap();
        assert_eq!(z.get(0, 0), 40200);
    }

    #[test]
    fn precision_guard() {
        assert!(check_precision(8, 1 << 16).is_ok());
        assert!(matches!(check_precision(8, (1 << 16) + 1), Err(Error::Precision(_))));
        let a = ChunkMatrix::zeros(1, 1 << 17);
        let b = ChunkMatrix::zeros(1 << 17, 1);
        assert!(matches!(matmul_lp(&a, &b, 8, 1), Err(Error::Precision(_))));
        assert!(matches!(
            matmul_lp(&ChunkMatrix::zeros(2, 3), &ChunkMatrix::zeros(2, 3), 8, 1),
            Err(Error::Shape(_))
        ));
        let big = ChunkMatrix::from_fn(1, 1, |_, _| 16);
        assert!(matmul_lp(&big, &big, 4, 1).is_err());
    }

    #[test]
    fn merge_examples() {
        let m = Modulus::new(65521).unwrap();
        let (z, _) = matmul_lp(&ChunkMatrix::zeros(8, 8), &ChunkMatrix::zeros(8, 5), 8, 4).unwrap();
        let r = merge_reduce(&z, 4, &m, Reduction::Barrett64).unwrap();
        assert!(r.as_slice().iter().all(|&x| x == 0));
        assert_eq!((r.rows(), r.cols()), (2, 5));
        // a single nonzero chunk row
        let a = ChunkMatrix::from_fn(4, 4, |r, c| u8::from(r == 2 && c == 0));
        let b = ChunkMatrix::from_fn(4, 1, |r, _| if r == 0 { 0xff } else { 0 });
        let (z, _) = matmul_lp(&a, &b, 8, 4).unwrap();
        let r = merge_reduce(&z, 4, &m, Reduction::Native).unwrap();
        assert_eq!(r.get(0, 0) as u64, (0xffu64 << 16) % 65521);
        assert!(merge_reduce(&z, 2, &m, Reduction::Native).is_err());
    }

    proptest! {
        #[test]
        fn matches_wide_reference(seed in any::<u64>(), h in 1usize..5, v in 1usize..5, w in 1usize..7) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k = 2;
            let a = ChunkMatrix::from_fn(k * h, k * v, |_, _| rng.gen());
            let b = ChunkMatrix::from_fn(k * v, w, |_, _| rng.gen());
            let (z, ops) = matmul_lp(&a, &b, 8, k).unwrap();
            let expect = wide_matmul(&a, &b);
            prop_assert!(z.data().as_slice().iter().zip(&expect).all(|(&x, &y)| x as u64 == y));
            prop_assert!((z.max_entry() as u64) < 1u64 << z.bound_bits());
            prop_assert_eq!(ops.multiplies, (k * h * k * v * w) as u64);
            // the transposed form computes the same products
            let (zt, _) = matmul_lp_nt(&b.transpose(), &a, 8, k).unwrap();
            prop_assert_eq!(zt.data().transpose(), z.data().clone());
            // merges agree with a big-integer sum
            let m = Modulus::new(7681).unwrap();
            let r = merge_reduce(&z, k, &m, Reduction::Barrett64).unwrap();
            for i in 0..h {
                for j in 0..w {
                    let s: u128 = (0..k).map(|t| (z.get(i * k + t, j) as u128) << (8 * t)).sum();
                    prop_assert_eq!(r.get(i, j) as u128, s % 7681);
                }
            }
        }
    }

    #[test]
    fn fault_flips_one_bit() {
        let (mut z, _) = matmul_lp(&ChunkMatrix::zeros(2, 2), &ChunkMatrix::zeros(2, 2), 8, 1).unwrap();
        z.inject_fault(Fault { row: 1, col: 0, bit: 3 }).unwrap();
        assert_eq!(z.get(1, 0), 8);
        assert!(z.inject_fault(Fault { row: 2, col: 0, bit: 0 }).is_err());
    }
}
