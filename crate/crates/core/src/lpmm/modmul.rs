use rayon::prelude::*;

use super::{matmul_lp, matmul_lp_nt, merge_reduce, raw_product, Fault, OpCount};
use crate::bat::{offline_compile_left_k, runtime_compile_right, runtime_compile_rows, BatMatPlan};
use crate::error::{Error, Result};
use crate::matrix::{ChunkMatrix, Matrix, ResidueMatrix};
use crate::modarith::{reduce64, shoup_mulmod, shoup_precompute, Domain, Modulus, Reduction, Strategy};

fn check_residues(x: &ResidueMatrix, m: &Modulus, what: &str) -> Result<()> {
    match x.as_slice().iter().find(|&&v| v >= m.q()) {
        Some(v) => Err(Error::OutOfRange(format!(
            "{what} entry {v} is not a residue modulo {}",
            m.q()
        ))),
        None => Ok(()),
    }
}

fn check_domain(plan: &BatMatPlan, reduction: Reduction) -> Result<()> {
    let ok = match plan.domain() {
        Domain::Plain => reduction != Reduction::Montgomery,
        Domain::Montgomery => reduction == Reduction::Montgomery,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{:?}-domain plan cannot be reduced with {reduction:?}",
            plan.domain()
        )))
    }
}

/// `plan @ B` where `plan` holds a compiled `H×V` left operand.
pub fn mat_mod_mul_planned(
    plan: &BatMatPlan,
    b: &ResidueMatrix,
    reduction: Reduction,
    fault: Option<Fault>,
) -> Result<(ResidueMatrix, OpCount)> {
    check_domain(plan, reduction)?;
    if b.rows() != plan.v() {
        return Err(Error::Shape(format!(
            "plan expects {} rows on the right, got {}",
            plan.v(),
            b.rows()
        )));
    }
    let bd = runtime_compile_right(b, plan.bp(), plan.k())?;
    let (mut z, mut ops) = matmul_lp(plan.dense(), &bd, plan.bp(), plan.k())?;
    if let Some(f) = fault {
        z.inject_fault(f)?;
    }
    ops.word_mults = (plan.h() * plan.v() * b.cols()) as u64;
    Ok((merge_reduce(&z, plan.k(), plan.modulus(), reduction)?, ops))
}

/// `(A @ B) mod q`, compiling `A` as the known operand.
pub fn mat_mod_mul(
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    m: &Modulus,
    bp: u32,
    strategy: Strategy,
) -> Result<ResidueMatrix> {
    mat_mod_mul_counted(a, b, m, bp, strategy).map(|(r, _)| r)
}

/// As [`mat_mod_mul`], also returning the operation counts.
///
/// Shoup cannot consume a chunked operand, so under that strategy the product runs on
/// word-level prepared operands instead of the matrix engine.
pub fn mat_mod_mul_counted(
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    m: &Modulus,
    bp: u32,
    strategy: Strategy,
) -> Result<(ResidueMatrix, OpCount)> {
    check_residues(a, m, "left")?;
    check_residues(b, m, "right")?;
    KnownMatrix::compile(a, m, bp, strategy)?.mul_left(b, None)
}

/// A known matrix prepared for repeated products, on either side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KnownMatrix {
    Bat {
        plan: BatMatPlan,
        reduction: Reduction,
    },
    Shoup {
        values: ResidueMatrix,
        companions: Matrix<u64>,
        modulus: Modulus,
    },
}

impl KnownMatrix {
    pub fn compile(a: &ResidueMatrix, m: &Modulus, bp: u32, strategy: Strategy) -> Result<Self> {
        Self::compile_k(a, m, bp, m.chunks(bp), strategy)
    }

    /// `k` may exceed the natural chunk count when runtime operands are wider than `q`.
    pub fn compile_k(a: &ResidueMatrix, m: &Modulus, bp: u32, k: usize, strategy: Strategy) -> Result<Self> {
        match strategy {
            Strategy::Shoup => {
                check_residues(a, m, "known")?;
                Ok(KnownMatrix::Shoup {
                    values: a.clone(),
                    companions: a.map(|x| shoup_precompute(x, m)),
                    modulus: *m,
                })
            }
            s => Ok(KnownMatrix::Bat {
                plan: offline_compile_left_k(a, m, bp, k, s.domain())?,
                reduction: s.reduction(),
            }),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            KnownMatrix::Bat { plan, .. } => plan.h(),
            KnownMatrix::Shoup { values, .. } => values.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            KnownMatrix::Bat { plan, .. } => plan.v(),
            KnownMatrix::Shoup { values, .. } => values.cols(),
        }
    }

    pub fn modulus(&self) -> &Modulus {
        match self {
            KnownMatrix::Bat { plan, .. } => plan.modulus(),
            KnownMatrix::Shoup { modulus, .. } => modulus,
        }
    }

    /// Storage of the prepared operand in bytes.
    pub fn bytes(&self) -> usize {
        match self {
            KnownMatrix::Bat { plan, .. } => plan.bytes(),
            KnownMatrix::Shoup { values, .. } => values.as_slice().len() * 12,
        }
    }

    pub fn plan(&self) -> Option<&BatMatPlan> {
        match self {
            KnownMatrix::Bat { plan, .. } => Some(plan),
            KnownMatrix::Shoup { .. } => None,
        }
    }

    /// `self @ b`.
    pub fn mul_left(&self, b: &ResidueMatrix, fault: Option<Fault>) -> Result<(ResidueMatrix, OpCount)> {
        match self {
            KnownMatrix::Bat { plan, reduction } => mat_mod_mul_planned(plan, b, *reduction, fault),
            KnownMatrix::Shoup {
                values,
                companions,
                modulus,
            } => {
                if b.rows() != values.cols() {
                    return Err(Error::Shape(format!(
                        "known matrix expects {} rows on the right, got {}",
                        values.cols(),
                        b.rows()
                    )));
                }
                check_residues(b, modulus, "runtime")?;
                let w = b.cols();
                let mut acc = vec![0u64; values.rows() * w];
                if w > 0 {
                    acc.par_chunks_mut(w).enumerate().for_each(|(h, row)| {
                        for v in 0..values.cols() {
                            let (a, c) = (values.get(h, v), companions.get(h, v));
                            for (o, &x) in row.iter_mut().zip(b.row(v)) {
                                *o += shoup_mulmod(x, a, c, modulus) as u64;
                            }
                        }
                    });
                }
                finish_word(acc, values.rows(), w, values.cols(), modulus, fault)
            }
        }
    }

    /// `x @ selfᵀ`: the known operand sits on the right, stored transposed. The runtime
    /// operand is consumed row-major and the result is produced row-major.
    pub fn mul_right_t(&self, x: &ResidueMatrix, fault: Option<Fault>) -> Result<(ResidueMatrix, OpCount)> {
        if x.cols() != self.cols() {
            return Err(Error::Shape(format!(
                "known matrix expects {} columns on the left, got {}",
                self.cols(),
                x.cols()
            )));
        }
        match self {
            KnownMatrix::Bat { plan, reduction } => {
                check_domain(plan, *reduction)?;
                let xd = runtime_compile_rows(x, plan.bp(), plan.k())?;
                let (mut z, mut ops) = matmul_lp_nt(&xd, plan.dense(), plan.bp(), plan.k())?;
                if let Some(f) = fault {
                    z.inject_fault(f)?;
                }
                ops.word_mults = (x.rows() * plan.v() * plan.h()) as u64;
                Ok((merge_reduce(&z, plan.k(), plan.modulus(), *reduction)?, ops))
            }
            KnownMatrix::Shoup {
                values,
                companions,
                modulus,
            } => {
                check_residues(x, modulus, "runtime")?;
                let n = values.rows();
                let mut acc = vec![0u64; x.rows() * n];
                if n > 0 {
                    acc.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
                        let xr = x.row(r);
                        for (j, o) in row.iter_mut().enumerate() {
                            *o = xr
                                .iter()
                                .zip(values.row(j).iter().zip(companions.row(j)))
                                .map(|(&p, (&a, &c))| shoup_mulmod(p, a, c, modulus) as u64)
                                .sum();
                        }
                    });
                }
                finish_word(acc, x.rows(), n, values.cols(), modulus, fault)
            }
        }
    }
}

fn finish_word(
    mut acc: Vec<u64>,
    rows: usize,
    cols: usize,
    inner: usize,
    m: &Modulus,
    fault: Option<Fault>,
) -> Result<(ResidueMatrix, OpCount)> {
    if let Some(f) = fault {
        if f.row >= rows || f.col >= cols || f.bit >= 64 {
            return Err(Error::OutOfRange(format!("fault {f:?} outside the accumulator")));
        }
        acc[f.row * cols + f.col] ^= 1 << f.bit;
    }
    let out = acc.into_iter().map(|z| reduce64(z, m, Reduction::Barrett64)).collect();
    let ops = OpCount {
        word_mults: (rows * cols * inner) as u64,
        bytes_lhs: (cols * inner * 12) as u64,
        ..Default::default()
    };
    Ok((ResidueMatrix::from_vec(rows, cols, out)?, ops))
}

/// Element-wise 64-bit oracle: `Σ_v a[h][v]·b[v][w] mod q` with native remainders.
pub fn reference_mat_mod_mul(a: &ResidueMatrix, b: &ResidueMatrix, m: &Modulus) -> Result<ResidueMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let q = m.q() as u64;
    Ok(ResidueMatrix::from_fn(a.rows(), b.cols(), |h, w| {
        let mut acc = 0u64;
        for v in 0..a.cols() {
            acc = (acc + a.get(h, v) as u64 * b.get(v, w) as u64) % q;
        }
        acc as u32
    }))
}

/// Baseline without the transformation: every `A` entry becomes a `(2K−1)×K` Toeplitz
/// block of its own chunks, so the left operand is `(2K−1)H×KV` and nearly half zeros.
pub fn sparse_baseline_matmul(
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    m: &Modulus,
    bp: u32,
) -> Result<(ResidueMatrix, OpCount)> {
    check_residues(a, m, "left")?;
    check_residues(b, m, "right")?;
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let k = m.chunks(bp);
    crate::bat::check_bp_k(bp, k, m)?;
    let t = 2 * k - 1;
    let mask = (1u32 << bp) - 1;
    let (h, v) = (a.rows(), a.cols());
    let sparse = ChunkMatrix::from_fn(t * h, k * v, |r, c| {
        let (row, i) = (r / t, r % t);
        let (col, j) = (c / k, c % k);
        match i.checked_sub(j) {
            Some(d) if d < k => ((a.get(row, col) >> (d as u32 * bp)) & mask) as u8,
            _ => 0,
        }
    });
    let bd = runtime_compile_right(b, bp, k)?;
    let z = raw_product(&sparse, &bd, bp)?;
    let q = m.q() as u128;
    let out = ResidueMatrix::from_fn(h, b.cols(), |r, w| {
        let s: u128 = (0..t).map(|i| (z.get(r * t + i, w) as u128) << (i as u32 * bp)).sum();
        (s % q) as u32
    });
    let ops = OpCount {
        multiplies: (t * h * k * v * b.cols()) as u64,
        bytes_lhs: (t * h * k * v) as u64,
        word_mults: (h * v * b.cols()) as u64,
        perm_ops: 0,
    };
    Ok((out, ops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bat::offline_compile_left;
    use crate::modarith::gen_ntt_primes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, q: u32, rng: &mut ChaCha8Rng) -> ResidueMatrix {
        ResidueMatrix::from_fn(rows, cols, |_, _| rng.gen_range(0..q))
    }

    #[test]
    fn identity_and_zero() {
        let m = Modulus::new(17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random(3, 5, 17, &mut rng);
        for s in Strategy::ALL {
            assert_eq!(mat_mod_mul(&ResidueMatrix::identity(3), &b, &m, 8, s).unwrap(), b);
        }
        let (z, _) = sparse_baseline_matmul(&ResidueMatrix::zeros(3, 3), &b, &m, 8).unwrap();
        assert!(z.as_slice().iter().all(|&x| x == 0));
    }

    #[test]
    fn small_moduli_all_strategies() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for q in [17u32, 97, 257, 7681] {
            let m = Modulus::new(q).unwrap();
            for _ in 0..200 {
                let (h, v, w) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5));
                let a = random(h, v, q, &mut rng);
                let b = random(v, w, q, &mut rng);
                let expect = reference_mat_mod_mul(&a, &b, &m).unwrap();
                for s in Strategy::ALL {
                    assert_eq!(mat_mod_mul(&a, &b, &m, 8, s).unwrap(), expect, "q={q} {s}");
                }
                assert_eq!(sparse_baseline_matmul(&a, &b, &m, 8).unwrap().0, expect);
                let known = KnownMatrix::compile(&b.transpose(), &m, 8, Strategy::Barrett).unwrap();
                assert_eq!(known.mul_right_t(&a, None).unwrap().0, expect);
            }
        }
    }

    #[test]
    fn dense_to_sparse_ratio() {
        let m = Modulus::new(gen_ntt_primes(28, 4096, 1, &[]).unwrap()[0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(16, 8, m.q(), &mut rng);
        let b = random(8, 4, m.q(), &mut rng);
        let (dense, d) = mat_mod_mul_counted(&a, &b, &m, 8, Strategy::Barrett).unwrap();
        let (sparse, s) = sparse_baseline_matmul(&a, &b, &m, 8).unwrap();
        assert_eq!(dense, sparse);
        assert_eq!(s.multiplies * 4, d.multiplies * 7);
        assert_eq!(s.bytes_lhs * 4, d.bytes_lhs * 7);
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let m = Modulus::new(97).unwrap();
        let plan = offline_compile_left(&ResidueMatrix::identity(2), &m, 8, Domain::Montgomery).unwrap();
        let b = ResidueMatrix::identity(2);
        assert!(mat_mod_mul_planned(&plan, &b, Reduction::Barrett64, None).is_err());
        assert_eq!(
            mat_mod_mul_planned(&plan, &b, Reduction::Montgomery, None).unwrap().0,
            b
        );
        assert!(mat_mod_mul(&b, &ResidueMatrix::from_fn(2, 2, |_, _| 97), &m, 8, Strategy::Barrett).is_err());
    }

    #[test]
    fn fault_changes_result() {
        let m = Modulus::new(7681).unwrap();
        let plan = offline_compile_left(&ResidueMatrix::identity(2), &m, 8, Domain::Plain).unwrap();
        let b = ResidueMatrix::identity(2);
        let f = Fault { row: 0, col: 0, bit: 0 };
        let (r, _) = mat_mod_mul_planned(&plan, &b, Reduction::Barrett64, Some(f)).unwrap();
        assert_ne!(r, b);
    }
}
