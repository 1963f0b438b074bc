//! Basis-aligned transformation: offline compilation of a known high-precision operand
//! into a dense low-precision matrix whose column merges are congruent to shifted copies
//! of the operand modulo q.
//!
//! For a known `a` and runtime `b = Σ b_j·2^{j·bp}`,
//!
//! ```text
//! a·b ≡ Σ_j (a·2^{j·bp} mod q)·b_j ≡ Σ_i 2^{i·bp} · Σ_j M[i][j]·b_j   (mod q)
//! ```
//!
//! where column `j` of the `K×K` matrix `M` holds the chunks of `a·2^{j·bp} mod q`. The
//! sparse `(2K−1)×K` Toeplitz form that a plain chunk-wise product would need is folded
//! away at compile time.

mod lazy;
mod plan;

pub use lazy::{hpsm_conv, lazy_partial, lazy_reduce64, LazyReductionMatrix};
pub use plan::{
    offline_compile_left, offline_compile_left_k, runtime_compile_right, runtime_compile_rows, BatMatPlan, BATP_MAGIC,
    BATP_VERSION,
};

use crate::error::{Error, Result};
use crate::modarith::{chunk_decompose, reduce64, Domain, Modulus, Reduction};

pub(crate) use crate::modarith::MAX_BP;

/// `(2K−1)×K` chunk matrix; entries may temporarily exceed `2^bp` while folding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzMatrix {
    k: usize,
    bp: u32,
    data: Vec<u64>,
}

impl ToeplitzMatrix {
    pub fn rows(&self) -> usize {
        2 * self.k - 1
    }

    pub fn cols(&self) -> usize {
        self.k
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bp(&self) -> u32 {
        self.bp
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.k + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.k + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<u64> {
        (0..self.rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn zero_count(&self) -> usize {
        self.data.iter().filter(|&&x| x == 0).count()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// True when rows `K..2K−1` are all zero.
    pub fn bottom_is_zero(&self) -> bool {
        self.data[self.k * self.k..].iter().all(|&x| x == 0)
    }

    pub fn all_fit(&self) -> bool {
        self.data.iter().all(|&x| x < 1 << self.bp)
    }

    /// `Σ_r X[r][c]·2^{r·bp}` without overflow.
    pub fn column_value(&self, c: usize) -> u128 {
        (0..self.rows()).fold(0u128, |acc, r| acc + ((self.get(r, c) as u128) << (r as u32 * self.bp)))
    }
}

/// Lay out the chunks of `a` so that `X @ b_chunks` yields all `2K−1` chunk-product
/// partial sums: `X[i + j][j] = a_i`.
pub fn construct_toeplitz(chunks: &[u8], bp: u32) -> ToeplitzMatrix {
    let k = chunks.len().max(1);
    let mut x = ToeplitzMatrix {
        k,
        bp,
        data: vec![0; (2 * k - 1) * k],
    };
    for j in 0..chunks.len() {
        for (i, &a) in chunks.iter().enumerate() {
            x.set(i + j, j, a as u64);
        }
    }
    x
}

/// Fold every non-zero bottom-block entry `e` at row `r` into the top block of its own
/// column as the chunks of `(e << r·bp) mod q`. Column congruence mod q is preserved.
pub fn bat_fold(x: &ToeplitzMatrix, m: &Modulus) -> ToeplitzMatrix {
    let mut out = x.clone();
    let k = x.k;
    let q = m.q() as u128;
    for r in k..x.rows() {
        for j in 0..k {
            let e = out.get(r, j);
            if e == 0 {
                continue;
            }
            let proj = (((e as u128) << (r as u32 * x.bp)) % q) as u64;
            out.set(r, j, 0);
            let chunks = chunk_decompose(proj, k, x.bp).expect("proj < q fits K chunks");
            for (i, c) in chunks.into_iter().enumerate() {
                out.set(i, j, out.get(i, j) + c as u64);
            }
        }
    }
    out
}

/// Push overflow of each entry into the next row of the same column. The last row keeps
/// whatever it receives; the compile loop folds it away.
pub fn carry_propagate(x: &ToeplitzMatrix) -> ToeplitzMatrix {
    let mut out = x.clone();
    let base = 1u64 << x.bp;
    for j in 0..x.k {
        for r in 0..x.rows() - 1 {
            let v = out.get(r, j);
            if v >= base {
                out.set(r, j, v & (base - 1));
                out.set(r + 1, j, out.get(r + 1, j) + (v >> x.bp));
            }
        }
    }
    out
}

/// Dense `K×K` low-precision image of a known residue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatScalarMatrix {
    k: usize,
    bp: u32,
    q: u32,
    source: u32,
    domain: Domain,
    /// Row `i` = output basis `2^{i·bp}`, column `j` = input chunk `b_j`.
    data: Vec<u8>,
}

impl BatScalarMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bp(&self) -> u32 {
        self.bp
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn source(&self) -> u32 {
        self.source
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.k + j]
    }

    pub fn entries(&self) -> &[u8] {
        &self.data
    }

    pub fn column_value(&self, j: usize) -> u64 {
        (0..self.k).fold(0u64, |acc, i| acc + ((self.get(i, j) as u64) << (i as u32 * self.bp)))
    }
}

fn check_residue(a: u32, m: &Modulus) -> Result<()> {
    if a >= m.q() {
        return Err(Error::OutOfRange(format!("{a} is not a residue modulo {}", m.q())));
    }
    Ok(())
}

pub(crate) fn check_bp_k(bp: u32, k: usize, m: &Modulus) -> Result<()> {
    if bp == 0 || bp > MAX_BP {
        return Err(Error::OutOfRange(format!("chunk width {bp} not in [1, {MAX_BP}]")));
    }
    if k < m.chunks(bp) {
        return Err(Error::OutOfRange(format!(
            "{k} chunks of {bp} bits cannot hold residues modulo {}",
            m.q()
        )));
    }
    if k as u32 * bp > 64 {
        return Err(Error::OutOfRange(format!("{k} chunks of {bp} bits exceed 64 bits")));
    }
    Ok(())
}

/// Column `j` = chunks of `(a << j·bp) mod q`, written into a `k×k` row-major block.
pub(crate) fn scalar_block(a: u32, m: &Modulus, bp: u32, k: usize, out: &mut [u8], stride: usize) {
    let q = m.q() as u128;
    for j in 0..k {
        let val = (((a as u128) << (j as u32 * bp)) % q) as u64;
        let mask = (1u64 << bp) - 1;
        for i in 0..k {
            let shift = i as u32 * bp;
            out[i * stride + j] = if shift >= 64 { 0 } else { ((val >> shift) & mask) as u8 };
        }
    }
}

/// Canonical single-pass compilation of a known residue.
pub fn direct_scalar_bat(a: u32, m: &Modulus, bp: u32, domain: Domain) -> Result<BatScalarMatrix> {
    check_residue(a, m)?;
    let k = m.chunks(bp);
    check_bp_k(bp, k, m)?;
    let mut data = vec![0u8; k * k];
    scalar_block(m.to_domain(a, domain), m, bp, k, &mut data, k);
    Ok(BatScalarMatrix {
        k,
        bp,
        q: m.q(),
        source: a,
        domain,
        data,
    })
}

/// Iterative compilation: start from the sparse Toeplitz layout and alternate carry
/// propagation with folding until the bottom block is empty and every entry fits.
pub fn offline_compile_scalar(a: u32, m: &Modulus, bp: u32, domain: Domain) -> Result<BatScalarMatrix> {
    offline_compile_scalar_traced(a, m, bp, domain, |_| {})
}

/// As [`offline_compile_scalar`], calling `observe` on every intermediate matrix.
pub fn offline_compile_scalar_traced(
    a: u32,
    m: &Modulus,
    bp: u32,
    domain: Domain,
    mut observe: impl FnMut(&ToeplitzMatrix),
) -> Result<BatScalarMatrix> {
    check_residue(a, m)?;
    let k = m.chunks(bp);
    check_bp_k(bp, k, m)?;
    let stored = m.to_domain(a, domain);
    let mut x = construct_toeplitz(&chunk_decompose(stored as u64, k, bp)?, bp);
    observe(&x);
    let cap = 4 * k;
    let mut rounds = 0;
    while !(x.all_fit() && x.bottom_is_zero()) {
        if rounds == cap {
            return Err(Error::Internal(format!(
                "offline compile of {a} mod {} did not converge in {cap} rounds",
                m.q()
            )));
        }
        x = carry_propagate(&x);
        observe(&x);
        if !x.bottom_is_zero() {
            x = bat_fold(&x, m);
            observe(&x);
        }
        rounds += 1;
    }
    let data = x.data[..k * k].iter().map(|&v| v as u8).collect();
    Ok(BatScalarMatrix {
        k,
        bp,
        q: m.q(),
        source: a,
        domain,
        data,
    })
}

/// Operation counts of one scalar product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScalarOpCount {
    /// `bp`-bit multiplies.
    pub multiplies: u64,
    /// Length of the shift-and-add carry chain.
    pub shift_adds: u64,
}

/// `(a·b) mod q` with `M` compiled from `a`.
pub fn bat_scalar_mulmod(mat: &BatScalarMatrix, b: u32, m: &Modulus) -> u32 {
    bat_scalar_mulmod_counted(mat, b, m).0
}

pub fn bat_scalar_mulmod_counted(mat: &BatScalarMatrix, b: u32, m: &Modulus) -> (u32, ScalarOpCount) {
    debug_assert_eq!(mat.q, m.q());
    let k = mat.k;
    let bp = mat.bp;
    let mask = (1u32 << bp) - 1;
    let mut z = 0u64;
    for i in 0..k {
        let mut psum = 0u32;
        for j in 0..k {
            let bj = (b >> (j as u32 * bp)) & mask;
            psum += mat.get(i, j) as u32 * bj;
        }
        z += (psum as u64) << (i as u32 * bp);
    }
    let count = ScalarOpCount {
        multiplies: (k * k) as u64,
        shift_adds: k as u64,
    };
    (reduce64(z, m, mat.domain.reduction()), count)
}

/// Baseline: multiply by the uncompiled sparse Toeplitz layout, merge all `2K−1` partial
/// sums, then reduce.
pub fn sparse_scalar_mulmod(a: u32, b: u32, m: &Modulus, bp: u32) -> Result<(u32, ScalarOpCount)> {
    let k = m.chunks(bp);
    check_bp_k(bp, k, m)?;
    let x = construct_toeplitz(&chunk_decompose(a as u64, k, bp)?, bp);
    let bc = chunk_decompose(b as u64, k, bp)?;
    let mut z = 0u64;
    for r in 0..x.rows() {
        let psum: u64 = (0..k).map(|j| x.get(r, j) * bc[j] as u64).sum();
        z += psum << (r as u32 * bp);
    }
    let count = ScalarOpCount {
        multiplies: ((2 * k - 1) * k) as u64,
        shift_adds: (2 * k - 1) as u64,
    };
    Ok((reduce64(z, m, Reduction::Barrett64), count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modarith::gen_ntt_primes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn congruent(x: &ToeplitzMatrix, a: u32, m: &Modulus) -> bool {
        let q = m.q() as u128;
        (0..x.cols()).all(|j| x.column_value(j) % q == ((a as u128) << (j as u32 * x.bp())) % q)
    }

    #[test]
    fn toeplitz_layout() {
        let x = construct_toeplitz(&[4, 3, 2, 1], 8);
        assert_eq!(x.column(0), vec![4, 3, 2, 1, 0, 0, 0]);
        assert_eq!(x.column(3), vec![0, 0, 0, 4, 3, 2, 1]);
        assert_eq!(x.zero_count(), 12);
        assert_eq!(x.len(), 28);
        assert_eq!(construct_toeplitz(&[0, 0, 0, 0], 8).zero_count(), 28);
        let one = construct_toeplitz(&[9], 8);
        assert_eq!((one.rows(), one.cols(), one.get(0, 0)), (1, 1, 9));
    }

    #[test]
    fn zero_fraction_formula() {
        for k in 1..=8usize {
            let x = construct_toeplitz(&vec![1u8; k], 8);
            assert_eq!(x.zero_count(), (k - 1) * k);
            assert_eq!(x.len(), (2 * k - 1) * k);
        }
    }

    #[test]
    fn fold_fixpoint_and_congruence() {
        let m = Modulus::new(65521).unwrap();
        let x = construct_toeplitz(&[3, 0], 8);
        assert_eq!(bat_fold(&x, &m), x);

        // a = 2^8 + 1: column 1 holds a_1 = 1 at row 2, i.e. 2^16 ≡ 15 (mod 65521).
        let a = 257u32;
        let x = construct_toeplitz(&[1, 1], 8);
        let folded = bat_fold(&x, &m);
        assert!(folded.bottom_is_zero());
        assert_eq!(folded.column_value(1) % 65521, (257u128 << 8) % 65521);
        assert!(congruent(&folded, a, &m));
    }

    #[test]
    fn fold_single_bottom_entry() {
        let m = Modulus::new(268_369_921).unwrap();
        let mut x = construct_toeplitz(&[0, 0, 0, 0], 8);
        x.set(4, 2, 200);
        let folded = bat_fold(&x, &m);
        let expect = (200u128 << 32) % m.q() as u128;
        assert_eq!(folded.column_value(2), expect);
    }

    #[test]
    fn carry_examples() {
        let x = construct_toeplitz(&[7, 9], 8);
        assert_eq!(carry_propagate(&x), x);
        let mut y = construct_toeplitz(&[0, 0], 8);
        y.set(0, 0, 300);
        let c = carry_propagate(&y);
        assert_eq!(c.column(0), vec![44, 1, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let mut z = construct_toeplitz(&[0, 0, 0, 0], 8);
            for r in 0..7 {
                for j in 0..4 {
                    z.set(r, j, rng.gen_range(0..1 << 20));
                }
            }
            let c = carry_propagate(&z);
            for j in 0..4 {
                assert_eq!(c.column_value(j), z.column_value(j));
                assert!((0..6).all(|r| c.get(r, j) < 256));
            }
        }
    }

    #[test]
    fn scalar_examples() {
        let m = Modulus::new(65521).unwrap();
        let one = offline_compile_scalar(1, &m, 8, Domain::Plain).unwrap();
        assert_eq!(one.entries(), &[1, 0, 0, 1]);
        let three = offline_compile_scalar(3, &m, 8, Domain::Plain).unwrap();
        assert_eq!(three.entries(), &[3, 0, 0, 3]);
        assert_eq!(
            direct_scalar_bat(3, &m, 8, Domain::Plain).unwrap().entries(),
            &[3, 0, 0, 3]
        );
        let zero = offline_compile_scalar(0, &m, 8, Domain::Plain).unwrap();
        assert!(zero.entries().iter().all(|&x| x == 0));

        // 65520·256 mod 65521 = 65265 = 0xFEF1.
        assert_eq!((65520u64 * 256) % 65521, 65265);
        let top = direct_scalar_bat(65520, &m, 8, Domain::Plain).unwrap();
        assert_eq!(top.column_value(1), 65265);
        assert_eq!((top.get(0, 1), top.get(1, 1)), (0xF1, 0xFE));

        assert_eq!(bat_scalar_mulmod(&three, 5, &m), 15);
        assert!(matches!(
            direct_scalar_bat(65521, &m, 8, Domain::Plain),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn compile_invariants_every_stage() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut moduli: Vec<Modulus> = [17u32, 97, 257, 7681, 65521]
            .into_iter()
            .map(|q| Modulus::new(q).unwrap())
            .collect();
        moduli.extend(
            gen_ntt_primes(28, 1 << 12, 3, &[])
                .unwrap()
                .into_iter()
                .map(|q| Modulus::new(q).unwrap()),
        );
        moduli.push(Modulus::new(2_147_483_647).unwrap());
        for m in &moduli {
            for bp in [8u32, 6, 4, 3] {
                for _ in 0..200 {
                    let a = rng.gen_range(0..m.q());
                    let mut ok = true;
                    let mat = offline_compile_scalar_traced(a, m, bp, Domain::Plain, |x| {
                        ok &= congruent(x, a, m);
                    })
                    .unwrap();
                    assert!(ok, "congruence broken for a={a} q={} bp={bp}", m.q());
                    let q = m.q() as u128;
                    for j in 0..mat.k() {
                        assert_eq!(mat.column_value(j) as u128 % q, ((a as u128) << (j as u32 * bp)) % q);
                    }
                    assert!(mat.entries().iter().all(|&e| (e as u32) < 1 << bp));
                }
            }
        }
    }

    #[test]
    fn both_compilers_agree_exhaustive_257() {
        let m = Modulus::new(257).unwrap();
        for a in 0..257 {
            let iterative = offline_compile_scalar(a, &m, 8, Domain::Plain).unwrap();
            let direct = direct_scalar_bat(a, &m, 8, Domain::Plain).unwrap();
            for b in 0..257 {
                let want = (a * b) % 257;
                assert_eq!(bat_scalar_mulmod(&iterative, b, &m), want);
                assert_eq!(bat_scalar_mulmod(&direct, b, &m), want);
            }
        }
    }

    #[test]
    fn montgomery_domain_scalar() {
        let m = Modulus::new(268_369_921).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let a = rng.gen_range(0..m.q());
            let b = rng.gen_range(0..m.q());
            let mat = direct_scalar_bat(a, &m, 8, Domain::Montgomery).unwrap();
            assert_eq!(bat_scalar_mulmod(&mat, b, &m), m.mul(a, b));
            let mat = offline_compile_scalar(a, &m, 8, Domain::Montgomery).unwrap();
            assert_eq!(bat_scalar_mulmod(&mat, b, &m), m.mul(a, b));
        }
    }

    #[test]
    fn carry_chain_lengths() {
        let m = Modulus::new(268_369_921).unwrap();
        let mat = direct_scalar_bat(123_456, &m, 8, Domain::Plain).unwrap();
        let (r, dense) = bat_scalar_mulmod_counted(&mat, 98_765, &m);
        let (s, sparse) = sparse_scalar_mulmod(123_456, 98_765, &m, 8).unwrap();
        assert_eq!(r, s);
        assert_eq!(r, m.mul(123_456, 98_765));
        assert_eq!((dense.shift_adds, sparse.shift_adds), (4, 7));
        assert_eq!((dense.multiplies, sparse.multiplies), (16, 28));
    }
}
