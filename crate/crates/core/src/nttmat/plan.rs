//! The compiled three-step transform.
//!
//! With the input reshaped row-major as `A[r][c] = a[rC + c]` and the output read row-major,
//! position `(r', c')` holds `â[k1 + R·k2]` where `k1 = brev_R(r')` and `k2 = brev_C(c')`.
//! Expanding `ψ^{(2k+1)(rC+c)}` and dropping `ψ^{2N} = 1` gives
//!
//! ```text
//! Out = (L @ A ⊙ M) @ T
//! L[r'][r] = ψ^{C(2k1+1)r}    (twisted length-R transform, rows permuted)
//! M[r'][c] = ψ^{(2k1+1)c}     (rows permuted)
//! T[c][c'] = ψ^{2R·k2·c}      (length-C transform, columns permuted)
//! ```
//!
//! Every permutation lives inside a constant, so the runtime never moves data. The inverse
//! runs the conjugate steps in reverse order with `N^{-1}` folded into its last matrix.

use super::{brev, check_psi, log2_exact, twiddle_matrix};
use crate::error::{Error, Result};
use crate::lpmm::{Fault, KnownMatrix, OpCount};
use crate::matrix::ResidueMatrix;
use crate::modarith::{find_primitive_root, Modulus, MulOperand, Strategy};

/// Compiled constants for one `(N, R, C, q, strategy)`.
#[derive(Debug, Clone)]
pub struct NttPlan {
    n: usize,
    r: usize,
    c: usize,
    bp: u32,
    modulus: Modulus,
    psi: u32,
    strategy: Strategy,
    left: KnownMatrix,
    mid: Vec<MulOperand>,
    /// `Tᵀ`, consumed as `Y @ (Tᵀ)ᵀ`.
    right_t: KnownMatrix,
    inv_right_t: KnownMatrix,
    inv_mid: Vec<MulOperand>,
    inv_left: KnownMatrix,
}

/// Default split: `R = 2^{ceil(log2 N / 2)}` capped at 128.
pub fn default_split(n: usize) -> Result<(usize, usize)> {
    let bits = log2_exact(n)?;
    let r = (1usize << bits.div_ceil(2)).min(128);
    Ok((r, n / r))
}

/// Compile with the canonical root `ψ` (first primitive `2N`-th root found).
pub fn compile_ntt_plan(n: usize, r: usize, c: usize, m: &Modulus, bp: u32, strategy: Strategy) -> Result<NttPlan> {
    log2_exact(n)?;
    let psi = find_primitive_root(m, 2 * n as u64)?;
    compile_ntt_plan_with_psi(n, r, c, m, psi, bp, strategy)
}

pub fn compile_ntt_plan_with_psi(
    n: usize,
    r: usize,
    c: usize,
    m: &Modulus,
    psi: u32,
    bp: u32,
    strategy: Strategy,
) -> Result<NttPlan> {
    if r * c != n {
        return Err(Error::Shape(format!("{r}x{c} does not split N = {n}")));
    }
    let (rb, cb) = (log2_exact(r)?, log2_exact(c)?);
    check_psi(n, m, psi)?;
    let two_n = 2 * n as u64;
    let pw = |e: u64| m.pow(psi, e % two_n);
    let npw = |e: u64| m.pow(psi, (two_n - e % two_n) % two_n);
    let odd = |row: usize| 2 * brev(row, rb) as u64 + 1;
    let n_inv = m.inv(n as u32 % m.q())?;

    let left = ResidueMatrix::from_fn(r, r, |rp, rr| pw(c as u64 * odd(rp) * rr as u64));
    let mid = ResidueMatrix::from_fn(r, c, |rp, cc| pw(odd(rp) * cc as u64));
    // stored transposed: right_t[c'][c] = T[c][c']
    let right_t = ResidueMatrix::from_fn(c, c, |cp, cc| pw(2 * (r * brev(cp, cb) * cc) as u64));

    let inv_right_t = ResidueMatrix::from_fn(c, c, |cc, cp| npw(2 * (r * brev(cp, cb) * cc) as u64));
    let inv_mid = ResidueMatrix::from_fn(r, c, |rp, cc| npw(odd(rp) * cc as u64));
    let inv_left = ResidueMatrix::from_fn(r, r, |rr, rp| m.mul(n_inv, npw(c as u64 * odd(rp) * rr as u64)));

    let prep = |x: &ResidueMatrix| -> Vec<MulOperand> {
        x.as_slice().iter().map(|&v| MulOperand::new(v, m, strategy)).collect()
    };
    Ok(NttPlan {
        n,
        r,
        c,
        bp,
        modulus: *m,
        psi,
        strategy,
        left: KnownMatrix::compile(&left, m, bp, strategy)?,
        mid: prep(&mid),
        right_t: KnownMatrix::compile(&right_t, m, bp, strategy)?,
        inv_right_t: KnownMatrix::compile(&inv_right_t, m, bp, strategy)?,
        inv_mid: prep(&inv_mid),
        inv_left: KnownMatrix::compile(&inv_left, m, bp, strategy)?,
    })
}

impl NttPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn bp(&self) -> u32 {
        self.bp
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn psi(&self) -> u32 {
        self.psi
    }

    /// `ω = ψ²`.
    pub fn omega(&self) -> u32 {
        self.modulus.mul(self.psi, self.psi)
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Bytes held by the compiled matrix constants (both directions).
    pub fn bytes(&self) -> usize {
        [&self.left, &self.right_t, &self.inv_right_t, &self.inv_left]
            .iter()
            .map(|k| k.bytes())
            .sum()
    }

    /// Unpermuted step-3 base `[ω_C^{k·c}]`, `ω_C = ψ^{2R}`; symmetric by construction.
    pub fn step3_base(&self) -> ResidueMatrix {
        twiddle_matrix(self.c, self.modulus.pow(self.psi, 2 * self.r as u64), &self.modulus)
    }

    /// Unpermuted, untwisted step-1 base `[ω_R^{k·r}]`, `ω_R = ψ^{2C}`. The compiled step-1
    /// matrix is this base times `diag(ψ^{C·r})`, rows permuted.
    pub fn step1_base(&self) -> ResidueMatrix {
        twiddle_matrix(self.r, self.modulus.pow(self.psi, 2 * self.c as u64), &self.modulus)
    }

    fn check_input(&self, a: &[u32]) -> Result<ResidueMatrix> {
        if a.len() != self.n {
            return Err(Error::Shape(format!(
                "plan for N = {} given {} values",
                self.n,
                a.len()
            )));
        }
        if let Some(&x) = a.iter().find(|&&x| x >= self.modulus.q()) {
            return Err(Error::OutOfRange(format!(
                "{x} is not a residue modulo {}",
                self.modulus.q()
            )));
        }
        ResidueMatrix::from_vec(self.r, self.c, a.to_vec())
    }

    fn pointwise(&self, x: &ResidueMatrix, w: &[MulOperand]) -> Result<ResidueMatrix> {
        let (m, s) = (&self.modulus, self.strategy);
        let v = x.as_slice().iter().zip(w).map(|(&x, w)| w.mul(x, m, s)).collect();
        ResidueMatrix::from_vec(x.rows(), x.cols(), v)
    }

    /// Forward transform with operation counts. `fault` corrupts one step-3 accumulator.
    pub fn forward(&self, a: &[u32], fault: Option<Fault>) -> Result<(Vec<u32>, OpCount)> {
        let x = self.check_input(a)?;
        let (y, o1) = self.left.mul_left(&x, None)?;
        let y = self.pointwise(&y, &self.mid)?;
        let (out, o3) = self.right_t.mul_right_t(&y, fault)?;
        let mut ops = o1 + o3;
        ops.word_mults += self.n as u64;
        Ok((out.into_vec(), ops))
    }

    /// Inverse transform of a bit-reversed spectrum.
    pub fn inverse(&self, a_hat: &[u32], fault: Option<Fault>) -> Result<(Vec<u32>, OpCount)> {
        let x = self.check_input(a_hat)?;
        let (y, o1) = self.inv_right_t.mul_right_t(&x, None)?;
        let y = self.pointwise(&y, &self.inv_mid)?;
        let (out, o3) = self.inv_left.mul_left(&y, fault)?;
        let mut ops = o1 + o3;
        ops.word_mults += self.n as u64;
        Ok((out.into_vec(), ops))
    }
}

/// Forward layout-invariant transform (bit-reversed output).
pub fn ntt3_layout_invariant(a: &[u32], plan: &NttPlan) -> Result<Vec<u32>> {
    plan.forward(a, None).map(|(v, _)| v)
}

pub fn intt3(a_hat: &[u32], plan: &NttPlan) -> Result<Vec<u32>> {
    plan.inverse(a_hat, None).map(|(v, _)| v)
}

/// Product modulo `(X^N + 1, q)` through the compiled transform.
pub fn negacyclic_polymul(a: &[u32], b: &[u32], plan: &NttPlan) -> Result<Vec<u32>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("operands of length {} and {}", a.len(), b.len())));
    }
    let fa = ntt3_layout_invariant(a, plan)?;
    let fb = ntt3_layout_invariant(b, plan)?;
    let m = plan.modulus();
    let prod: Vec<u32> = fa
        .iter()
        .zip(&fb)
        .map(|(&x, &y)| m.mul_with(x, y, plan.strategy()))
        .collect();
    intt3(&prod, plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modarith::gen_ntt_prime;
    use crate::nttmat::{bit_reverse_perm, ct_ntt, naive_negacyclic_ntt, schoolbook_negacyclic};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, q: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
        (0..n).map(|_| rng.gen_range(0..q)).collect()
    }

    #[test]
    fn tiny_plan_sweep() {
        let m = Modulus::new(17).unwrap();
        let plan = compile_ntt_plan_with_psi(4, 2, 2, &m, 2, 8, Strategy::Barrett).unwrap();
        let brev = bit_reverse_perm(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let a = rand_vec(4, 17, &mut rng);
            let expect = brev.apply(&naive_negacyclic_ntt(&a, &m, 2).unwrap()).unwrap();
            assert_eq!(ntt3_layout_invariant(&a, &plan).unwrap(), expect);
        }
        let trivial = compile_ntt_plan(1, 1, 1, &m, 8, Strategy::Barrett).unwrap();
        assert_eq!(ntt3_layout_invariant(&[9], &trivial).unwrap(), vec![9]);
        assert_eq!(intt3(&[9], &trivial).unwrap(), vec![9]);
    }

    #[test]
    fn agrees_with_ct_and_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in [16usize, 64, 256] {
            let m = Modulus::new(gen_ntt_prime(28, n).unwrap()).unwrap();
            let (r, c) = default_split(n).unwrap();
            for s in Strategy::ALL {
                let plan = compile_ntt_plan(n, r, c, &m, 8, s).unwrap();
                let swapped = compile_ntt_plan(n, c * 2, r / 2, &m, 8, s).unwrap();
                for _ in 0..10 {
                    let a = rand_vec(n, m.q(), &mut rng);
                    let (out, ops) = plan.forward(&a, None).unwrap();
                    assert_eq!(out, ct_ntt(&a, &m, plan.psi(), s).unwrap().0, "n={n} {s}");
                    assert_eq!(ops.perm_ops, 0);
                    assert_eq!(ops.word_mults, (n * (r + c) + n) as u64);
                    assert_eq!(ntt3_layout_invariant(&a, &swapped).unwrap(), out);
                    assert_eq!(intt3(&out, &plan).unwrap(), a);
                }
                let mut delta = vec![0; n];
                delta[0] = 1;
                assert_eq!(
                    intt3(&ntt3_layout_invariant(&delta, &plan).unwrap(), &plan).unwrap(),
                    delta
                );
                assert_eq!(ntt3_layout_invariant(&vec![0; n], &plan).unwrap(), vec![0; n]);
            }
        }
    }

    #[test]
    fn linearity_and_polymul() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for n in [8usize, 64] {
            let m = Modulus::new(gen_ntt_prime(28, n).unwrap()).unwrap();
            let (r, c) = default_split(n).unwrap();
            let plan = compile_ntt_plan(n, r, c, &m, 8, Strategy::Montgomery).unwrap();
            let a = rand_vec(n, m.q(), &mut rng);
            let b = rand_vec(n, m.q(), &mut rng);
            let sum: Vec<u32> = a.iter().zip(&b).map(|(&x, &y)| m.add(x, y)).collect();
            let fs = ntt3_layout_invariant(&sum, &plan).unwrap();
            let fa = ntt3_layout_invariant(&a, &plan).unwrap();
            let fb = ntt3_layout_invariant(&b, &plan).unwrap();
            assert!(fs.iter().zip(fa.iter().zip(&fb)).all(|(&s, (&x, &y))| s == m.add(x, y)));
            assert_eq!(
                negacyclic_polymul(&a, &b, &plan).unwrap(),
                schoolbook_negacyclic(&a, &b, &m).unwrap()
            );
            let mut delta = vec![0; n];
            delta[0] = 1;
            assert_eq!(negacyclic_polymul(&delta, &b, &plan).unwrap(), b);
        }
    }

    #[test]
    fn base_matrices() {
        let m = Modulus::new(gen_ntt_prime(28, 256).unwrap()).unwrap();
        let plan = compile_ntt_plan(256, 16, 16, &m, 8, Strategy::Barrett).unwrap();
        let b3 = plan.step3_base();
        assert_eq!(b3.transpose(), b3);
        assert_eq!(plan.step1_base(), b3);
        assert!(compile_ntt_plan(256, 8, 16, &m, 8, Strategy::Barrett).is_err());
        assert!(compile_ntt_plan(48, 6, 8, &m, 8, Strategy::Barrett).is_err());
    }
}
