//! Negacyclic NTTs: the quadratic oracle, radix-2 Cooley–Tukey, the four-step baseline and
//! the compiled layout-invariant three-step transform.
//!
//! All fast transforms emit the bit-reversed order of `â[k] = Σ_j a_j ψ^{(2k+1)j}`, so a
//! forward/inverse round trip never reorders data.

mod four_step;
mod plan;

use crate::error::{Error, Result};
use crate::lpmm::OpCount;
use crate::matrix::ResidueMatrix;
use crate::modarith::{has_exact_order, Modulus, MulOperand, Strategy};

pub use four_step::{four_step_ntt, FourStepPlan};
pub use plan::{
    compile_ntt_plan, compile_ntt_plan_with_psi, default_split, intt3, negacyclic_polymul, ntt3_layout_invariant,
    NttPlan,
};

/// A bijection on `[0, n)`; `apply` gathers `out[i] = v[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermIndex(Vec<usize>);

impl PermIndex {
    pub fn new(idx: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; idx.len()];
        for &i in &idx {
            if i >= idx.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Domain(format!("index {i} breaks the permutation")));
            }
        }
        Ok(Self(idx))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn apply<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.len() {
            return Err(Error::Shape(format!(
                "permutation of {} applied to {}",
                self.len(),
                v.len()
            )));
        }
        Ok(self.0.iter().map(|&i| v[i]).collect())
    }

    pub fn compose(&self, other: &PermIndex) -> Result<PermIndex> {
        PermIndex::new(self.apply(&other.0)?)
    }
}

pub(crate) fn log2_exact(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Shape(format!("{n} is not a power of two")));
    }
    Ok(n.trailing_zeros())
}

#[inline]
pub(crate) fn brev(i: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - bits)
    }
}

pub fn bit_reverse_perm(n: usize) -> Result<PermIndex> {
    let bits = log2_exact(n)?;
    Ok(PermIndex((0..n).map(|i| brev(i, bits)).collect()))
}

/// Within each block of `group` elements, swap offset `i` with `i XOR group/2`.
pub fn bit_complement_shuffle<T: Copy>(v: &[T], group: usize) -> Result<Vec<T>> {
    log2_exact(group)?;
    if group < 2 || !v.len().is_multiple_of(group) {
        return Err(Error::Shape(format!("group {group} does not tile length {}", v.len())));
    }
    let half = group / 2;
    Ok((0..v.len()).map(|i| v[i ^ half]).collect())
}

pub(crate) fn check_psi(n: usize, m: &Modulus, psi: u32) -> Result<()> {
    log2_exact(n)?;
    if !has_exact_order(psi as u64, 2 * n as u64, m.q() as u64) {
        return Err(Error::Domain(format!(
            "{psi} is not a primitive {}-th root of unity modulo {}",
            2 * n,
            m.q()
        )));
    }
    Ok(())
}

fn psi_powers(n: usize, m: &Modulus, psi: u32) -> Vec<u32> {
    let mut pw = Vec::with_capacity(2 * n);
    let mut x = 1u32;
    for _ in 0..2 * n {
        pw.push(x);
        x = m.mul(x, psi);
    }
    pw
}

/// `â[k] = Σ_j a_j ψ^{(2k+1)j} mod q`, natural order, quadratic time.
pub fn naive_negacyclic_ntt(a: &[u32], m: &Modulus, psi: u32) -> Result<Vec<u32>> {
    let n = a.len();
    check_psi(n, m, psi)?;
    let pw = psi_powers(n, m, psi);
    let two_n = 2 * n;
    Ok((0..n)
        .map(|k| {
            let step = 2 * k + 1;
            let mut e = 0usize;
            let mut acc = 0u128;
            for &x in a {
                acc += x as u128 * pw[e] as u128;
                e += step;
                if e >= two_n {
                    e %= two_n;
                }
            }
            (acc % m.q() as u128) as u32
        })
        .collect())
}

/// Inverse of [`naive_negacyclic_ntt`] (natural-order input).
pub fn naive_negacyclic_intt(a_hat: &[u32], m: &Modulus, psi: u32) -> Result<Vec<u32>> {
    let n = a_hat.len();
    check_psi(n, m, psi)?;
    let pw = psi_powers(n, m, psi);
    let two_n = 2 * n;
    let n_inv = m.inv(n as u32 % m.q())?;
    Ok((0..n)
        .map(|j| {
            let mut acc = 0u128;
            for (k, &x) in a_hat.iter().enumerate() {
                let e = ((2 * k + 1) * j) % two_n;
                acc += x as u128 * pw[(two_n - e) % two_n] as u128;
            }
            m.mul((acc % m.q() as u128) as u32, n_inv)
        })
        .collect())
}

/// Radix-2 Cooley–Tukey negacyclic NTT, bit-reversed output.
///
/// Each stage is written the way a vector unit runs it: scale the upper half of every
/// butterfly group by its twiddle, then combine the vector with its bit-complement
/// shuffle. That costs `N/2` multiplies and `N` moved elements per stage.
pub fn ct_ntt(a: &[u32], m: &Modulus, psi: u32, strategy: Strategy) -> Result<(Vec<u32>, OpCount)> {
    let n = a.len();
    check_psi(n, m, psi)?;
    if let Some(&x) = a.iter().find(|&&x| x >= m.q()) {
        return Err(Error::OutOfRange(format!("{x} is not a residue modulo {}", m.q())));
    }
    let bits = n.trailing_zeros();
    let tw: Vec<MulOperand> = (0..n)
        .map(|i| MulOperand::new(m.pow(psi, brev(i, bits) as u64), m, strategy))
        .collect();
    let mut v = a.to_vec();
    let mut ops = OpCount::default();
    let mut groups = 1;
    while groups < n {
        let half = n / (2 * groups);
        for g in 0..groups {
            let w = &tw[groups + g];
            for x in &mut v[g * 2 * half + half..(g + 1) * 2 * half] {
                *x = w.mul(*x, m, strategy);
            }
        }
        let shuffled = bit_complement_shuffle(&v, 2 * half)?;
        for (i, (x, &s)) in v.iter_mut().zip(&shuffled).enumerate() {
            *x = if i & half == 0 { m.add(*x, s) } else { m.sub(s, *x) };
        }
        ops.word_mults += (n / 2) as u64;
        ops.perm_ops += n as u64;
        groups *= 2;
    }
    Ok((v, ops))
}

/// Schoolbook product modulo `(X^N + 1, q)`.
pub fn schoolbook_negacyclic(a: &[u32], b: &[u32], m: &Modulus) -> Result<Vec<u32>> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::Shape(format!("operands of length {n} and {}", b.len())));
    }
    let q = m.q() as u64;
    let mut pos = vec![0u64; n];
    let mut neg = vec![0u64; n];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let p = x as u64 * y as u64 % q;
            if i + j < n {
                pos[i + j] = (pos[i + j] + p) % q;
            } else {
                neg[i + j - n] = (neg[i + j - n] + p) % q;
            }
        }
    }
    Ok(pos.iter().zip(&neg).map(|(&p, &s)| ((p + q - s) % q) as u32).collect())
}

/// Coefficients of `a(X^k) mod (X^N + 1)`.
pub fn automorphism(a: &[u32], k: usize, m: &Modulus) -> Result<Vec<u32>> {
    let n = a.len();
    log2_exact(n)?;
    if k.is_multiple_of(2) {
        return Err(Error::Domain(format!("automorphism index {k} must be odd")));
    }
    let two_n = 2 * n;
    let k = k % two_n;
    let mut out = vec![0u32; n];
    for (j, &x) in a.iter().enumerate() {
        let e = j * k % two_n;
        if e >= n {
            out[e - n] = m.neg(x);
        } else {
            out[e] = x;
        }
    }
    Ok(out)
}

/// `[root^{i·j}]` for `i, j < size`.
pub fn twiddle_matrix(size: usize, root: u32, m: &Modulus) -> ResidueMatrix {
    ResidueMatrix::from_fn(size, size, |i, j| m.pow(root, (i * j) as u64))
}
