//! Residue number system layer: CRT, fast basis conversion, rescale and limb-wise addition.

mod serial;

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lpmm::{mat_mod_mul_planned, KnownMatrix, OpCount};
use crate::matrix::ResidueMatrix;
use crate::modarith::{inv_mod, Modulus, MulOperand, Strategy};

pub use serial::{RNSP_MAGIC, RNSP_VERSION};

/// An ordered set of pairwise-coprime limb moduli with its CRT constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsBasis {
    moduli: Vec<Modulus>,
    big_q: BigUint,
    /// `(Q/q_i)^{-1} mod q_i`
    qhat_inv: Vec<u32>,
}

impl RnsBasis {
    pub fn new(moduli: Vec<Modulus>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::Config("an RNS basis needs at least one modulus".into()));
        }
        for (i, a) in moduli.iter().enumerate() {
            if moduli[..i].iter().any(|b| b.q() == a.q()) {
                return Err(Error::Config(format!("modulus {} repeats in the basis", a.q())));
            }
        }
        let big_q = moduli.iter().fold(BigUint::from(1u32), |acc, m| acc * m.q());
        let qhat_inv = moduli
            .iter()
            .map(|m| {
                let qhat = (&big_q / m.q()) % m.q();
                let r = qhat.to_u64().unwrap_or(0);
                inv_mod(r, m.q() as u64)
                    .map(|v| v as u32)
                    .ok_or_else(|| Error::Config(format!("basis is not coprime at {}", m.q())))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            moduli,
            big_q,
            qhat_inv,
        })
    }

    pub fn from_primes(primes: &[u32]) -> Result<Self> {
        Self::new(primes.iter().map(|&q| Modulus::new(q)).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn modulus(&self, i: usize) -> &Modulus {
        &self.moduli[i]
    }

    /// `Q = Π q_i`.
    pub fn big_q(&self) -> &BigUint {
        &self.big_q
    }

    pub fn qhat_inv(&self) -> &[u32] {
        &self.qhat_inv
    }

    /// `Q / q_i`.
    pub fn qhat(&self, i: usize) -> BigUint {
        &self.big_q / self.moduli[i].q()
    }

    /// SHA-256 over the little-endian moduli.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for m in &self.moduli {
            h.update(m.q().to_le_bytes());
        }
        h.finalize().into()
    }

    /// The basis with the last `count` moduli removed.
    pub fn drop_last(&self, count: usize) -> Result<Self> {
        if count >= self.len() {
            return Err(Error::Config(format!("cannot drop {count} of {} moduli", self.len())));
        }
        Self::new(self.moduli[..self.len() - count].to_vec())
    }
}

/// `L×N` limb-major residues of one polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsPoly {
    basis: Arc<RnsBasis>,
    limbs: ResidueMatrix,
}

impl RnsPoly {
    pub fn new(basis: Arc<RnsBasis>, limbs: ResidueMatrix) -> Result<Self> {
        if limbs.rows() != basis.len() {
            return Err(Error::Shape(format!(
                "{} limbs for a basis of {}",
                limbs.rows(),
                basis.len()
            )));
        }
        for (i, m) in basis.moduli().iter().enumerate() {
            if let Some(&x) = limbs.row(i).iter().find(|&&x| x >= m.q()) {
                return Err(Error::OutOfRange(format!("limb {i} holds {x} ≥ {}", m.q())));
            }
        }
        Ok(Self { basis, limbs })
    }

    pub fn zero(basis: Arc<RnsBasis>, n: usize) -> Self {
        let limbs = ResidueMatrix::zeros(basis.len(), n);
        Self { basis, limbs }
    }

    pub fn basis(&self) -> &Arc<RnsBasis> {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.limbs.cols()
    }

    pub fn limbs(&self) -> &ResidueMatrix {
        &self.limbs
    }

    pub fn limb(&self, i: usize) -> &[u32] {
        self.limbs.row(i)
    }

    pub fn into_limbs(self) -> ResidueMatrix {
        self.limbs
    }
}

/// Limb `i` = `coeffs mod q_i`.
pub fn crt_decompose(coeffs: &[BigUint], basis: &Arc<RnsBasis>) -> Result<RnsPoly> {
    if let Some(x) = coeffs.iter().find(|x| *x >= basis.big_q()) {
        return Err(Error::OutOfRange(format!("coefficient {x} is not below Q")));
    }
    let n = coeffs.len();
    let mut data = vec![0u32; basis.len() * n];
    if n > 0 {
        data.par_chunks_mut(n).zip(basis.moduli()).for_each(|(row, m)| {
            for (o, x) in row.iter_mut().zip(coeffs) {
                *o = (x % m.q()).to_u32().unwrap_or(0);
            }
        });
    }
    RnsPoly::new(basis.clone(), ResidueMatrix::from_vec(basis.len(), n, data)?)
}

fn crt_sum(p: &RnsPoly, col: usize) -> BigUint {
    let b = p.basis();
    b.moduli().iter().enumerate().fold(BigUint::zero(), |acc, (i, m)| {
        let y = m.mul(p.limbs.get(i, col), b.qhat_inv[i]);
        acc + b.qhat(i) * y
    })
}

/// The unique representatives in `[0, Q)` (big-integer oracle path).
pub fn crt_recompose(p: &RnsPoly) -> Vec<BigUint> {
    let q = p.basis().big_q();
    (0..p.degree()).into_par_iter().map(|c| crt_sum(p, c) % q).collect()
}

/// Source-to-target conversion constants with the per-target compiled operands.
#[derive(Debug, Clone)]
pub struct BasisConverter {
    source: Arc<RnsBasis>,
    target: Arc<RnsBasis>,
    strategy: Strategy,
    qhat_inv: Vec<MulOperand>,
    /// `cross[i][j] = (Q/q_i) mod p_j`, `L×L′`.
    cross: ResidueMatrix,
    /// One `1×L` compiled row per target modulus.
    rows: Vec<KnownMatrix>,
}

impl BasisConverter {
    pub fn new(source: Arc<RnsBasis>, target: Arc<RnsBasis>, bp: u32, strategy: Strategy) -> Result<Self> {
        if let Some(p) = target
            .moduli()
            .iter()
            .find(|p| source.moduli().iter().any(|q| q.q() == p.q()))
        {
            return Err(Error::Config(format!("modulus {} is in both bases", p.q())));
        }
        let qhat_inv = source
            .moduli()
            .iter()
            .zip(source.qhat_inv())
            .map(|(m, &v)| MulOperand::new(v, m, strategy))
            .collect();
        let cross = ResidueMatrix::from_fn(source.len(), target.len(), |i, j| {
            (source.qhat(i) % target.modulus(j).q()).to_u32().unwrap_or(0)
        });
        // runtime operands are residues of the (possibly wider) source moduli
        let k = source
            .moduli()
            .iter()
            .chain(target.moduli())
            .map(|m| m.chunks(bp))
            .max()
            .unwrap_or(1);
        // a chunked operand cannot be paired with Shoup companions
        let bat_strategy = if strategy == Strategy::Shoup {
            Strategy::Barrett
        } else {
            strategy
        };
        let rows = (0..target.len())
            .map(|j| {
                let row = ResidueMatrix::from_fn(1, source.len(), |_, i| cross.get(i, j));
                KnownMatrix::compile_k(&row, target.modulus(j), bp, k, bat_strategy)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            source,
            target,
            strategy,
            qhat_inv,
            cross,
            rows,
        })
    }

    pub fn source(&self) -> &Arc<RnsBasis> {
        &self.source
    }

    pub fn target(&self) -> &Arc<RnsBasis> {
        &self.target
    }

    pub fn cross_table(&self) -> &ResidueMatrix {
        &self.cross
    }

    /// `b[i][n] = a[i][n]·q̂_i^{-1} mod q_i`.
    pub fn step1(&self, p: &RnsPoly) -> Result<(ResidueMatrix, OpCount)> {
        if p.basis().moduli() != self.source.moduli() {
            return Err(Error::Config(
                "polynomial is not in the converter's source basis".into(),
            ));
        }
        let n = p.degree();
        let mut data = p.limbs.as_slice().to_vec();
        if n > 0 {
            data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                let (m, w) = (self.source.modulus(i), &self.qhat_inv[i]);
                for x in row {
                    *x = w.mul(*x, m, self.strategy);
                }
            });
        }
        let ops = OpCount {
            word_mults: (self.source.len() * n) as u64,
            ..Default::default()
        };
        Ok((ResidueMatrix::from_vec(self.source.len(), n, data)?, ops))
    }

    /// `c[j][n] = Σ_i cross[i][j]·b[i][n] mod p_j`, one matrix-engine call per target limb
    /// when `use_bat`, otherwise 64-bit accumulation.
    pub fn step2(&self, b: &ResidueMatrix, use_bat: bool) -> Result<(ResidueMatrix, OpCount)> {
        if b.rows() != self.source.len() {
            return Err(Error::Shape(format!(
                "step 2 expects {} rows, got {}",
                self.source.len(),
                b.rows()
            )));
        }
        let n = b.cols();
        let mut ops = OpCount::default();
        let mut out = Vec::with_capacity(self.target.len() * n);
        if use_bat {
            for known in &self.rows {
                let (row, o) = match known {
                    KnownMatrix::Bat { plan, reduction } => mat_mod_mul_planned(plan, b, *reduction, None)?,
                    other => other.mul_left(b, None)?,
                };
                ops += o;
                out.extend_from_slice(row.as_slice());
            }
        } else {
            let rows: Vec<Vec<u32>> = (0..self.target.len())
                .into_par_iter()
                .map(|j| {
                    let p = self.target.modulus(j).q() as u64;
                    let mut acc = vec![0u64; n];
                    for i in 0..self.source.len() {
                        let t = self.cross.get(i, j) as u64;
                        for (a, &x) in acc.iter_mut().zip(b.row(i)) {
                            *a += t * x as u64;
                        }
                    }
                    acc.into_iter().map(|a| (a % p) as u32).collect()
                })
                .collect();
            out = rows.concat();
            ops.word_mults = (self.source.len() * self.target.len() * n) as u64;
        }
        Ok((ResidueMatrix::from_vec(self.target.len(), n, out)?, ops))
    }

    /// Fast (approximate) conversion: the result equals `x + e·Q mod p_j` with `0 ≤ e < L`.
    pub fn convert(&self, p: &RnsPoly, use_bat: bool) -> Result<(RnsPoly, OpCount)> {
        let (b, o1) = self.step1(p)?;
        let (c, o2) = self.step2(&b, use_bat)?;
        Ok((RnsPoly::new(self.target.clone(), c)?, o1 + o2))
    }
}

pub fn bconv_step1(p: &RnsPoly, conv: &BasisConverter) -> Result<ResidueMatrix> {
    conv.step1(p).map(|(b, _)| b)
}

pub fn bconv_step2(b: &ResidueMatrix, conv: &BasisConverter, use_bat: bool) -> Result<ResidueMatrix> {
    conv.step2(b, use_bat).map(|(c, _)| c)
}

pub fn bconv(p: &RnsPoly, conv: &BasisConverter, use_bat: bool) -> Result<RnsPoly> {
    conv.convert(p, use_bat).map(|(c, _)| c)
}

/// Big-integer evaluation of the conversion formula, plus the per-coefficient slack
/// `e = (S − x)/Q` where `S = Σ_i [a_i·q̂_i^{-1}]_{q_i}·(Q/q_i)` and `x = S mod Q`.
pub fn bconv_oracle(p: &RnsPoly, target: &Arc<RnsBasis>) -> Result<(RnsPoly, Vec<u64>)> {
    let n = p.degree();
    let q = p.basis().big_q();
    let cols: Vec<(Vec<u32>, u64)> = (0..n)
        .into_par_iter()
        .map(|c| {
            let s = crt_sum(p, c);
            let e = (&s / q).to_u64().unwrap_or(u64::MAX);
            let res = target
                .moduli()
                .iter()
                .map(|m| (&s % m.q()).to_u32().unwrap_or(0))
                .collect();
            (res, e)
        })
        .collect();
    let limbs = ResidueMatrix::from_fn(target.len(), n, |j, c| cols[c].0[j]);
    let e = cols.iter().map(|(_, e)| *e).collect();
    Ok((RnsPoly::new(target.clone(), limbs)?, e))
}

/// Drop the last modulus `times` times: `c′_i = (c_i − c_l)·q_l^{-1} mod q_i`.
pub fn rescale(p: &RnsPoly, times: usize) -> Result<RnsPoly> {
    let mut cur = p.clone();
    for _ in 0..times {
        let l = cur.basis.len() - 1;
        if l == 0 {
            return Err(Error::Config("cannot rescale a single-limb polynomial".into()));
        }
        let basis = Arc::new(cur.basis.drop_last(1)?);
        let ql = cur.basis.modulus(l).q();
        let last = cur.limb(l).to_vec();
        let n = cur.degree();
        let mut data = cur.limbs.as_slice()[..l * n].to_vec();
        if n > 0 {
            data.par_chunks_mut(n)
                .zip(basis.moduli())
                .try_for_each(|(row, m)| -> Result<()> {
                    let inv = m.inv(ql % m.q())?;
                    for (x, &c) in row.iter_mut().zip(&last) {
                        *x = m.mul(m.sub(*x, c % m.q()), inv);
                    }
                    Ok(())
                })?;
        }
        cur = RnsPoly::new(basis.clone(), ResidueMatrix::from_vec(l, n, data)?)?;
    }
    Ok(cur)
}

/// Limb-wise `(a + b) mod q_i`.
pub fn he_add(a: &RnsPoly, b: &RnsPoly) -> Result<RnsPoly> {
    if a.basis.moduli() != b.basis.moduli() {
        return Err(Error::Config("operands live in different bases".into()));
    }
    if a.degree() != b.degree() {
        return Err(Error::Shape(format!("degrees {} and {}", a.degree(), b.degree())));
    }
    let n = a.degree();
    let mut data = a.limbs.as_slice().to_vec();
    if n > 0 {
        data.par_chunks_mut(n)
            .zip(b.limbs.as_slice().par_chunks(n))
            .zip(a.basis.moduli())
            .for_each(|((x, y), m)| {
                for (x, &y) in x.iter_mut().zip(y) {
                    *x = m.add(*x, y);
                }
            });
    }
    RnsPoly::new(a.basis.clone(), ResidueMatrix::from_vec(a.basis.len(), n, data)?)
}
