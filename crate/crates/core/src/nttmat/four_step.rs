use super::{check_psi, twiddle_matrix};
use crate::error::{Error, Result};
use crate::lpmm::{KnownMatrix, OpCount};
use crate::matrix::ResidueMatrix;
use crate::modarith::{Modulus, MulOperand, Strategy};

/// The classic four-step baseline with an explicit runtime transpose.
///
/// With `j = rC + c` and `k = k1 + R·k2`: pre-twist by `ψ^j`, length-`R` transforms down the
/// columns, twiddle by `ω^{c·k1}`, transpose, then length-`C` transforms. The transpose
/// leaves `â` in natural order, so no further reorder is needed.
#[derive(Debug, Clone)]
pub struct FourStepPlan {
    n: usize,
    r: usize,
    c: usize,
    modulus: Modulus,
    strategy: Strategy,
    twist: Vec<MulOperand>,
    tf_r: KnownMatrix,
    twiddle: Vec<MulOperand>,
    tf_c: KnownMatrix,
}

impl FourStepPlan {
    pub fn new(r: usize, c: usize, m: &Modulus, psi: u32, bp: u32, strategy: Strategy) -> Result<Self> {
        let n = r * c;
        check_psi(n, m, psi)?;
        if !r.is_power_of_two() || !c.is_power_of_two() {
            return Err(Error::Shape(format!("{r}x{c} split must use powers of two")));
        }
        let omega = m.mul(psi, psi);
        let twist = (0..n)
            .map(|j| MulOperand::new(m.pow(psi, j as u64), m, strategy))
            .collect();
        let tf_r = KnownMatrix::compile(&twiddle_matrix(r, m.pow(omega, c as u64), m), m, bp, strategy)?;
        let twiddle = (0..n)
            .map(|i| MulOperand::new(m.pow(omega, ((i / c) * (i % c)) as u64), m, strategy))
            .collect();
        let tf_c = KnownMatrix::compile(&twiddle_matrix(c, m.pow(omega, r as u64), m), m, bp, strategy)?;
        Ok(Self {
            n,
            r,
            c,
            modulus: *m,
            strategy,
            twist,
            tf_r,
            twiddle,
            tf_c,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Natural-order `â`.
    pub fn run(&self, a: &[u32]) -> Result<(Vec<u32>, OpCount)> {
        if a.len() != self.n {
            return Err(Error::Shape(format!(
                "plan for N = {} given {} values",
                self.n,
                a.len()
            )));
        }
        let (m, s) = (&self.modulus, self.strategy);
        if let Some(&x) = a.iter().find(|&&x| x >= m.q()) {
            return Err(Error::OutOfRange(format!("{x} is not a residue modulo {}", m.q())));
        }
        let mut ops = OpCount::default();
        let twisted = a.iter().zip(&self.twist).map(|(&x, w)| w.mul(x, m, s)).collect();
        let (t, o1) = self
            .tf_r
            .mul_left(&ResidueMatrix::from_vec(self.r, self.c, twisted)?, None)?;
        let scaled: Vec<u32> = t
            .as_slice()
            .iter()
            .zip(&self.twiddle)
            .map(|(&x, w)| w.mul(x, m, s))
            .collect();
        let u = ResidueMatrix::from_vec(self.r, self.c, scaled)?.transpose();
        let (v, o2) = self.tf_c.mul_left(&u, None)?;
        ops += o1 + o2;
        ops.word_mults += 2 * self.n as u64;
        ops.perm_ops += self.n as u64;
        Ok((v.into_vec(), ops))
    }
}

/// One-shot four-step transform (compiles a plan per call).
pub fn four_step_ntt(
    a: &[u32],
    r: usize,
    c: usize,
    m: &Modulus,
    psi: u32,
    bp: u32,
    strategy: Strategy,
) -> Result<(Vec<u32>, OpCount)> {
    if r * c != a.len() {
        return Err(Error::Shape(format!("{r}x{c} does not split N = {}", a.len())));
    }
    FourStepPlan::new(r, c, m, psi, bp, strategy)?.run(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modarith::{find_primitive_root, gen_ntt_prime};
    use crate::nttmat::naive_negacyclic_ntt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (r, c) in [(1, 16), (16, 1), (2, 2), (16, 16), (4, 32), (32, 4)] {
            let n = r * c;
            let m = Modulus::new(gen_ntt_prime(28, n).unwrap()).unwrap();
            let psi = find_primitive_root(&m, 2 * n as u64).unwrap();
            let a: Vec<u32> = (0..n).map(|_| rng.gen_range(0..m.q())).collect();
            let expect = naive_negacyclic_ntt(&a, &m, psi).unwrap();
            for s in Strategy::ALL {
                let (out, ops) = four_step_ntt(&a, r, c, &m, psi, 8, s).unwrap();
                assert_eq!(out, expect, "{r}x{c} {s}");
                assert_eq!(ops.perm_ops, n as u64);
            }
        }
        let m = Modulus::new(17).unwrap();
        assert!(four_step_ntt(&[0; 4], 2, 4, &m, 2, 8, Strategy::Barrett).is_err());
    }
}
