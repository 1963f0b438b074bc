use serde::{Deserialize, Serialize};

use super::{gen_ntt_primes, Modulus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamSetName {
    A,
    B,
    C,
    D,
    Custom,
}

/// Polynomial degree, limb width and limb counts of an RNS parameter set.
///
/// `dnum` is carried as metadata only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSet {
    pub name: ParamSetName,
    pub n: usize,
    pub log2q: u32,
    pub limbs: usize,
    pub aux_limbs: usize,
    pub dnum: usize,
    pub batch: usize,
}

impl ParamSet {
    pub fn new(
        name: ParamSetName,
        n: usize,
        log2q: u32,
        limbs: usize,
        aux_limbs: usize,
        dnum: usize,
        batch: usize,
    ) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Config(format!("degree {n} is not a power of two")));
        }
        if !(2..=31).contains(&log2q) {
            return Err(Error::Config(format!("limb width {log2q} not in [2, 31]")));
        }
        if limbs == 0 || aux_limbs == 0 || dnum == 0 || batch == 0 {
            return Err(Error::Config(
                "limbs, aux limbs, dnum and batch must be at least 1".into(),
            ));
        }
        Ok(Self {
            name,
            n,
            log2q,
            limbs,
            aux_limbs,
            dnum,
            batch,
        })
    }

    /// The `L` source-basis moduli: distinct `log2q`-bit primes with `q ≡ 1 (mod 2N)`.
    pub fn moduli(&self) -> Result<Vec<Modulus>> {
        gen_ntt_primes(self.log2q, self.n, self.limbs, &[])?
            .into_iter()
            .map(Modulus::new)
            .collect()
    }

    /// `L′` auxiliary moduli, disjoint from [`ParamSet::moduli`].
    pub fn aux_moduli(&self) -> Result<Vec<Modulus>> {
        let src = gen_ntt_primes(self.log2q, self.n, self.limbs, &[])?;
        gen_ntt_primes(self.log2q, self.n, self.aux_limbs, &src)?
            .into_iter()
            .map(Modulus::new)
            .collect()
    }

    /// Achieved `log2 Q` of the generated source basis.
    pub fn log2_big_q(&self) -> Result<f64> {
        Ok(self.moduli()?.iter().map(|m| (m.q() as f64).log2()).sum())
    }

    pub fn label(&self) -> String {
        match self.name {
            ParamSetName::Custom => format!("custom(N={},logq={},L={})", self.n, self.log2q, self.limbs),
            named => format!("set-{named:?}"),
        }
    }
}
