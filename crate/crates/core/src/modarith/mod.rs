//! Word-level modular arithmetic: moduli with precomputed reduction constants, the
//! Barrett / Montgomery / Shoup reduction strategies, chunk decomposition and
//! vectorized residue operations.

mod chunk;
mod params;
mod prime;
mod reduce;

pub use chunk::{chunk_decompose, chunk_merge, chunks_for, ChunkTensor, MAX_BP};
pub use params::{ParamSet, ParamSetName};
pub use prime::{
    find_primitive_root, gen_ntt_prime, gen_ntt_primes, has_exact_order, inv_mod, is_prime, miller_rabin, pow_mod,
};
pub use reduce::{
    barrett_mulmod, barrett_quotient, barrett_reduce, montgomery_reduce64, reduce64, shoup_mulmod, shoup_precompute,
    vec_mod_elementwise, Domain, MulOperand, Reduction, Strategy, VecOp,
};

use crate::error::{Error, Result};

/// A prime modulus `q < 2^31` together with every constant the reduction strategies need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus {
    q: u32,
    bits: u32,
    barrett_s: u32,
    barrett_m: u64,
    barrett64_m: u64,
    mont_qinv: u32,
    mont_r: u32,
    mont_r2: u32,
    q_lo: u32,
    q_hi: u32,
}

impl Modulus {
    /// Validates primality and range, then precomputes all reduction constants.
    pub fn new(q: u32) -> Result<Self> {
        if q >= 1 << 31 {
            return Err(Error::OutOfRange(format!("modulus {q} must be below 2^31")));
        }
        if q <= 2 {
            return Err(Error::OutOfRange(format!("modulus {q} must exceed 2")));
        }
        if let Err(witness) = miller_rabin(q as u64) {
            return Err(Error::NotPrime {
                value: q as u64,
                witness,
            });
        }
        let bits = 32 - q.leading_zeros();
        let barrett_s = 2 * bits;
        let barrett_m = (1u64 << barrett_s) / q as u64;
        let barrett64_m = ((1u128 << 64) / q as u128) as u64;
        let mont_qinv = inv_mod(q as u64, 1 << 32).expect("odd q is invertible mod 2^32") as u32;
        let mont_r = ((1u64 << 32) % q as u64) as u32;
        let mont_r2 = ((1u128 << 64) % q as u128) as u32;
        Ok(Self {
            q,
            bits,
            barrett_s,
            barrett_m,
            barrett64_m,
            mont_qinv,
            mont_r,
            mont_r2,
            q_lo: q & 0xffff,
            q_hi: q >> 16,
        })
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.q
    }

    /// Bit width of q, i.e. `ceil(log2 q)` for a prime q.
    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn barrett_s(&self) -> u32 {
        self.barrett_s
    }

    #[inline]
    pub fn barrett_m(&self) -> u64 {
        self.barrett_m
    }

    /// `floor(2^64 / q)`, used for reducing arbitrary 64-bit values.
    #[inline]
    pub fn barrett64_m(&self) -> u64 {
        self.barrett64_m
    }

    /// `q^{-1} mod 2^32`.
    #[inline]
    pub fn mont_qinv(&self) -> u32 {
        self.mont_qinv
    }

    /// `2^32 mod q`.
    #[inline]
    pub fn mont_r(&self) -> u32 {
        self.mont_r
    }

    /// `2^64 mod q`.
    #[inline]
    pub fn mont_r2(&self) -> u32 {
        self.mont_r2
    }

    #[inline]
    pub fn q_lo(&self) -> u32 {
        self.q_lo
    }

    #[inline]
    pub fn q_hi(&self) -> u32 {
        self.q_hi
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    /// Reference product `(a·b) mod q` with a hardware divide.
    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    pub fn pow(&self, base: u32, exp: u64) -> u32 {
        pow_mod(base as u64, exp, self.q as u64) as u32
    }

    pub fn inv(&self, a: u32) -> Result<u32> {
        inv_mod(a as u64, self.q as u64)
            .map(|x| x as u32)
            .ok_or_else(|| Error::Domain(format!("{a} is not invertible modulo {}", self.q)))
    }

    /// `a·2^32 mod q`, the Montgomery-form image of `a`.
    #[inline]
    pub fn to_montgomery(&self, a: u32) -> u32 {
        self.mul(a, self.mont_r)
    }

    /// Representation of a residue in the given constant domain.
    #[inline]
    pub fn to_domain(&self, a: u32, domain: Domain) -> u32 {
        match domain {
            Domain::Plain => a,
            Domain::Montgomery => self.to_montgomery(a),
        }
    }

    /// Number of `bp`-bit chunks per residue.
    #[inline]
    pub fn chunks(&self, bp: u32) -> usize {
        chunks_for(self.bits, bp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_for_17() {
        let m = Modulus::new(17).unwrap();
        assert_eq!(m.barrett_s(), 10);
        assert_eq!(m.barrett_m(), 1024 / 17);
        assert_eq!(m.barrett_m(), 60);
        assert_eq!(m.mont_qinv(), 4_042_322_161);
        assert_eq!((17u64 * m.mont_qinv() as u64) % (1 << 32), 1);
        assert_eq!(m.q_hi() * 65536 + m.q_lo(), 17);
    }

    #[test]
    fn invariants_hold_for_assorted_primes() {
        for q in [3u32, 17, 97, 257, 7681, 65521, 268_369_921, 2_147_483_647] {
            let m = Modulus::new(q).unwrap();
            let s = m.barrett_s();
            assert!(m.barrett_m() as u128 * q as u128 <= 1u128 << s);
            assert!((1u128 << s) < (m.barrett_m() as u128 + 1) * q as u128);
            assert_eq!((m.mont_qinv() as u64 * q as u64) & 0xffff_ffff, 1);
            assert_eq!(m.q_hi() * 65536 + m.q_lo(), q);
            assert_eq!(m.mont_r2() as u128, (1u128 << 64) % q as u128);
        }
    }

    #[test]
    fn rejects_composites_and_wide_moduli() {
        assert!(matches!(Modulus::new(4), Err(Error::NotPrime { value: 4, .. })));
        assert!(matches!(Modulus::new(91), Err(Error::NotPrime { .. })));
        assert!(matches!(Modulus::new(1 << 31), Err(Error::OutOfRange(_))));
        assert!(matches!(Modulus::new(4_294_967_291), Err(Error::OutOfRange(_))));
        assert!(Modulus::new(2).is_err());
    }
}
