use serde::{Deserialize, Serialize};

use super::Modulus;
use crate::error::{Error, Result};

/// How a 64-bit value is brought back to `[0, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Hardware remainder.
    Native,
    /// Barrett with `floor(2^64 / q)`.
    Barrett64,
    /// Montgomery (64→32 bits); the result carries a `2^{-32}` factor.
    Montgomery,
}

/// Modular multiplication strategy, selectable per kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Native,
    Barrett,
    Montgomery,
    Shoup,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Native,
        Strategy::Barrett,
        Strategy::Montgomery,
        Strategy::Shoup,
    ];

    /// Reduction used when a merged 64-bit partial sum has to be canonicalized.
    pub fn reduction(self) -> Reduction {
        match self {
            Strategy::Native => Reduction::Native,
            Strategy::Barrett | Strategy::Shoup => Reduction::Barrett64,
            Strategy::Montgomery => Reduction::Montgomery,
        }
    }

    /// Domain in which compiled constants must be stored for this strategy.
    pub fn domain(self) -> Domain {
        match self {
            Strategy::Montgomery => Domain::Montgomery,
            _ => Domain::Plain,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Native => "native",
            Strategy::Barrett => "barrett",
            Strategy::Montgomery => "montgomery",
            Strategy::Shoup => "shoup",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "native" => Ok(Strategy::Native),
            "barrett" | "barrett64" => Ok(Strategy::Barrett),
            "montgomery" | "mont" => Ok(Strategy::Montgomery),
            "shoup" => Ok(Strategy::Shoup),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which representation a compiled constant lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Plain,
    /// Stored as `x·2^32 mod q` so a Montgomery reduction of the product yields a plain result.
    Montgomery,
}

impl Domain {
    pub fn reduction(self) -> Reduction {
        match self {
            Domain::Plain => Reduction::Barrett64,
            Domain::Montgomery => Reduction::Montgomery,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Domain::Plain => 0,
            Domain::Montgomery => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Domain::Plain),
            1 => Ok(Domain::Montgomery),
            t => Err(Error::Format(format!("unknown domain tag {t}"))),
        }
    }
}

/// Barrett quotient estimate `t = (a·b·m) >> s`; satisfies `t ≤ floor(ab/q) ≤ t + 1`.
#[inline]
pub fn barrett_quotient(z: u64, m: &Modulus) -> u64 {
    ((z as u128 * m.barrett_m() as u128) >> m.barrett_s()) as u64
}

/// `(a·b) mod q` via Barrett reduction with a single conditional subtraction.
#[inline]
pub fn barrett_mulmod(a: u32, b: u32, m: &Modulus) -> u32 {
    debug_assert!(a < m.q() && b < m.q(), "barrett_mulmod operands must be reduced");
    barrett_reduce(a as u64 * b as u64, m)
}

/// Barrett reduction of a double-width product `z < q^2`.
#[inline]
pub fn barrett_reduce(z: u64, m: &Modulus) -> u32 {
    debug_assert!(z < (1u64 << m.barrett_s()));
    let t = barrett_quotient(z, m);
    let mut r = z - t * m.q() as u64;
    if r >= m.q() as u64 {
        r -= m.q() as u64;
    }
    r as u32
}

/// Montgomery reduction of a 64-bit value to `B ≡ z·2^{-32} (mod q)` with `B ∈ [0, 2q)`.
///
/// The upper half of `t·q` is assembled from four 16×16-bit products. The high word of `z`
/// is folded below `q` first so the `[0, 2q)` bound holds over the full 64-bit domain.
#[inline]
pub fn montgomery_reduce64(z: u64, m: &Modulus) -> u32 {
    let q = m.q();
    let z_lo = z as u32;
    let mut z_hi = (z >> 32) as u32;
    if z_hi >= q {
        z_hi %= q;
    }
    let t = z_lo.wrapping_mul(m.mont_qinv());
    let (t_lo, t_hi) = (t & 0xffff, t >> 16);

    let p_hi = t_hi * m.q_hi();
    let p_lo = t_lo * m.q_lo();
    let p_m_hi = t_hi * m.q_lo();
    let p_m_lo = t_lo * m.q_hi();

    let mid_lo = (p_m_hi & 0xffff) + (p_m_lo & 0xffff) + (p_lo >> 16);
    let mid_hi = (p_m_hi >> 16) + (p_m_lo >> 16) + (mid_lo >> 16);
    // floor(t·q / 2^32) < q
    let t_final = p_hi + mid_hi;

    z_hi + q - t_final
}

/// Canonical reduction of a 64-bit value to `[0, q)`.
///
/// `Montgomery` returns `z·2^{-32} mod q`; callers compensate through [`Domain::Montgomery`]
/// constants.
#[inline]
pub fn reduce64(z: u64, m: &Modulus, strategy: Reduction) -> u32 {
    let q = m.q();
    match strategy {
        Reduction::Native => (z % q as u64) as u32,
        Reduction::Barrett64 => {
            let t = ((z as u128 * m.barrett64_m() as u128) >> 64) as u64;
            let mut r = z - t * q as u64;
            if r >= q as u64 {
                r -= q as u64;
            }
            r as u32
        }
        Reduction::Montgomery => {
            let b = montgomery_reduce64(z, m);
            if b >= q {
                b - q
            } else {
                b
            }
        }
    }
}

/// `floor(b·2^32 / q)`.
#[inline]
pub fn shoup_precompute(b: u32, m: &Modulus) -> u64 {
    ((b as u64) << 32) / m.q() as u64
}

/// `(a·b) mod q` using the precomputed companion of a fixed `b`.
#[inline]
pub fn shoup_mulmod(a: u32, b: u32, b_shoup: u64, m: &Modulus) -> u32 {
    debug_assert!(a < m.q() && b < m.q());
    let q = m.q() as u64;
    let quot = (a as u64 * b_shoup) >> 32;
    let r = (a as u64 * b as u64).wrapping_sub(quot * q);
    (if r >= q { r - q } else { r }) as u32
}

/// A known multiplicand prepared for a strategy (Shoup companion or Montgomery form).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MulOperand {
    value: u32,
    stored: u32,
    companion: u64,
}

impl MulOperand {
    pub fn new(b: u32, m: &Modulus, strategy: Strategy) -> Self {
        match strategy {
            Strategy::Shoup => Self {
                value: b,
                stored: b,
                companion: shoup_precompute(b, m),
            },
            Strategy::Montgomery => Self {
                value: b,
                stored: m.to_montgomery(b),
                companion: 0,
            },
            _ => Self {
                value: b,
                stored: b,
                companion: 0,
            },
        }
    }

    /// The plain residue this operand represents.
    pub fn value(&self) -> u32 {
        self.value
    }

    #[inline]
    pub fn mul(&self, a: u32, m: &Modulus, strategy: Strategy) -> u32 {
        match strategy {
            Strategy::Native => m.mul(a, self.stored),
            Strategy::Barrett => barrett_mulmod(a, self.stored, m),
            Strategy::Montgomery => reduce64(a as u64 * self.stored as u64, m, Reduction::Montgomery),
            Strategy::Shoup => shoup_mulmod(a, self.stored, self.companion, m),
        }
    }
}

impl Modulus {
    /// `(a·b) mod q` for two runtime operands under the chosen strategy.
    #[inline]
    pub fn mul_with(&self, a: u32, b: u32, strategy: Strategy) -> u32 {
        match strategy {
            Strategy::Native => self.mul(a, b),
            Strategy::Barrett => barrett_mulmod(a, b, self),
            Strategy::Montgomery => {
                // (ab·2^-32)·(2^64)·2^-32 = ab
                let x = reduce64(a as u64 * b as u64, self, Reduction::Montgomery);
                reduce64(x as u64 * self.mont_r2() as u64, self, Reduction::Montgomery)
            }
            Strategy::Shoup => shoup_mulmod(a, b, shoup_precompute(b, self), self),
        }
    }
}

/// Element-wise residue operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VecOp {
    Add,
    Sub,
    Mul,
}

pub fn vec_mod_elementwise(op: VecOp, a: &[u32], b: &[u32], m: &Modulus, strategy: Strategy) -> Result<Vec<u32>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "element-wise operands have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if let Some(x) = a.iter().chain(b).find(|&&x| x >= m.q()) {
        return Err(Error::OutOfRange(format!("residue {x} not below q = {}", m.q())));
    }
    let out = match op {
        VecOp::Add => a.iter().zip(b).map(|(&x, &y)| m.add(x, y)).collect(),
        VecOp::Sub => a.iter().zip(b).map(|(&x, &y)| m.sub(x, y)).collect(),
        VecOp::Mul => a.iter().zip(b).map(|(&x, &y)| m.mul_with(x, y, strategy)).collect(),
    };
    Ok(out)
}
