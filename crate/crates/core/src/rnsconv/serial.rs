//! `RNSP` container (little-endian):
//! `"RNSP" | u16 version | u16 reserved | u32 L | u32 N | L×u32 moduli | 32-byte SHA-256 of
//! the moduli | L·N u32 residues, limb-major`.

use std::io::{Read, Write};
use std::sync::Arc;

use super::{RnsBasis, RnsPoly};
use crate::error::{Error, Result};
use crate::matrix::ResidueMatrix;

pub const RNSP_MAGIC: [u8; 4] = *b"RNSP";
pub const RNSP_VERSION: u16 = 1;

impl RnsPoly {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (l, n) = (self.basis.len(), self.degree());
        let mut out = Vec::with_capacity(16 + 4 * l + 32 + 4 * l * n);
        out.extend_from_slice(&RNSP_MAGIC);
        out.extend_from_slice(&RNSP_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(l as u32).to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for m in self.basis.moduli() {
            out.extend_from_slice(&m.q().to_le_bytes());
        }
        out.extend_from_slice(&self.basis.digest());
        for &x in self.limbs.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut at = 0usize;
        let mut take = |len: usize| -> Result<&[u8]> {
            let s = bytes
                .get(at..at + len)
                .ok_or_else(|| Error::Format("truncated RNSP data".into()))?;
            at += len;
            Ok(s)
        };
        if take(4)? != RNSP_MAGIC {
            return Err(Error::Format("bad RNSP magic".into()));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != RNSP_VERSION {
            return Err(Error::Format(format!("unsupported RNSP version {version}")));
        }
        take(2)?;
        let word = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let l = word(take(4)?) as usize;
        let n = word(take(4)?) as usize;
        let primes = (0..l).map(|_| take(4).map(word)).collect::<Result<Vec<_>>>()?;
        let basis = RnsBasis::from_primes(&primes)?;
        if take(32)? != basis.digest() {
            return Err(Error::Format("RNSP basis digest mismatch".into()));
        }
        let len = l
            .checked_mul(n)
            .and_then(|x| x.checked_mul(4))
            .ok_or_else(|| Error::Format("RNSP size overflow".into()))?;
        let payload = take(len)?;
        if at != bytes.len() {
            return Err(Error::Format("trailing bytes after RNSP payload".into()));
        }
        let data = payload.chunks_exact(4).map(word).collect();
        RnsPoly::new(Arc::new(basis), ResidueMatrix::from_vec(l, n, data)?)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(vals in proptest::collection::vec(0u32..17, 12)) {
            let basis = Arc::new(RnsBasis::from_primes(&[17, 97, 193]).unwrap());
            let p = RnsPoly::new(basis, ResidueMatrix::from_vec(3, 4, vals).unwrap()).unwrap();
            let bytes = p.to_bytes();
            let back = RnsPoly::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn rejects_corruption() {
        let basis = Arc::new(RnsBasis::from_primes(&[17, 97]).unwrap());
        let p = RnsPoly::new(basis, ResidueMatrix::from_vec(2, 2, vec![1, 2, 3, 4]).unwrap()).unwrap();
        let good = p.to_bytes();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(RnsPoly::from_bytes(&bad).is_err());
        let mut bad = good.clone();
        bad[24] ^= 1; // digest
        assert!(RnsPoly::from_bytes(&bad).is_err());
        assert!(RnsPoly::from_bytes(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad.push(0);
        assert!(RnsPoly::from_bytes(&bad).is_err());
    }
}
