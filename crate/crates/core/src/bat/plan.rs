//! Matrix form of the transformation and its on-disk container.
//!
//! `BATP` layout (all integers little-endian):
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `b"BATP"`                        |
//! | 4      | 2    | version (`1`)                          |
//! | 6      | 1    | domain tag (0 plain, 1 Montgomery)     |
//! | 7      | 1    | `bp`                                   |
//! | 8      | 4    | modulus `q`                            |
//! | 12     | 4    | `K`                                    |
//! | 16     | 4    | `H`                                    |
//! | 20     | 4    | `V`                                    |
//! | 24     | KH·KV| dense chunks, row-major, one byte each |

use std::io::{Read, Write};

use super::{check_bp_k, scalar_block};
use crate::error::{Error, Result};
use crate::matrix::{ChunkMatrix, ResidueMatrix};
use crate::modarith::{Domain, Modulus};

pub const BATP_MAGIC: [u8; 4] = *b"BATP";
pub const BATP_VERSION: u16 = 1;
const HEADER_LEN: usize = 24;

/// A known `H×V` residue matrix compiled into its `KH×KV` dense chunk form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatMatPlan {
    h: usize,
    v: usize,
    k: usize,
    bp: u32,
    modulus: Modulus,
    domain: Domain,
    dense: ChunkMatrix,
}

impl BatMatPlan {
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bp(&self) -> u32 {
        self.bp
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dense(&self) -> &ChunkMatrix {
        &self.dense
    }

    /// Left-operand storage in bytes.
    pub fn bytes(&self) -> usize {
        self.dense.as_slice().len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.bytes());
        out.extend_from_slice(&BATP_MAGIC);
        out.extend_from_slice(&BATP_VERSION.to_le_bytes());
        out.push(self.domain.tag());
        out.push(self.bp as u8);
        out.extend_from_slice(&self.modulus.q().to_le_bytes());
        for x in [self.k, self.h, self.v] {
            out.extend_from_slice(&(x as u32).to_le_bytes());
        }
        out.extend_from_slice(self.dense.as_slice());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("BATP header needs {HEADER_LEN} bytes")));
        }
        if bytes[..4] != BATP_MAGIC {
            return Err(Error::Format("bad BATP magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != BATP_VERSION {
            return Err(Error::Format(format!("unsupported BATP version {version}")));
        }
        let domain = Domain::from_tag(bytes[6])?;
        let bp = bytes[7] as u32;
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let modulus = Modulus::new(word(8))?;
        let (k, h, v) = (word(12) as usize, word(16) as usize, word(20) as usize);
        check_bp_k(bp, k, &modulus)?;
        let payload = &bytes[HEADER_LEN..];
        let expected = k
            .checked_mul(h)
            .and_then(|x| x.checked_mul(k * v))
            .ok_or_else(|| Error::Format("BATP dimensions overflow".into()))?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "BATP payload is {} bytes, expected {expected}",
                payload.len()
            )));
        }
        if payload.iter().any(|&c| (c as u32) >> bp != 0) {
            return Err(Error::Format(format!("BATP chunk exceeds {bp} bits")));
        }
        let dense = ChunkMatrix::from_vec(k * h, k * v, payload.to_vec())?;
        Ok(Self {
            h,
            v,
            k,
            bp,
            modulus,
            domain,
            dense,
        })
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

/// Compile a known left operand with the natural chunk count for its modulus.
pub fn offline_compile_left(a: &ResidueMatrix, m: &Modulus, bp: u32, domain: Domain) -> Result<BatMatPlan> {
    offline_compile_left_k(a, m, bp, m.chunks(bp), domain)
}

/// As [`offline_compile_left`] with an explicit (possibly wider) chunk count, used when the
/// runtime operand lives under a different, wider modulus.
pub fn offline_compile_left_k(a: &ResidueMatrix, m: &Modulus, bp: u32, k: usize, domain: Domain) -> Result<BatMatPlan> {
    check_bp_k(bp, k, m)?;
    if let Some(&x) = a.as_slice().iter().find(|&&x| x >= m.q()) {
        return Err(Error::OutOfRange(format!("{x} is not a residue modulo {}", m.q())));
    }
    let (h, v) = (a.rows(), a.cols());
    let mut dense = ChunkMatrix::zeros(k * h, k * v);
    let stride = k * v;
    {
        let buf = dense.as_mut_slice();
        for r in 0..h {
            for c in 0..v {
                let at = r * k * stride + c * k;
                scalar_block(m.to_domain(a.get(r, c), domain), m, bp, k, &mut buf[at..], stride);
            }
        }
    }
    Ok(BatMatPlan {
        h,
        v,
        k,
        bp,
        modulus: *m,
        domain,
        dense,
    })
}

fn check_capacity(b: &ResidueMatrix, bp: u32, k: usize) -> Result<()> {
    let cap = bp * k as u32;
    if cap < 32 {
        if let Some(&x) = b.as_slice().iter().find(|&&x| x >> cap != 0) {
            return Err(Error::OutOfRange(format!("{x} does not fit {k} chunks of {bp} bits")));
        }
    }
    Ok(())
}

/// `B_dense[v·K + k][w]` = chunk `k` of `B[v][w]` (chunks stacked vertically).
pub fn runtime_compile_right(b: &ResidueMatrix, bp: u32, k: usize) -> Result<ChunkMatrix> {
    check_capacity(b, bp, k)?;
    let mask = (1u32 << bp) - 1;
    let w = b.cols();
    let mut out = ChunkMatrix::zeros(k * b.rows(), w);
    for v in 0..b.rows() {
        let src = b.row(v);
        for kk in 0..k {
            let shift = kk as u32 * bp;
            let dst = out.row_mut(v * k + kk);
            for (d, &x) in dst.iter_mut().zip(src) {
                *d = if shift >= 32 { 0 } else { ((x >> shift) & mask) as u8 };
            }
        }
    }
    Ok(out)
}

/// `X_dense[r][c·K + k]` = chunk `k` of `X[r][c]`: each row's values are expanded in place,
/// so a row-major buffer stays row-major. Used when the known operand is on the right.
pub fn runtime_compile_rows(x: &ResidueMatrix, bp: u32, k: usize) -> Result<ChunkMatrix> {
    check_capacity(x, bp, k)?;
    let mask = (1u32 << bp) - 1;
    let mut out = ChunkMatrix::zeros(x.rows(), k * x.cols());
    for r in 0..x.rows() {
        let dst = out.row_mut(r);
        for (c, &val) in x.row(r).iter().enumerate() {
            for kk in 0..k {
                let shift = kk as u32 * bp;
                dst[c * k + kk] = if shift >= 32 { 0 } else { ((val >> shift) & mask) as u8 };
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bat::direct_scalar_bat;
    use proptest::prelude::*;

    #[test]
    fn identity_and_zero() {
        let m = Modulus::new(65521).unwrap();
        let p = offline_compile_left(&ResidueMatrix::identity(1), &m, 8, Domain::Plain).unwrap();
        assert_eq!(p.dense().as_slice(), &[1, 0, 0, 1]);
        let z = offline_compile_left(&ResidueMatrix::zeros(3, 2), &m, 8, Domain::Plain).unwrap();
        assert!(z.dense().as_slice().iter().all(|&x| x == 0));
        assert_eq!((z.dense().rows(), z.dense().cols()), (6, 4));
    }

    #[test]
    fn blocks_match_scalar_compiler() {
        let m = Modulus::new(65521).unwrap();
        let a = ResidueMatrix::from_vec(2, 2, vec![3, 65520, 257, 40000]).unwrap();
        let p = offline_compile_left(&a, &m, 8, Domain::Plain).unwrap();
        for h in 0..2 {
            for v in 0..2 {
                let s = direct_scalar_bat(a.get(h, v), &m, 8, Domain::Plain).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        assert_eq!(p.dense().get(h * 2 + i, v * 2 + j), s.get(i, j));
                    }
                }
                for j in 0..2 {
                    let col: u64 = (0..2)
                        .map(|i| (p.dense().get(h * 2 + i, v * 2 + j) as u64) << (8 * i))
                        .sum();
                    assert_eq!(col % 65521, ((a.get(h, v) as u64) << (8 * j)) % 65521);
                }
            }
        }
    }

    #[test]
    fn right_layout() {
        let b = ResidueMatrix::from_vec(1, 1, vec![257]).unwrap();
        let d = runtime_compile_right(&b, 8, 2).unwrap();
        assert_eq!((d.rows(), d.cols()), (2, 1));
        assert_eq!(d.as_slice(), &[1, 1]);
        let z = runtime_compile_right(&ResidueMatrix::zeros(2, 3), 8, 4).unwrap();
        assert!(z.as_slice().iter().all(|&x| x == 0));
        assert!(runtime_compile_right(&ResidueMatrix::from_vec(1, 1, vec![70000]).unwrap(), 8, 2).is_err());
    }

    #[test]
    fn batp_rejects_garbage() {
        assert!(BatMatPlan::from_bytes(b"BATQ").is_err());
        let m = Modulus::new(17).unwrap();
        let p = offline_compile_left(&ResidueMatrix::identity(2), &m, 8, Domain::Plain).unwrap();
        let mut bytes = p.to_bytes();
        bytes.push(0);
        assert!(BatMatPlan::from_bytes(&bytes).is_err());
        let mut bytes = p.to_bytes();
        bytes[0] = b'X';
        assert!(BatMatPlan::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn right_merge_roundtrip(vals in proptest::collection::vec(0u32..(1 << 28), 12)) {
            let b = ResidueMatrix::from_vec(3, 4, vals.clone()).unwrap();
            let d = runtime_compile_right(&b, 8, 4).unwrap();
            for v in 0..3 {
                for w in 0..4 {
                    let merged: u32 = (0..4).map(|k| (d.get(v * 4 + k, w) as u32) << (8 * k)).sum();
                    prop_assert_eq!(merged, b.get(v, w));
                }
            }
            let r = runtime_compile_rows(&b, 8, 4).unwrap();
            for v in 0..3 {
                for w in 0..4 {
                    let merged: u32 = (0..4).map(|k| (r.get(v, w * 4 + k) as u32) << (8 * k)).sum();
                    prop_assert_eq!(merged, b.get(v, w));
                }
            }
        }

        #[test]
        fn batp_roundtrip_byte_identical(vals in proptest::collection::vec(0u32..268_369_921, 6), mont in any::<bool>()) {
            let m = Modulus::new(268_369_921).unwrap();
            let a = ResidueMatrix::from_vec(2, 3, vals).unwrap();
            let domain = if mont { Domain::Montgomery } else { Domain::Plain };
            let p = offline_compile_left(&a, &m, 8, domain).unwrap();
            let bytes = p.to_bytes();
            let back = BatMatPlan::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
