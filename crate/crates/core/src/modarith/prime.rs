//! Primality, NTT-friendly prime search and roots of unity.

use super::Modulus;
use crate::error::{Error, Result};

/// Witness set that makes Miller-Rabin deterministic for every 64-bit input.
const MR_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[inline]
pub(crate) fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// `base^exp mod m` by square-and-multiply.
pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Modular inverse via the extended Euclidean algorithm. `None` when `gcd(a, m) != 1`.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller-Rabin. On failure returns the base that witnessed compositeness
/// (0 for the trivial cases n < 2 and even n).
pub fn miller_rabin(n: u64) -> std::result::Result<(), u64> {
    if n < 2 {
        return Err(0);
    }
    for &p in &MR_BASES {
        if n == p {
            return Ok(());
        }
        if n.is_multiple_of(p) {
            return Err(p);
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &MR_BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return Err(a);
    }
    Ok(())
}

pub fn is_prime(n: u64) -> bool {
    miller_rabin(n).is_ok()
}

/// Largest prime with exactly `bits` bits and `q ≡ 1 (mod 2n)`.
pub fn gen_ntt_prime(bits: u32, n: usize) -> Result<u32> {
    gen_ntt_primes(bits, n, 1, &[]).map(|v| v[0])
}

/// `count` distinct primes of exactly `bits` bits with `q ≡ 1 (mod 2n)`, scanning downward
/// from `2^bits - 1` and skipping anything in `exclude`.
pub fn gen_ntt_primes(bits: u32, n: usize, count: usize, exclude: &[u32]) -> Result<Vec<u32>> {
    if !(2..=31).contains(&bits) {
        return Err(Error::OutOfRange(format!("prime width {bits} not in [2, 31]")));
    }
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Domain(format!("degree {n} is not a power of two")));
    }
    let step = 2 * n as u64;
    let lo = 1u64 << (bits - 1);
    let hi = (1u64 << bits) - 1;
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    // Largest candidate ≡ 1 (mod step) that is ≤ hi.
    if hi < 1 {
        return Err(Error::Exhausted(format!("no {bits}-bit prime ≡ 1 mod {step}")));
    }
    let mut cand = hi - ((hi - 1) % step);
    while cand >= lo {
        if cand > 2 && is_prime(cand) && !exclude.contains(&(cand as u32)) {
            out.push(cand as u32);
            if out.len() == count {
                return Ok(out);
            }
        }
        if cand < step {
            break;
        }
        cand -= step;
    }
    Err(Error::Exhausted(format!(
        "found only {} of {count} {bits}-bit primes ≡ 1 mod {step}",
        out.len()
    )))
}

fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// True iff `w` has multiplicative order exactly `order` modulo `q`.
pub fn has_exact_order(w: u64, order: u64, q: u64) -> bool {
    if pow_mod(w, order, q) != 1 {
        return false;
    }
    distinct_prime_factors(order)
        .into_iter()
        .all(|p| pow_mod(w, order / p, q) != 1)
}

/// A primitive `order`-th root of unity modulo `m.q()`. Deterministic: the first candidate
/// `x^((q-1)/order)`, x = 2, 3, …, of exact order wins.
pub fn find_primitive_root(m: &Modulus, order: u64) -> Result<u32> {
    let q = m.q() as u64;
    if order == 0 || !(q - 1).is_multiple_of(order) {
        return Err(Error::Domain(format!("order {order} does not divide q-1 = {}", q - 1)));
    }
    if order == 1 {
        return Ok(1);
    }
    let cofactor = (q - 1) / order;
    for x in 2..q {
        let w = pow_mod(x, cofactor, q);
        if has_exact_order(w, order, q) {
            return Ok(w as u32);
        }
    }
    Err(Error::Exhausted(format!("no primitive {order}-th root modulo {q}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn miller_rabin_matches_trial_division() {
        for n in 0..20_000u64 {
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
        // Strong pseudoprimes to several small bases.
        assert!(!is_prime(3_215_031_751));
        assert!(!is_prime(2_152_302_898_747));
        assert!(is_prime(2_147_483_647));
    }

    #[test]
    fn ntt_prime_small_case() {
        // Brute scan: 5-bit primes are 17, 19, 23, 29, 31; only 17 ≡ 1 mod 8.
        let brute: Vec<u64> = (16..32).filter(|&q| trial_division(q) && q % 8 == 1).collect();
        assert_eq!(brute, vec![17]);
        assert_eq!(gen_ntt_prime(5, 4).unwrap(), 17);
    }

    #[test]
    fn ntt_prime_28_bits() {
        let q = gen_ntt_prime(28, 1 << 16).unwrap() as u64;
        assert_eq!(q % (1 << 17), 1);
        assert_eq!(64 - q.leading_zeros(), 28);
        assert!(is_prime(q));
    }

    #[test]
    fn ntt_prime_exhaustion() {
        assert!(matches!(gen_ntt_prime(2, 1 << 16), Err(Error::Exhausted(_))));
        assert!(matches!(gen_ntt_prime(28, 48), Err(Error::Domain(_))));
    }

    #[test]
    fn distinct_primes_respect_exclusions() {
        let a = gen_ntt_primes(28, 4096, 4, &[]).unwrap();
        let b = gen_ntt_primes(28, 4096, 4, &a).unwrap();
        assert!(a.iter().all(|x| !b.contains(x)));
        assert!(a.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn primitive_roots() {
        let m = Modulus::new(17).unwrap();
        // 2 has order 8 mod 17: 2^8 = 256 ≡ 1, 2^4 = 16 ≢ 1.
        assert!(has_exact_order(2, 8, 17));
        let w = find_primitive_root(&m, 8).unwrap() as u64;
        assert!(has_exact_order(w, 8, 17));
        assert_eq!(find_primitive_root(&m, 1).unwrap(), 1);
        assert!(matches!(find_primitive_root(&m, 5), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse() {
        assert_eq!(inv_mod(17, 1 << 32), Some(4_042_322_161));
        assert_eq!(inv_mod(4, 8), None);
        assert_eq!(inv_mod(3, 7), Some(5));
    }
}
