//! End-to-end flows across modules: RNS polynomial multiply, basis extension, rescale, storage.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cross_kernels::lpmm::KnownMatrix;
use cross_kernels::matrix::ResidueMatrix;
use cross_kernels::modarith::{gen_ntt_primes, Strategy};
use cross_kernels::nttmat::{compile_ntt_plan, default_split, negacyclic_polymul, schoolbook_negacyclic};
use cross_kernels::rnsconv::{bconv, crt_decompose, crt_recompose, he_add, rescale, BasisConverter, RnsBasis, RnsPoly};

fn random_poly(basis: &Arc<RnsBasis>, n: usize, rng: &mut ChaCha8Rng) -> RnsPoly {
    let limbs = ResidueMatrix::from_fn(basis.len(), n, |i, _| rng.gen_range(0..basis.modulus(i).q()));
    RnsPoly::new(basis.clone(), limbs).unwrap()
}

fn limbwise_polymul(a: &RnsPoly, b: &RnsPoly, strategy: Strategy) -> RnsPoly {
    let basis = a.basis().clone();
    let n = a.degree();
    let (r, c) = default_split(n).unwrap();
    let mut out = Vec::with_capacity(basis.len() * n);
    for (i, m) in basis.moduli().iter().enumerate() {
        let plan = compile_ntt_plan(n, r, c, m, 8, strategy).unwrap();
        out.extend(negacyclic_polymul(a.limb(i), b.limb(i), &plan).unwrap());
    }
    RnsPoly::new(basis, ResidueMatrix::from_vec(a.limbs().rows(), n, out).unwrap()).unwrap()
}

#[test]
fn rns_polymul_matches_bigint_negacyclic_product() {
    let n = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let basis = Arc::new(RnsBasis::from_primes(&gen_ntt_primes(28, n, 3, &[]).unwrap()).unwrap());
    let a = random_poly(&basis, n, &mut rng);
    let b = random_poly(&basis, n, &mut rng);
    for s in [Strategy::Barrett, Strategy::Montgomery, Strategy::Shoup] {
        let got = crt_recompose(&limbwise_polymul(&a, &b, s));
        let (xa, xb) = (crt_recompose(&a), crt_recompose(&b));
        let q = basis.big_q();
        let mut want = vec![BigUint::from(0u32); n];
        for (i, ai) in xa.iter().enumerate() {
            for (j, bj) in xb.iter().enumerate() {
                let t = ai * bj % q;
                let k = (i + j) % n;
                want[k] = if i + j < n {
                    (&want[k] + t) % q
                } else {
                    (&want[k] + q - t) % q
                };
            }
        }
        assert_eq!(got, want, "{s}");
    }
}

#[test]
fn limb_product_matches_schoolbook() {
    let n = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let basis = Arc::new(RnsBasis::from_primes(&gen_ntt_primes(28, n, 2, &[]).unwrap()).unwrap());
    let a = random_poly(&basis, n, &mut rng);
    let b = random_poly(&basis, n, &mut rng);
    let p = limbwise_polymul(&a, &b, Strategy::Barrett);
    for i in 0..basis.len() {
        assert_eq!(
            p.limb(i),
            schoolbook_negacyclic(a.limb(i), b.limb(i), basis.modulus(i)).unwrap()
        );
    }
}

#[test]
fn extend_add_rescale_round() {
    let n = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let src_p = gen_ntt_primes(28, n, 4, &[]).unwrap();
    let dst_p = gen_ntt_primes(28, n, 6, &src_p).unwrap();
    let src = Arc::new(RnsBasis::from_primes(&src_p).unwrap());
    let dst = Arc::new(RnsBasis::from_primes(&dst_p).unwrap());
    let conv = BasisConverter::new(src.clone(), dst.clone(), 8, Strategy::Montgomery).unwrap();

    let a = random_poly(&src, n, &mut rng);
    let b = random_poly(&src, n, &mut rng);
    let sum = he_add(&a, &b).unwrap();
    // conversion is additive up to the approximate-CRT slack
    let ext = bconv(&sum, &conv, true).unwrap();
    assert_eq!(ext, bconv(&sum, &conv, false).unwrap());
    assert_eq!(ext.basis().moduli(), dst.moduli());

    let dropped = rescale(&sum, 1).unwrap();
    let ql = BigUint::from(*src_p.last().unwrap());
    let want: Vec<BigUint> = crt_recompose(&sum).iter().map(|x| (x - x % &ql) / &ql).collect();
    assert_eq!(crt_recompose(&dropped), want);
}

#[test]
fn serialized_poly_survives_disk() {
    let n = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let basis = Arc::new(RnsBasis::from_primes(&gen_ntt_primes(28, n, 5, &[]).unwrap()).unwrap());
    let p = random_poly(&basis, n, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poly.bin");
    p.write_to(std::fs::File::create(&path).unwrap()).unwrap();
    let back = RnsPoly::read_from(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, p);
    assert_eq!(crt_decompose(&crt_recompose(&back), &basis).unwrap(), p);
}

#[test]
fn known_matrix_left_and_right_agree() {
    let m = cross_kernels::Modulus::new(gen_ntt_primes(28, 1024, 1, &[]).unwrap()[0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = ResidueMatrix::from_fn(12, 9, |_, _| rng.gen_range(0..m.q()));
    let x = ResidueMatrix::from_fn(9, 7, |_, _| rng.gen_range(0..m.q()));
    let xt = ResidueMatrix::from_fn(7, 9, |i, j| x.get(j, i));
    for s in [
        Strategy::Barrett,
        Strategy::Montgomery,
        Strategy::Shoup,
        Strategy::Native,
    ] {
        let known = KnownMatrix::compile(&a, &m, 8, s).unwrap();
        let (left, _) = known.mul_left(&x, None).unwrap();
        let (right, _) = known.mul_right_t(&xt, None).unwrap();
        for i in 0..12 {
            for j in 0..7 {
                assert_eq!(left.get(i, j), right.get(j, i), "{s} ({i},{j})");
            }
        }
    }
}
