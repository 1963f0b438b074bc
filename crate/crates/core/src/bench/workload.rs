use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};

use super::{BenchConfig, BenchRecord, BenchRng, Kernel};
use crate::bat::hpsm_conv;
use crate::error::{Error, Result};
use crate::lpmm::{reference_mat_mod_mul, sparse_baseline_matmul, Fault, KnownMatrix, OpCount};
use crate::matrix::ResidueMatrix;
use crate::modarith::{find_primitive_root, gen_ntt_prime, vec_mod_elementwise, Modulus, Strategy, VecOp};
use crate::nttmat::{
    bit_reverse_perm, compile_ntt_plan, ct_ntt, default_split, naive_negacyclic_intt, naive_negacyclic_ntt,
    schoolbook_negacyclic, FourStepPlan, NttPlan,
};
use crate::rnsconv::{bconv_oracle, crt_decompose, crt_recompose, he_add, rescale, BasisConverter, RnsBasis, RnsPoly};

/// Largest degree checked against the quadratic oracles; above it the independent fast
/// transforms serve as reference.
const NAIVE_LIMIT: usize = 8192;

const FAULT: Fault = Fault { row: 0, col: 0, bit: 0 };

/// First mismatch between a kernel and its oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub item: usize,
    pub index: usize,
    pub expected: u64,
    pub actual: u64,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "first divergence at batch item {} index {}: expected {}, got {}",
            self.item, self.index, self.expected, self.actual
        )
    }
}

fn first_divergence(expected: &[Vec<u32>], actual: &[Vec<u32>]) -> Option<Divergence> {
    for (item, (e, a)) in expected.iter().zip(actual).enumerate() {
        if let Some(index) = e.iter().zip(a).position(|(x, y)| x != y) {
            return Some(Divergence {
                item,
                index,
                expected: e[index] as u64,
                actual: a[index] as u64,
            });
        }
        if e.len() != a.len() {
            let index = e.len().min(a.len());
            return Some(Divergence {
                item,
                index,
                expected: e.get(index).copied().unwrap_or(0) as u64,
                actual: a.get(index).copied().unwrap_or(0) as u64,
            });
        }
    }
    None
}

fn flip(out: &mut [Vec<u32>], fault: bool) {
    if fault {
        if let Some(x) = out.first_mut().and_then(|v| v.first_mut()) {
            *x ^= 1;
        }
    }
}

fn rand_vec(n: usize, q: u32, rng: &mut BenchRng) -> Vec<u32> {
    (0..n).map(|_| rng.gen_range(0..q)).collect()
}

fn rand_poly(basis: &Arc<RnsBasis>, n: usize, rng: &mut BenchRng) -> Result<RnsPoly> {
    let limbs = ResidueMatrix::from_fn(basis.len(), n, |i, _| rng.gen_range(0..basis.modulus(i).q()));
    RnsPoly::new(basis.clone(), limbs)
}

/// Oracle for the bit-reversed forward transform.
fn reference_ntt(a: &[u32], m: &Modulus, psi: u32) -> Result<Vec<u32>> {
    if a.len() <= NAIVE_LIMIT {
        bit_reverse_perm(a.len())?.apply(&naive_negacyclic_ntt(a, m, psi)?)
    } else {
        Ok(ct_ntt(a, m, psi, Strategy::Native)?.0)
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Shape {
    n: Option<usize>,
    r: Option<usize>,
    c: Option<usize>,
    l: Option<usize>,
    lp: Option<usize>,
    h: Option<usize>,
    v: Option<usize>,
    w: Option<usize>,
}

enum Kind {
    Ntt3 {
        plan: NttPlan,
        inputs: Vec<Vec<u32>>,
    },
    CtNtt {
        m: Modulus,
        psi: u32,
        strategy: Strategy,
        inputs: Vec<Vec<u32>>,
    },
    FourStep {
        plan: FourStepPlan,
        m: Modulus,
        psi: u32,
        inputs: Vec<Vec<u32>>,
    },
    Intt {
        plan: NttPlan,
        inputs: Vec<Vec<u32>>,
    },
    VecModMul {
        moduli: Vec<Modulus>,
        strategy: Strategy,
        inputs: Vec<(Vec<u32>, Vec<u32>)>,
    },
    MatModMul {
        m: Modulus,
        bp: u32,
        a: ResidueMatrix,
        known: Option<KnownMatrix>,
        inputs: Vec<ResidueMatrix>,
    },
    Bconv {
        conv: BasisConverter,
        use_bat: bool,
        inputs: Vec<RnsPoly>,
    },
    Polymul {
        plan: NttPlan,
        inputs: Vec<(Vec<u32>, Vec<u32>)>,
    },
    Rescale {
        times: usize,
        inputs: Vec<RnsPoly>,
    },
    HeAdd {
        inputs: Vec<(RnsPoly, RnsPoly)>,
    },
    Hpsm {
        m: Modulus,
        bp: u32,
        inputs: Vec<(Vec<u32>, Vec<u32>)>,
    },
}

/// Seeded inputs plus compiled constants for one (kernel, batch) cell.
pub struct Workload {
    shape: Shape,
    kind: Kind,
}

impl Workload {
    pub fn prepare(cfg: &BenchConfig, batch: usize) -> Result<Self> {
        let p = &cfg.params;
        let n = p.n;
        let mut rng = BenchRng::seed_from_u64(cfg.seed);
        rng.set_stream(cfg.kernel.stream());
        let (r, c) = match cfg.rc {
            Some((r, c)) if r * c == n => (r, c),
            Some((r, c)) => return Err(Error::Config(format!("--rc {r},{c} does not split N = {n}"))),
            None => default_split(n)?,
        };
        let ntt_shape = Shape {
            n: Some(n),
            r: Some(r),
            c: Some(c),
            ..Default::default()
        };
        let rns_shape = Shape {
            n: Some(n),
            l: Some(p.limbs),
            ..Default::default()
        };
        let first = || -> Result<Modulus> { Modulus::new(gen_ntt_prime(p.log2q, n)?) };
        let vectors =
            |q: u32, rng: &mut BenchRng| -> Vec<Vec<u32>> { (0..batch).map(|_| rand_vec(n, q, rng)).collect() };
        let (shape, kind) = match cfg.kernel {
            Kernel::Ntt3 | Kernel::Intt | Kernel::Polymul => {
                let m = first()?;
                let plan = compile_ntt_plan(n, r, c, &m, cfg.bp, cfg.strategy)?;
                let kind = match cfg.kernel {
                    Kernel::Ntt3 => Kind::Ntt3 {
                        inputs: vectors(m.q(), &mut rng),
                        plan,
                    },
                    Kernel::Intt => Kind::Intt {
                        inputs: vectors(m.q(), &mut rng),
                        plan,
                    },
                    _ => Kind::Polymul {
                        inputs: (0..batch)
                            .map(|_| (rand_vec(n, m.q(), &mut rng), rand_vec(n, m.q(), &mut rng)))
                            .collect(),
                        plan,
                    },
                };
                (ntt_shape, kind)
            }
            Kernel::CtNtt => {
                let m = first()?;
                let psi = find_primitive_root(&m, 2 * n as u64)?;
                let inputs = vectors(m.q(), &mut rng);
                (
                    Shape {
                        n: Some(n),
                        ..Default::default()
                    },
                    Kind::CtNtt {
                        m,
                        psi,
                        strategy: cfg.strategy,
                        inputs,
                    },
                )
            }
            Kernel::FourStep => {
                let m = first()?;
                let psi = find_primitive_root(&m, 2 * n as u64)?;
                let plan = FourStepPlan::new(r, c, &m, psi, cfg.bp, cfg.strategy)?;
                let inputs = vectors(m.q(), &mut rng);
                (ntt_shape, Kind::FourStep { plan, m, psi, inputs })
            }
            Kernel::Vecmodmul => {
                let moduli = p.moduli()?;
                let inputs = (0..batch)
                    .map(|_| {
                        let mut a = Vec::with_capacity(n * moduli.len());
                        let mut b = Vec::with_capacity(n * moduli.len());
                        for m in &moduli {
                            a.extend(rand_vec(n, m.q(), &mut rng));
                            b.extend(rand_vec(n, m.q(), &mut rng));
                        }
                        (a, b)
                    })
                    .collect();
                (
                    rns_shape,
                    Kind::VecModMul {
                        moduli,
                        strategy: cfg.strategy,
                        inputs,
                    },
                )
            }
            Kernel::Matmodmul => {
                let m = first()?;
                let (h, v, w) = cfg.shape;
                let a = ResidueMatrix::from_fn(h, v, |_, _| rng.gen_range(0..m.q()));
                let known = if cfg.use_bat {
                    Some(KnownMatrix::compile(&a, &m, cfg.bp, cfg.strategy)?)
                } else {
                    None
                };
                let inputs = (0..batch)
                    .map(|_| ResidueMatrix::from_fn(v, w, |_, _| rng.gen_range(0..m.q())))
                    .collect();
                (
                    Shape {
                        h: Some(h),
                        v: Some(v),
                        w: Some(w),
                        ..Default::default()
                    },
                    Kind::MatModMul {
                        m,
                        bp: cfg.bp,
                        a,
                        known,
                        inputs,
                    },
                )
            }
            Kernel::Bconv => {
                let src = Arc::new(RnsBasis::new(p.moduli()?)?);
                let dst = Arc::new(RnsBasis::new(p.aux_moduli()?)?);
                let conv = BasisConverter::new(src.clone(), dst, cfg.bp, cfg.strategy)?;
                let inputs = (0..batch)
                    .map(|_| rand_poly(&src, n, &mut rng))
                    .collect::<Result<_>>()?;
                (
                    Shape {
                        lp: Some(p.aux_limbs),
                        ..rns_shape
                    },
                    Kind::Bconv {
                        conv,
                        use_bat: cfg.use_bat,
                        inputs,
                    },
                )
            }
            Kernel::Rescale => {
                if p.limbs < 2 {
                    return Err(Error::Config("rescale needs at least two limbs".into()));
                }
                let basis = Arc::new(RnsBasis::new(p.moduli()?)?);
                let inputs = (0..batch)
                    .map(|_| rand_poly(&basis, n, &mut rng))
                    .collect::<Result<_>>()?;
                // double rescaling whenever a limb would remain
                let times = if p.limbs >= 3 { 2 } else { 1 };
                (rns_shape, Kind::Rescale { times, inputs })
            }
            Kernel::HeAdd => {
                let basis = Arc::new(RnsBasis::new(p.moduli()?)?);
                let inputs = (0..batch)
                    .map(|_| Ok((rand_poly(&basis, n, &mut rng)?, rand_poly(&basis, n, &mut rng)?)))
                    .collect::<Result<_>>()?;
                (rns_shape, Kind::HeAdd { inputs })
            }
            Kernel::Hpsm => {
                let m = first()?;
                let inputs = (0..batch)
                    .map(|_| (rand_vec(n, m.q(), &mut rng), rand_vec(n, m.q(), &mut rng)))
                    .collect();
                (
                    Shape {
                        n: Some(n),
                        ..Default::default()
                    },
                    Kind::Hpsm { m, bp: cfg.bp, inputs },
                )
            }
        };
        Ok(Self { shape, kind })
    }

    /// Run the kernel over every batch item. The op count is for a single kernel call.
    /// With `fault`, one accumulator bit (or, for kernels without one, one output bit) of
    /// the first item is flipped.
    pub fn execute(&self, fault: bool) -> Result<(Vec<Vec<u32>>, OpCount)> {
        let f = |i: usize| if fault && i == 0 { Some(FAULT) } else { None };
        let mut ops = OpCount::default();
        let mut keep = |i: usize, o: OpCount| {
            if i == 0 {
                ops = o;
            }
        };
        let mut out = Vec::new();
        match &self.kind {
            Kind::Ntt3 { plan, inputs } => {
                for (i, x) in inputs.iter().enumerate() {
                    let (y, o) = plan.forward(x, f(i))?;
                    keep(i, o);
                    out.push(y);
                }
            }
            Kind::Intt { plan, inputs } => {
                for (i, x) in inputs.iter().enumerate() {
                    let (y, o) = plan.inverse(x, f(i))?;
                    keep(i, o);
                    out.push(y);
                }
            }
            Kind::Polymul { plan, inputs } => {
                let m = plan.modulus();
                for (i, (a, b)) in inputs.iter().enumerate() {
                    let (fa, o1) = plan.forward(a, None)?;
                    let (fb, o2) = plan.forward(b, None)?;
                    let prod: Vec<u32> = fa
                        .iter()
                        .zip(&fb)
                        .map(|(&x, &y)| m.mul_with(x, y, plan.strategy()))
                        .collect();
                    let (y, o3) = plan.inverse(&prod, f(i))?;
                    let mut o = o1 + o2 + o3;
                    o.word_mults += prod.len() as u64;
                    keep(i, o);
                    out.push(y);
                }
            }
            Kind::CtNtt {
                m,
                psi,
                strategy,
                inputs,
            } => {
                for (i, x) in inputs.iter().enumerate() {
                    let (y, o) = ct_ntt(x, m, *psi, *strategy)?;
                    keep(i, o);
                    out.push(y);
                }
                flip(&mut out, fault);
            }
            Kind::FourStep { plan, inputs, .. } => {
                for (i, x) in inputs.iter().enumerate() {
                    let (y, o) = plan.run(x)?;
                    keep(i, o);
                    out.push(y);
                }
                flip(&mut out, fault);
            }
            Kind::VecModMul {
                moduli,
                strategy,
                inputs,
            } => {
                let n = self.shape.n.unwrap_or(0);
                for (i, (a, b)) in inputs.iter().enumerate() {
                    let mut y = Vec::with_capacity(a.len());
                    for (l, m) in moduli.iter().enumerate() {
                        let s = l * n..(l + 1) * n;
                        y.extend(vec_mod_elementwise(VecOp::Mul, &a[s.clone()], &b[s], m, *strategy)?);
                    }
                    keep(
                        i,
                        OpCount {
                            word_mults: a.len() as u64,
                            ..Default::default()
                        },
                    );
                    out.push(y);
                }
                flip(&mut out, fault);
            }
            Kind::MatModMul {
                m,
                bp,
                a,
                known,
                inputs,
            } => {
                for (i, b) in inputs.iter().enumerate() {
                    let (y, o) = match known {
                        Some(k) => k.mul_left(b, f(i))?,
                        None => sparse_baseline_matmul(a, b, m, *bp)?,
                    };
                    keep(i, o);
                    out.push(y.into_vec());
                }
                if known.is_none() {
                    flip(&mut out, fault);
                }
            }
            Kind::Bconv { conv, use_bat, inputs } => {
                for (i, x) in inputs.iter().enumerate() {
                    let (y, o) = conv.convert(x, *use_bat)?;
                    keep(i, o);
                    out.push(y.into_limbs().into_vec());
                }
                flip(&mut out, fault);
            }
            Kind::Rescale { times, inputs } => {
                for (i, x) in inputs.iter().enumerate() {
                    let y = rescale(x, *times)?;
                    let (l, n) = (x.basis().len(), x.degree());
                    let mults = (0..*times).map(|t| (l - 1 - t) * n).sum::<usize>() as u64;
                    keep(
                        i,
                        OpCount {
                            word_mults: mults,
                            ..Default::default()
                        },
                    );
                    out.push(y.into_limbs().into_vec());
                }
                flip(&mut out, fault);
            }
            Kind::HeAdd { inputs } => {
                for (a, b) in inputs {
                    out.push(he_add(a, b)?.into_limbs().into_vec());
                }
                flip(&mut out, fault);
            }
            Kind::Hpsm { m, bp, inputs } => {
                let k = m.chunks(*bp) as u64;
                for (i, (a, b)) in inputs.iter().enumerate() {
                    let y = a
                        .iter()
                        .zip(b)
                        .map(|(&x, &y)| hpsm_conv(x, y, m, *bp))
                        .collect::<Result<Vec<_>>>()?;
                    keep(
                        i,
                        OpCount {
                            multiplies: a.len() as u64 * k * k,
                            ..Default::default()
                        },
                    );
                    out.push(y);
                }
                flip(&mut out, fault);
            }
        }
        Ok((out, ops))
    }

    /// Compare kernel outputs with the oracle; `None` means bit-exact.
    pub fn check(&self, outputs: &[Vec<u32>]) -> Result<Option<Divergence>> {
        let expected: Vec<Vec<u32>> = match &self.kind {
            Kind::Ntt3 { plan, inputs } => inputs
                .iter()
                .map(|x| reference_ntt(x, plan.modulus(), plan.psi()))
                .collect::<Result<_>>()?,
            Kind::CtNtt { m, psi, inputs, .. } => {
                if inputs.first().map_or(0, Vec::len) <= NAIVE_LIMIT {
                    inputs
                        .iter()
                        .map(|x| reference_ntt(x, m, *psi))
                        .collect::<Result<_>>()?
                } else {
                    // an independent fast path for large N
                    let n = inputs[0].len();
                    let (r, c) = default_split(n)?;
                    let fs = FourStepPlan::new(r, c, m, *psi, 8, Strategy::Native)?;
                    let brev = bit_reverse_perm(n)?;
                    inputs
                        .iter()
                        .map(|x| brev.apply(&fs.run(x)?.0))
                        .collect::<Result<_>>()?
                }
            }
            Kind::FourStep { m, psi, inputs, .. } => inputs
                .iter()
                .map(|x| {
                    let brev = bit_reverse_perm(x.len())?;
                    brev.apply(&reference_ntt(x, m, *psi)?)
                })
                .collect::<Result<_>>()?,
            Kind::Intt { plan, inputs } => {
                let (m, psi) = (plan.modulus(), plan.psi());
                if plan.n() <= NAIVE_LIMIT {
                    let brev = bit_reverse_perm(plan.n())?;
                    inputs
                        .iter()
                        .map(|x| naive_negacyclic_intt(&brev.apply(x)?, m, psi))
                        .collect::<Result<_>>()?
                } else {
                    // compare in the spectral domain: forward(result) must equal the input
                    let fwd = outputs
                        .iter()
                        .map(|y| Ok(ct_ntt(y, m, psi, Strategy::Native)?.0))
                        .collect::<Result<Vec<_>>>()?;
                    return Ok(first_divergence(inputs, &fwd));
                }
            }
            Kind::Polymul { plan, inputs } => {
                let (m, psi) = (plan.modulus(), plan.psi());
                if plan.n() <= NAIVE_LIMIT {
                    inputs
                        .iter()
                        .map(|(a, b)| schoolbook_negacyclic(a, b, m))
                        .collect::<Result<_>>()?
                } else {
                    let ct = |x: &[u32]| -> Result<Vec<u32>> { Ok(ct_ntt(x, m, psi, Strategy::Native)?.0) };
                    let mut expect = Vec::new();
                    let mut got = Vec::new();
                    for ((a, b), y) in inputs.iter().zip(outputs) {
                        let (fa, fb) = (ct(a)?, ct(b)?);
                        expect.push(fa.iter().zip(&fb).map(|(&x, &y)| m.mul(x, y)).collect());
                        got.push(ct(y)?);
                    }
                    return Ok(first_divergence(&expect, &got));
                }
            }
            Kind::VecModMul { moduli, inputs, .. } => {
                let n = self.shape.n.unwrap_or(0);
                inputs
                    .iter()
                    .map(|(a, b)| {
                        a.iter()
                            .zip(b)
                            .enumerate()
                            .map(|(i, (&x, &y))| (x as u64 * y as u64 % moduli[i / n].q() as u64) as u32)
                            .collect()
                    })
                    .collect()
            }
            Kind::MatModMul { m, a, inputs, .. } => inputs
                .iter()
                .map(|b| Ok(reference_mat_mod_mul(a, b, m)?.into_vec()))
                .collect::<Result<_>>()?,
            Kind::Bconv { conv, inputs, .. } => inputs
                .iter()
                .map(|x| Ok(bconv_oracle(x, conv.target())?.0.into_limbs().into_vec()))
                .collect::<Result<_>>()?,
            Kind::Rescale { times, inputs } => inputs
                .iter()
                .map(|x| {
                    let mut vals = crt_recompose(x);
                    let mut basis = x.basis().as_ref().clone();
                    for _ in 0..*times {
                        let ql = basis.modulus(basis.len() - 1).q();
                        // floor division is exactly (x − [x]_{q_l}) / q_l
                        vals = vals.into_iter().map(|v| v / ql).collect();
                        basis = basis.drop_last(1)?;
                    }
                    Ok(crt_decompose(&vals, &Arc::new(basis))?.into_limbs().into_vec())
                })
                .collect::<Result<_>>()?,
            Kind::HeAdd { inputs } => inputs
                .iter()
                .map(|(a, b)| {
                    let q = a.basis().big_q();
                    let sums: Vec<BigUint> = crt_recompose(a)
                        .into_iter()
                        .zip(crt_recompose(b))
                        .map(|(x, y)| (x + y) % q)
                        .collect();
                    Ok(crt_decompose(&sums, a.basis())?.into_limbs().into_vec())
                })
                .collect::<Result<_>>()?,
            Kind::Hpsm { m, inputs, .. } => inputs
                .iter()
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| m.mul(x, y)).collect())
                .collect(),
        };
        Ok(first_divergence(&expected, outputs))
    }

    pub(super) fn record(&self, cfg: &BenchConfig, batch: usize, iters: usize, ops: OpCount) -> BenchRecord {
        let s = self.shape;
        BenchRecord {
            kernel: cfg.kernel,
            n: s.n,
            r: s.r,
            c: s.c,
            l: s.l,
            lp: s.lp,
            h: s.h,
            v: s.v,
            w: s.w,
            batch,
            strategy: cfg.strategy,
            use_bat: cfg.use_bat,
            iters,
            min_us: 0.0,
            median_us: 0.0,
            mean_us: 0.0,
            throughput_per_s: 0.0,
            mults: if ops.multiplies > 0 {
                ops.multiplies
            } else {
                ops.word_mults
            },
            perm_ops: ops.perm_ops,
            verified: false,
        }
    }
}
