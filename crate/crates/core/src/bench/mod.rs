//! Parameter sets, seeded workloads, oracle verification, timing and reports.

mod report;
mod workload;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modarith::{ParamSet, ParamSetName, Strategy};

pub use report::{emit_report, records_from_csv, records_to_csv, records_to_json, Format, CSV_HEADER, RNG_NAME};
pub use workload::{Divergence, Workload};

/// Seeded input generator shared by every kernel.
pub type BenchRng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Ntt3,
    CtNtt,
    FourStep,
    Intt,
    Vecmodmul,
    Matmodmul,
    Bconv,
    Polymul,
    Rescale,
    HeAdd,
    Hpsm,
}

impl Kernel {
    pub const ALL: [Kernel; 11] = [
        Kernel::Ntt3,
        Kernel::CtNtt,
        Kernel::FourStep,
        Kernel::Intt,
        Kernel::Vecmodmul,
        Kernel::Matmodmul,
        Kernel::Bconv,
        Kernel::Polymul,
        Kernel::Rescale,
        Kernel::HeAdd,
        Kernel::Hpsm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Ntt3 => "ntt3",
            Kernel::CtNtt => "ct_ntt",
            Kernel::FourStep => "four_step",
            Kernel::Intt => "intt",
            Kernel::Vecmodmul => "vecmodmul",
            Kernel::Matmodmul => "matmodmul",
            Kernel::Bconv => "bconv",
            Kernel::Polymul => "polymul",
            Kernel::Rescale => "rescale",
            Kernel::HeAdd => "he_add",
            Kernel::Hpsm => "hpsm",
        }
    }

    /// Stream index that keeps each kernel's data independent of the others.
    fn stream(self) -> u64 {
        Kernel::ALL.iter().position(|&k| k == self).unwrap_or(0) as u64
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel '{s}'")))
    }
}

/// Named sets: `A`–`D`, or `custom:N=…,logq=…,L=…[,Lp=…][,dnum=…]`.
pub fn load_param_set(spec: &str) -> Result<ParamSet> {
    let named = |name, n, l, dnum| ParamSet::new(name, n, 28, l, l.div_ceil(dnum), dnum, 1);
    match spec.trim().to_ascii_uppercase().as_str() {
        "A" => return named(ParamSetName::A, 1 << 12, 4, 1),
        "B" => return named(ParamSetName::B, 1 << 13, 8, 1),
        "C" => return named(ParamSetName::C, 1 << 14, 15, 1),
        "D" => return named(ParamSetName::D, 1 << 16, 51, 3),
        _ => {}
    }
    let body = spec
        .trim()
        .strip_prefix("custom:")
        .ok_or_else(|| Error::Config(format!("unknown parameter set '{spec}'")))?;
    let (mut n, mut logq, mut l, mut lp, mut dnum) = (None, None, None, None, 1usize);
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{part}'")))?;
        let val: usize = val
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("'{val}' is not a number")))?;
        match key.trim().to_ascii_lowercase().as_str() {
            "n" => n = Some(val),
            "logq" => logq = Some(val as u32),
            "l" => l = Some(val),
            "lp" => lp = Some(val),
            "dnum" => dnum = val,
            other => return Err(Error::Config(format!("unknown custom key '{other}'"))),
        }
    }
    let missing = |what: &str| Error::Config(format!("custom set needs {what}"));
    let l = l.ok_or_else(|| missing("L"))?;
    ParamSet::new(
        ParamSetName::Custom,
        n.ok_or_else(|| missing("N"))?,
        logq.ok_or_else(|| missing("logq"))?,
        l,
        lp.unwrap_or(l.div_ceil(dnum.max(1))),
        dnum,
        1,
    )
}

/// One benchmark/verification request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub kernel: Kernel,
    pub params: ParamSet,
    pub batch: Vec<usize>,
    pub strategy: Strategy,
    pub use_bat: bool,
    /// NTT split; `None` uses the default.
    pub rc: Option<(usize, usize)>,
    /// Matrix shape `(H, V, W)` for `matmodmul`.
    pub shape: (usize, usize, usize),
    pub bp: u32,
    pub iters: usize,
    pub warmup: usize,
    pub seed: u64,
    pub inject_fault: bool,
}

impl BenchConfig {
    pub fn new(kernel: Kernel, params: ParamSet) -> Self {
        Self {
            kernel,
            params,
            batch: vec![1],
            strategy: Strategy::Barrett,
            use_bat: true,
            rc: None,
            shape: (512, 256, 256),
            bp: 8,
            iters: 10,
            warmup: 2,
            seed: 1,
            inject_fault: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch.is_empty() || self.batch.contains(&0) {
            return Err(Error::Config("batch sizes must be at least 1".into()));
        }
        if self.iters == 0 {
            return Err(Error::Config("iters must be at least 1".into()));
        }
        let (h, v, w) = self.shape;
        if h == 0 || v == 0 || w == 0 {
            return Err(Error::Config("matrix shape entries must be positive".into()));
        }
        Ok(())
    }

    /// Human label printed beside each cell.
    pub fn label(&self) -> String {
        match self.kernel {
            Kernel::Matmodmul => {
                let (h, v, w) = self.shape;
                format!("{} HxVxW={h}x{v}x{w}", self.params.label())
            }
            _ => format!("{} N={} L={}", self.params.label(), self.params.n, self.params.limbs),
        }
    }
}

/// One report row. Shape fields a kernel does not use are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub kernel: Kernel,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "R")]
    pub r: Option<usize>,
    #[serde(rename = "C")]
    pub c: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[serde(rename = "Lp")]
    pub lp: Option<usize>,
    #[serde(rename = "H")]
    pub h: Option<usize>,
    #[serde(rename = "V")]
    pub v: Option<usize>,
    #[serde(rename = "W")]
    pub w: Option<usize>,
    pub batch: usize,
    pub strategy: Strategy,
    pub use_bat: bool,
    pub iters: usize,
    pub min_us: f64,
    pub median_us: f64,
    pub mean_us: f64,
    pub throughput_per_s: f64,
    /// Matrix-engine multiply-accumulates per kernel call, or word-level modular
    /// multiplies for kernels that never use the engine.
    pub mults: u64,
    pub perm_ops: u64,
    pub verified: bool,
}

impl BenchRecord {
    /// The columns that depend only on the seed and configuration (everything but timing).
    pub fn data_columns(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{},{},{},{},{}",
            self.kernel,
            self.n,
            self.r,
            self.c,
            self.l,
            self.lp,
            self.h,
            self.v,
            self.w,
            self.batch,
            self.strategy,
            self.use_bat,
            self.iters,
            self.mults,
            self.perm_ops,
            self.verified
        )
    }
}

/// Result of checking one cell against its oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub kernel: Kernel,
    pub label: String,
    pub divergence: Option<Divergence>,
    pub record: BenchRecord,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.divergence {
            None => write!(
                f,
                "PASS {} [{}] strategy={}",
                self.kernel, self.label, self.record.strategy
            ),
            Some(d) => write!(
                f,
                "FAIL {} [{}] strategy={}: {d}",
                self.kernel, self.label, self.record.strategy
            ),
        }
    }
}

fn stats(samples: &mut [f64]) -> (f64, f64, f64) {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    };
    (samples[0], median, samples.iter().sum::<f64>() / n as f64)
}

/// Run the kernel once on seeded data (first batch size) and compare with its oracle.
pub fn run_verify(cfg: &BenchConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let batch = cfg.batch[0];
    let work = Workload::prepare(cfg, batch)?;
    let start = Instant::now();
    let (outputs, ops) = work.execute(cfg.inject_fault)?;
    let us = start.elapsed().as_secs_f64() * 1e6;
    let divergence = work.check(&outputs)?;
    let mut record = work.record(cfg, batch, 1, ops);
    record.min_us = us;
    record.median_us = us;
    record.mean_us = us;
    record.throughput_per_s = if us > 0.0 { batch as f64 / (us / 1e6) } else { 0.0 };
    record.verified = divergence.is_none();
    Ok(VerifyReport {
        kernel: cfg.kernel,
        label: cfg.label(),
        divergence,
        record,
    })
}

/// Verify several configurations, optionally in parallel.
pub fn run_verify_all(cfgs: &[BenchConfig], parallel: bool) -> Vec<Result<VerifyReport>> {
    if parallel {
        cfgs.par_iter().map(run_verify).collect()
    } else {
        cfgs.iter().map(run_verify).collect()
    }
}

/// Warm up, then time `iters` calls per batch size. Each call processes `batch` inputs.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.batch.len());
    for &batch in &cfg.batch {
        let cell = |e: Error| e.context(format_args!("cell {} batch={batch}", cfg.kernel));
        let work = Workload::prepare(cfg, batch).map_err(cell)?;
        for _ in 0..cfg.warmup {
            work.execute(cfg.inject_fault).map_err(cell)?;
        }
        let mut samples = Vec::with_capacity(cfg.iters);
        let mut last = None;
        for _ in 0..cfg.iters {
            let start = Instant::now();
            let res = work.execute(cfg.inject_fault).map_err(cell)?;
            samples.push(start.elapsed().as_secs_f64() * 1e6);
            last = Some(res);
        }
        let (outputs, ops) = last.expect("iters >= 1");
        let verified = work.check(&outputs)?.is_none();
        let total_s: f64 = samples.iter().sum::<f64>() / 1e6;
        let (min, median, mean) = stats(&mut samples);
        let mut rec = work.record(cfg, batch, cfg.iters, ops);
        rec.min_us = min;
        rec.median_us = median;
        rec.mean_us = mean;
        rec.throughput_per_s = if total_s > 0.0 {
            (batch * cfg.iters) as f64 / total_s
        } else {
            0.0
        };
        rec.verified = verified;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_sets() {
        let d = load_param_set("D").unwrap();
        assert_eq!((d.n, d.limbs, d.log2q, d.dnum, d.aux_limbs), (65536, 51, 28, 3, 17));
        let a = load_param_set("a").unwrap();
        assert_eq!((a.n, a.limbs, a.aux_limbs), (4096, 4, 4));
        assert_eq!(load_param_set("B").unwrap().limbs, 8);
        assert_eq!(load_param_set("C").unwrap().n, 16384);
        let c = load_param_set("custom:N=64,logq=20,L=3,Lp=5").unwrap();
        assert_eq!((c.n, c.log2q, c.limbs, c.aux_limbs), (64, 20, 3, 5));
        assert!(load_param_set("custom:N=48,logq=28,L=4").is_err());
        assert!(load_param_set("E").is_err());
        assert!(load_param_set("custom:N=64,logq=28").is_err());
    }

    #[test]
    fn kernel_names_round_trip() {
        for k in Kernel::ALL {
            assert_eq!(k.name().parse::<Kernel>().unwrap(), k);
        }
        assert!("fft".parse::<Kernel>().is_err());
    }

    fn small(kernel: Kernel) -> BenchConfig {
        let mut cfg = BenchConfig::new(kernel, load_param_set("custom:N=64,logq=28,L=3,Lp=4").unwrap());
        cfg.shape = (8, 4, 6);
        cfg.batch = vec![2];
        cfg
    }

    #[test]
    fn every_kernel_verifies_and_catches_faults() {
        for kernel in Kernel::ALL {
            for s in Strategy::ALL {
                for use_bat in [true, false] {
                    let mut cfg = small(kernel);
                    cfg.strategy = s;
                    cfg.use_bat = use_bat;
                    let rep = run_verify(&cfg).unwrap();
                    assert!(rep.passed(), "{rep}");
                    cfg.inject_fault = true;
                    let rep = run_verify(&cfg).unwrap();
                    assert!(!rep.passed(), "fault missed: {kernel} {s}");
                    assert!(rep.to_string().contains("index"));
                }
            }
        }
    }

    #[test]
    fn benchmark_records() {
        let mut cfg = small(Kernel::Matmodmul);
        cfg.iters = 2;
        cfg.warmup = 0;
        cfg.batch = vec![1, 2];
        let recs = run_benchmark(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.verified));
        cfg.use_bat = false;
        let sparse = run_benchmark(&cfg).unwrap();
        assert_eq!(sparse[0].mults * 4, recs[0].mults * 7);
        let again = run_benchmark(&cfg).unwrap();
        assert_eq!(again[1].data_columns(), sparse[1].data_columns());
        cfg.iters = 0;
        assert!(run_benchmark(&cfg).is_err());
    }
}
