use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser};

use cross_kernels::bench::{
    emit_report, load_param_set, records_to_csv, records_to_json, run_benchmark, run_verify_all, BenchConfig,
    BenchRecord, Format, Kernel,
};
use cross_kernels::modarith::{ParamSet, ParamSetName, Strategy};
use cross_kernels::Error;

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Benchmark and verify low-precision RNS/NTT kernels.
#[derive(Debug, Parser)]
#[command(name = "cross-kernels", version)]
struct Cli {
    /// Kernel to run: ntt3, ct_ntt, four_step, intt, vecmodmul, matmodmul, bconv, polymul,
    /// rescale, he_add, hpsm.
    #[arg(long, required_unless_present = "all")]
    kernel: Option<Kernel>,

    /// Run every kernel.
    #[arg(long, conflicts_with = "kernel")]
    all: bool,

    /// A, B, C, D or custom:N=…,logq=…,L=…[,Lp=…][,dnum=…]
    #[arg(long, default_value = "A")]
    param_set: String,

    /// Override the polynomial degree N.
    #[arg(long)]
    degree: Option<usize>,

    /// Override the limb width in bits.
    #[arg(long)]
    logq: Option<u32>,

    /// Override the source limb count L.
    #[arg(long)]
    limbs: Option<usize>,

    /// Override the target limb count L′ for basis conversion.
    #[arg(long)]
    limbs_out: Option<usize>,

    /// Comma-separated batch sizes.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    batch: Vec<usize>,

    /// native, barrett, montgomery or shoup.
    #[arg(long, default_value = "barrett")]
    strategy: Strategy,

    /// Compile known operands into dense chunk matrices (default).
    #[arg(long, overrides_with = "no_bat")]
    use_bat: bool,

    /// Use the sparse / 64-bit baselines instead.
    #[arg(long, overrides_with = "use_bat")]
    no_bat: bool,

    /// NTT split as R,C.
    #[arg(long, value_parser = parse_list::<2>)]
    rc: Option<[usize; 2]>,

    /// Matrix shape for matmodmul as H,V,W.
    #[arg(long, value_parser = parse_list::<3>, default_value = "512,256,256")]
    shape: [usize; 3],

    #[arg(long, default_value_t = 10)]
    iters: usize,

    #[arg(long, default_value_t = 2)]
    warmup: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Check against the oracles instead of timing.
    #[arg(long)]
    verify: bool,

    /// Flip one accumulator bit to prove the verifier catches it.
    #[arg(long)]
    inject_fault: bool,

    /// Run verification cells concurrently.
    #[arg(long)]
    parallel_verify: bool,

    /// Report destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,

    /// csv or json; defaults to the output extension, else csv.
    #[arg(long)]
    format: Option<Format>,

    /// Print less.
    #[arg(short, long, action = ArgAction::SetTrue)]
    quiet: bool,
}

fn params(cli: &Cli) -> Result<ParamSet, Error> {
    let mut p = load_param_set(&cli.param_set)?;
    let base = p.clone();
    if let Some(n) = cli.degree {
        p.n = n;
    }
    if let Some(q) = cli.logq {
        p.log2q = q;
    }
    if let Some(l) = cli.limbs {
        p.limbs = l;
        p.aux_limbs = l.div_ceil(p.dnum);
    }
    if let Some(lp) = cli.limbs_out {
        p.aux_limbs = lp;
    }
    if p != base {
        p = ParamSet::new(
            ParamSetName::Custom,
            p.n,
            p.log2q,
            p.limbs,
            p.aux_limbs,
            p.dnum,
            p.batch,
        )?;
    }
    Ok(p)
}

fn configs(cli: &Cli) -> Result<Vec<BenchConfig>, Error> {
    let p = params(cli)?;
    let kernels: Vec<Kernel> = match cli.kernel {
        Some(k) if !cli.all => vec![k],
        _ => Kernel::ALL.to_vec(),
    };
    let rc = cli.rc.map(|[r, c]| (r, c));
    kernels
        .into_iter()
        .map(|k| {
            let mut cfg = BenchConfig::new(k, p.clone());
            cfg.batch = cli.batch.clone();
            cfg.strategy = cli.strategy;
            cfg.use_bat = !cli.no_bat;
            cfg.rc = rc;
            cfg.shape = (cli.shape[0], cli.shape[1], cli.shape[2]);
            cfg.iters = cli.iters;
            cfg.warmup = cli.warmup;
            cfg.seed = cli.seed;
            cfg.inject_fault = cli.inject_fault;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::Shape(_) | Error::OutOfRange(_) | Error::Domain(_)
    )
}

fn write_report(cli: &Cli, records: &[BenchRecord]) -> Result<(), Error> {
    if records.is_empty() {
        return Ok(());
    }
    let format = cli.format.unwrap_or_else(|| match &cli.output {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => Format::Json,
        _ => Format::Csv,
    });
    match &cli.output {
        Some(path) => emit_report(records, format, path, cli.seed),
        None => {
            let text = match format {
                Format::Csv => records_to_csv(records)?,
                Format::Json => serde_json::to_string_pretty(&records_to_json(records, cli.seed)?)
                    .map_err(|e| Error::Format(e.to_string()))?,
            };
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let cfgs = configs(cli)?;
    let mut records = Vec::new();
    let mut ok = true;
    if cli.verify {
        for (cfg, res) in cfgs.iter().zip(run_verify_all(&cfgs, cli.parallel_verify)) {
            match res {
                Ok(rep) => {
                    eprintln!("{rep}");
                    ok &= rep.passed();
                    records.push(rep.record);
                }
                Err(e) if is_usage(&e) => return Err(e),
                Err(e) => {
                    eprintln!("FAIL {} [{}]: {e}", cfg.kernel, cfg.label());
                    ok = false;
                }
            }
        }
    } else {
        for cfg in &cfgs {
            let recs = run_benchmark(cfg)?;
            for r in &recs {
                if !cli.quiet {
                    eprintln!(
                        "{} [{}] batch={} strategy={} median={:.1}us throughput={:.1}/s verified={}",
                        r.kernel,
                        cfg.label(),
                        r.batch,
                        r.strategy,
                        r.median_us,
                        r.throughput_per_s,
                        r.verified
                    );
                }
                ok &= r.verified;
            }
            records.extend(recs);
        }
    }
    write_report(cli, &records)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("CROSS_KERNELS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // ignore failure: the pool may already exist
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage(&e) { EXIT_USAGE } else { EXIT_VERIFY })
        }
    }
}

fn parse_list<const D: usize>(s: &str) -> Result<[usize; D], String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    v.try_into()
        .map_err(|v: Vec<usize>| format!("expected {D} comma-separated values, got {}", v.len()))
}
