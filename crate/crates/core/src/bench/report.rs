use std::path::Path;
use std::str::FromStr;

use serde_json::json;

use super::BenchRecord;
use crate::error::{Error, Result};

/// Stable CSV column order.
pub const CSV_HEADER: &str = "kernel,N,R,C,L,Lp,H,V,W,batch,strategy,use_bat,iters,min_us,median_us,mean_us,throughput_per_s,mults,perm_ops,verified";

/// Identifier of the input generator, embedded in JSON reports.
pub const RNG_NAME: &str = "chacha8 (rand_chacha 0.3 ChaCha8Rng::seed_from_u64, one stream per kernel)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

fn nonempty(records: &[BenchRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no records to report".into()));
    }
    Ok(())
}

pub fn records_to_csv(records: &[BenchRecord]) -> Result<String> {
    nonempty(records)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn records_from_csv(text: &str) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::Format(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Format("unexpected CSV header".into()));
    }
    rd.deserialize()
        .map(|r| r.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

pub fn records_to_json(records: &[BenchRecord], seed: u64) -> Result<serde_json::Value> {
    nonempty(records)?;
    Ok(json!({ "rng": RNG_NAME, "seed": seed, "records": records }))
}

/// Write the report to `path`.
pub fn emit_report(records: &[BenchRecord], format: Format, path: &Path, seed: u64) -> Result<()> {
    let text = match format {
        Format::Csv => records_to_csv(records)?,
        Format::Json => {
            serde_json::to_string_pretty(&records_to_json(records, seed)?).map_err(|e| Error::Format(e.to_string()))?
                + "\n"
        }
    };
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::Kernel;
    use crate::modarith::Strategy;
    use proptest::prelude::*;

    fn record(seed: u64) -> BenchRecord {
        let pick = |x: u64| {
            if x.is_multiple_of(2) {
                Some(x as usize % 1000)
            } else {
                None
            }
        };
        BenchRecord {
            kernel: Kernel::ALL[seed as usize % Kernel::ALL.len()],
            n: pick(seed),
            r: pick(seed >> 1),
            c: pick(seed >> 2),
            l: pick(seed >> 3),
            lp: pick(seed >> 4),
            h: pick(seed >> 5),
            v: pick(seed >> 6),
            w: pick(seed >> 7),
            batch: 1 + (seed % 8) as usize,
            strategy: Strategy::ALL[(seed % 4) as usize],
            use_bat: seed.is_multiple_of(3),
            iters: 5,
            min_us: (seed % 977) as f64 * 0.25,
            median_us: 3.5,
            mean_us: 4.0,
            throughput_per_s: 1234.5,
            mults: seed,
            perm_ops: seed / 7,
            verified: !seed.is_multiple_of(5),
        }
    }

    #[test]
    fn csv_shape() {
        let text = records_to_csv(&[record(2)]).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(records_to_csv(&[]).is_err());
        assert!(records_to_json(&[], 0).is_err());
    }

    proptest! {
        #[test]
        fn json_csv_parity(seeds in proptest::collection::vec(any::<u64>(), 1..6)) {
            let recs: Vec<_> = seeds.iter().map(|&s| record(s)).collect();
            let from_csv = records_from_csv(&records_to_csv(&recs).unwrap()).unwrap();
            let json = records_to_json(&recs, 9).unwrap();
            let from_json: Vec<BenchRecord> = serde_json::from_value(json["records"].clone()).unwrap();
            prop_assert_eq!(&from_csv, &recs);
            prop_assert_eq!(&from_json, &recs);
            let keys: Vec<String> = json["records"][0].as_object().unwrap().keys().cloned().collect();
            let mut cols: Vec<String> = CSV_HEADER.split(',').map(String::from).collect();
            let mut keys_sorted = keys.clone();
            keys_sorted.sort();
            cols.sort();
            prop_assert_eq!(keys_sorted, cols);
        }
    }

    #[test]
    fn unwritable_path() {
        let err = emit_report(&[record(1)], Format::Csv, Path::new("/nonexistent/dir/out.csv"), 0);
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
