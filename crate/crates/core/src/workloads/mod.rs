//! DNN registry, profiler-style workload profiles and memory traces.

mod trace;

pub use trace::{
    generate_trace, load_trace, parse_text_trace, read_binary_trace, trace_checksum, write_binary_trace,
    write_text_trace, MemoryTrace, Op, StackDistanceSpec, TraceRecord, TraceSpecFile, BINARY_MAGIC,
};

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnSpec {
    pub name: String,
    /// percent
    pub top5_error: f64,
    pub conv_layers: u32,
    pub fc_layers: u32,
    pub total_weights: u64,
    pub total_macs: u64,
}

/// The five ImageNet networks of the study.
pub fn builtin_dnns() -> Vec<DnnSpec> {
    let dnn = |name: &str, top5_error, conv_layers, fc_layers, total_weights, total_macs| DnnSpec {
        name: name.to_string(),
        top5_error,
        conv_layers,
        fc_layers,
        total_weights,
        total_macs,
    };
    vec![
        dnn("AlexNet", 16.4, 5, 3, 61_000_000, 724_000_000),
        dnn("GoogLeNet", 6.7, 57, 1, 7_000_000, 1_430_000_000),
        dnn("VGG-16", 7.3, 13, 3, 138_000_000, 15_500_000_000),
        dnn("ResNet-18", 10.71, 17, 1, 11_800_000, 2_000_000_000),
        dnn("SqueezeNet", 16.4, 26, 0, 1_200_000, 837_000_000),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Inference,
    Training,
}

impl Stage {
    pub fn default_batch_size(self) -> u32 {
        match self {
            Stage::Inference => 4,
            Stage::Training => 64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Inference => "inference",
            Stage::Training => "training",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inference" => Ok(Stage::Inference),
            "training" => Ok(Stage::Training),
            _ => Err(Error::invalid("stage", format!("unknown stage `{s}`"))),
        }
    }
}

/// Memory transaction counts of one (network, stage, batch) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    pub dnn: String,
    pub stage: Stage,
    pub batch_size: u32,
    pub l2_read_tx: u64,
    pub l2_write_tx: u64,
    pub dram_read_tx: u64,
    pub dram_write_tx: u64,
    /// Measured wall-clock time, when known.
    pub exec_time_ms: Option<f64>,
}

impl WorkloadProfile {
    pub fn l2_tx(&self) -> u64 {
        self.l2_read_tx + self.l2_write_tx
    }

    pub fn dram_tx(&self) -> u64 {
        self.dram_read_tx + self.dram_write_tx
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if let Some(t) = self.exec_time_ms {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::invalid("exec_time_ms", "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

const REQUIRED_COLUMNS: [&str; 6] = ["dnn", "stage", "l2_read_tx", "l2_write_tx", "dram_read_tx", "dram_write_tx"];
const PROFILE_HEADER: [&str; 8] = [
    "dnn",
    "stage",
    "batch_size",
    "l2_read_tx",
    "l2_write_tx",
    "dram_read_tx",
    "dram_write_tx",
    "exec_time_ms",
];

/// Reads a profile CSV. `batch_size` and `exec_time_ms` may be absent or
/// empty; a missing batch size takes the stage default. Rows in errors are
/// 1-based data rows (the header is not counted).
pub fn load_profiles<R: Read>(input: R) -> Result<Vec<WorkloadProfile>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    for name in REQUIRED_COLUMNS {
        if col(name).is_none() {
            return Err(Error::SchemaError {
                row: 0,
                column: name.to_string(),
                reason: "missing column".into(),
            });
        }
    }
    for h in headers.iter() {
        if !PROFILE_HEADER.contains(&h) {
            return Err(Error::SchemaError {
                row: 0,
                column: h.to_string(),
                reason: "unknown column".into(),
            });
        }
    }
    let idx = |name: &str| col(name).unwrap();
    let batch_col = col("batch_size");
    let time_col = col("exec_time_ms");

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let schema = |column: &str, reason: String| Error::SchemaError {
            row,
            column: column.to_string(),
            reason,
        };
        let count = |name: &str| -> Result<u64> {
            let s = field(idx(name));
            if s.starts_with('-') && s[1..].parse::<f64>().is_ok() {
                return Err(Error::NegativeCount {
                    row,
                    column: name.to_string(),
                });
            }
            s.parse::<u64>()
                .map_err(|_| schema(name, format!("expected a non-negative integer, found `{s}`")))
        };

        let dnn = field(idx("dnn"));
        if dnn.is_empty() {
            return Err(schema("dnn", "empty name".into()));
        }
        let stage: Stage = field(idx("stage"))
            .parse()
            .map_err(|_| schema("stage", format!("expected inference or training, found `{}`", field(idx("stage")))))?;
        let batch_size = match batch_col.map(field).filter(|s| !s.is_empty()) {
            None => stage.default_batch_size(),
            Some(s) => match s.parse::<u32>() {
                Ok(b) if b >= 1 => b,
                _ => return Err(schema("batch_size", format!("expected a positive integer, found `{s}`"))),
            },
        };
        let exec_time_ms = match time_col.map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => match s.parse::<f64>() {
                Ok(t) if t.is_finite() && t >= 0.0 => Some(t),
                _ => return Err(schema("exec_time_ms", format!("expected a non-negative time, found `{s}`"))),
            },
        };
        out.push(WorkloadProfile {
            dnn: dnn.to_string(),
            stage,
            batch_size,
            l2_read_tx: count("l2_read_tx")?,
            l2_write_tx: count("l2_write_tx")?,
            dram_read_tx: count("dram_read_tx")?,
            dram_write_tx: count("dram_write_tx")?,
            exec_time_ms,
        });
    }
    Ok(out)
}

pub fn write_profiles<W: Write>(profiles: &[WorkloadProfile], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(PROFILE_HEADER)?;
    for p in profiles {
        w.write_record([
            p.dnn.clone(),
            p.stage.to_string(),
            p.batch_size.to_string(),
            p.l2_read_tx.to_string(),
            p.l2_write_tx.to_string(),
            p.dram_read_tx.to_string(),
            p.dram_write_tx.to_string(),
            p.exec_time_ms.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Desk-scale stand-in for a profiler dump.
///
/// The L2 split is exact: `round(read_fraction * total_tx)` reads, the rest
/// writes. DRAM counters come from a seeded ChaCha8 stream: a read miss
/// ratio uniform in [0.05, 0.25) of the L2 reads, and write-backs uniform in
/// [0.3, 0.7) of the L2 writes scaled by the same miss ratio.
pub fn synth_profile(read_fraction: f64, total_tx: u64, seed: u64) -> Result<WorkloadProfile> {
    if !(0.0..=1.0).contains(&read_fraction) {
        return Err(Error::invalid("read_fraction", "must lie in [0, 1]"));
    }
    let reads = ((read_fraction * total_tx as f64).round() as u64).min(total_tx);
    let writes = total_tx - reads;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let miss: f64 = rng.gen_range(0.05..0.25);
    let writeback: f64 = rng.gen_range(0.3..0.7);
    Ok(WorkloadProfile {
        dnn: "synthetic".into(),
        stage: Stage::Inference,
        batch_size: Stage::Inference.default_batch_size(),
        l2_read_tx: reads,
        l2_write_tx: writes,
        dram_read_tx: (miss * reads as f64).round() as u64,
        dram_write_tx: (writeback * miss * writes as f64).round() as u64,
        exec_time_ms: None,
    })
}

/// L2 read fraction bands of the synthetic suite. Training moves more
/// activations and gradients through reads than inference does.
const INFERENCE_READ_FRACTION: (f64, f64) = (0.72, 0.86);
const TRAINING_READ_FRACTION: (f64, f64) = (0.84, 0.94);

/// L2 transactions per MAC per sample used to size synthetic profiles.
const TX_PER_MAC: f64 = 1.0 / 64.0;

/// One synthetic profile per built-in network and stage, at the default
/// batch sizes. Deterministic in `seed`.
pub fn synthetic_suite(seed: u64) -> Vec<WorkloadProfile> {
    let mut out = Vec::new();
    for (i, dnn) in builtin_dnns().iter().enumerate() {
        for (j, stage) in [Stage::Inference, Stage::Training].into_iter().enumerate() {
            let item_seed = seed.wrapping_mul(1_000_003).wrapping_add((i * 2 + j) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
            let (lo, hi) = match stage {
                Stage::Inference => INFERENCE_READ_FRACTION,
                Stage::Training => TRAINING_READ_FRACTION,
            };
            let read_fraction = rng.gen_range(lo..hi);
            let batch = stage.default_batch_size();
            // training runs forward and backward passes: roughly 3x the MACs
            let passes = if stage == Stage::Training { 3.0 } else { 1.0 };
            let total = (dnn.total_macs as f64 * batch as f64 * passes * TX_PER_MAC).round() as u64;
            let mut p = synth_profile(read_fraction, total, rng.gen()).expect("fraction is in range");
            p.dnn = dnn.name.clone();
            p.stage = stage;
            p.batch_size = batch;
            out.push(p);
        }
    }
    out
}

/// Profiles of one network and stage over several batch sizes, for the
/// batch-size study. Transaction volume grows linearly with the batch and
/// the read fraction rises from `read_fraction_lo` toward
/// `read_fraction_hi` as the batch grows (logarithmically in batch size).
pub fn batch_series(
    dnn: &DnnSpec,
    stage: Stage,
    batches: &[u32],
    read_fraction_lo: f64,
    read_fraction_hi: f64,
    seed: u64,
) -> Result<Vec<WorkloadProfile>> {
    let mut sorted = batches.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted[0] == 0 {
        return Err(Error::invalid("batches", "batch sizes must be positive"));
    }
    let lo = (sorted[0] as f64).log2();
    let hi = (*sorted.last().unwrap() as f64).log2();
    let mut out = Vec::new();
    for (i, &b) in sorted.iter().enumerate() {
        let t = if hi > lo { ((b as f64).log2() - lo) / (hi - lo) } else { 0.0 };
        let f = read_fraction_lo + t * (read_fraction_hi - read_fraction_lo);
        let total = (dnn.total_macs as f64 * b as f64 * TX_PER_MAC).round() as u64;
        let mut p = synth_profile(f, total, seed.wrapping_add(i as u64))?;
        p.dnn = dnn.name.clone();
        p.stage = stage;
        p.batch_size = b;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_dram_count() {
        let csv = "dnn,stage,l2_read_tx,l2_write_tx,dram_read_tx,dram_write_tx\nAlexNet,inference,10,2,-3,1\n";
        assert!(matches!(
            load_profiles(csv.as_bytes()),
            Err(Error::NegativeCount { row: 1, ref column }) if column == "dram_read_tx"
        ));
    }

    #[test]
    fn default_batch_sizes() {
        let csv = "dnn,stage,batch_size,l2_read_tx,l2_write_tx,dram_read_tx,dram_write_tx\n\
                   AlexNet,inference,,10,2,3,1\nAlexNet,training,,10,2,3,1\nAlexNet,training,8,1,1,1,1\n";
        let p = load_profiles(csv.as_bytes()).unwrap();
        assert_eq!(p.iter().map(|p| p.batch_size).collect::<Vec<_>>(), [4, 64, 8]);
        assert!(p.iter().all(|p| p.exec_time_ms.is_none()));
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let csv = "dnn,stage,l2_read_tx,l2_write_tx,dram_read_tx\nA,inference,1,1,1\n";
        assert!(matches!(load_profiles(csv.as_bytes()), Err(Error::SchemaError { .. })));
    }

    #[test]
    fn synth_split() {
        let p = synth_profile(0.83, 100, 7).unwrap();
        assert_eq!((p.l2_read_tx, p.l2_write_tx), (83, 17));
        let p = synth_profile(0.0, 50, 7).unwrap();
        assert_eq!((p.l2_read_tx, p.l2_write_tx), (0, 50));
        assert_eq!(synth_profile(0.5, 999, 3).unwrap(), synth_profile(0.5, 999, 3).unwrap());
        assert!(synth_profile(1.5, 10, 0).is_err());
    }

    #[test]
    fn suite_shape() {
        let s = synthetic_suite(1);
        assert_eq!(s.len(), 10);
        assert_eq!(s, synthetic_suite(1));
        for p in &s {
            assert_eq!(p.batch_size, p.stage.default_batch_size());
        }
    }

    #[test]
    fn batch_series_read_fraction_rises() {
        let dnn = &builtin_dnns()[0];
        let s = batch_series(dnn, Stage::Training, &[64, 8, 16, 32], 0.7, 0.9, 5).unwrap();
        assert_eq!(s.iter().map(|p| p.batch_size).collect::<Vec<_>>(), [8, 16, 32, 64]);
        let frac: Vec<f64> = s.iter().map(|p| p.l2_read_tx as f64 / p.l2_tx() as f64).collect();
        assert!(frac.windows(2).all(|w| w[0] < w[1]));
    }
}
