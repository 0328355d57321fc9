//! Iso-area analysis: the largest MRAM cache fitting an SRAM area budget,
//! trace-driven L2 simulation of DRAM traffic, and EDP with and without
//! DRAM costs.

mod sim;

pub use sim::{simulate_cache, CacheConfig, CacheStats};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cachemodel::MB;
use crate::error::{Error, Result};
use crate::isocap::{evaluate, ratio, AnalysisOptions, Evaluation};
use crate::techlib::{BitcellParams, MemoryKind, TechConfig};
use crate::tuner::{tune, TunedConfig};
use crate::workloads::{MemoryTrace, Stage, WorkloadProfile};

pub const DEFAULT_SLACK: f64 = 0.025;
pub const DEFAULT_GRANULARITY: u64 = MB;

/// Largest multiple of `granularity` whose EDAP-tuned design fits in
/// `area_budget * (1 + slack)` mm^2. Capacities are scanned upward and the
/// scan stops at the first design over budget.
pub fn iso_area_capacity(
    cell: &BitcellParams,
    area_budget: f64,
    tech: &TechConfig,
    granularity: u64,
    slack: f64,
) -> Result<(u64, TunedConfig)> {
    if !(area_budget.is_finite() && area_budget > 0.0) {
        return Err(Error::NonPositiveValue("area_budget".into()));
    }
    if !(slack.is_finite() && slack >= 0.0) {
        return Err(Error::invalid("slack", "must be finite and non-negative"));
    }
    if granularity == 0 {
        return Err(Error::NonPositiveValue("granularity".into()));
    }
    let limit = area_budget * (1.0 + slack);
    let mut best: Option<TunedConfig> = None;
    let mut capacity = granularity;
    loop {
        let tuned = match tune(cell, capacity, tech) {
            Ok(t) => t,
            // the organization space is exhausted; nothing larger exists
            Err(Error::InfeasibleCapacity { .. }) if best.is_some() => break,
            Err(e) => return Err(e),
        };
        if tuned.ppa.area > limit {
            break;
        }
        best = Some(tuned);
        capacity += granularity;
    }
    match best {
        Some(t) => Ok((t.capacity, t)),
        None => Err(Error::NoFeasibleCapacity {
            kind: cell.kind,
            budget: limit,
        }),
    }
}

/// Percentage of DRAM transactions removed by growing the cache from `base`
/// to `big`.
pub fn dram_reduction(trace: &MemoryTrace, base: &CacheConfig, big: &CacheConfig) -> Result<f64> {
    if base.line_size != big.line_size || base.associativity != big.associativity {
        return Err(Error::invalid("big", "configurations may differ only in capacity"));
    }
    let b = simulate_cache(trace, base)?;
    if b.dram_tx == 0 {
        return Err(Error::NoBaseTraffic);
    }
    let g = simulate_cache(trace, big)?;
    Ok(reduction(&b, &g))
}

fn reduction(base: &CacheStats, big: &CacheStats) -> f64 {
    100.0 * (1.0 - big.dram_tx as f64 / base.dram_tx as f64)
}

/// Applies simulated per-access DRAM traffic to the profile's L2 volume.
pub fn with_simulated_dram(p: &WorkloadProfile, stats: &CacheStats) -> WorkloadProfile {
    let mut q = p.clone();
    let per_access = |n: u64| (p.l2_tx() as f64 * n as f64 / stats.accesses.max(1) as f64).round() as u64;
    q.dram_read_tx = per_access(stats.misses);
    q.dram_write_tx = per_access(stats.dirty_evictions);
    q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoAreaEntry {
    pub dnn: String,
    pub stage: Stage,
    pub kind: MemoryKind,
    pub baseline: MemoryKind,
    pub capacity: u64,
    pub baseline_capacity: u64,
    pub dram_tx: u64,
    pub baseline_dram_tx: u64,
    pub evaluation: Evaluation,
    pub baseline_evaluation: Evaluation,
    pub edp_ratio_without_dram: f64,
    pub edp_ratio_with_dram: f64,
}

/// Iso-area comparison of `c_big` against `c_base`, with DRAM counters taken
/// from the simulations of the respective cache sizes.
pub fn isoarea_report(
    p: &WorkloadProfile,
    stats_base: &CacheStats,
    stats_big: &CacheStats,
    c_base: &TunedConfig,
    c_big: &TunedConfig,
    tech: &TechConfig,
    include_dram: bool,
) -> IsoAreaEntry {
    let opts = AnalysisOptions {
        include_dram,
        ..AnalysisOptions::default()
    };
    let p_base = with_simulated_dram(p, stats_base);
    let p_big = with_simulated_dram(p, stats_big);
    let b = evaluate(&p_base, c_base, tech, &opts);
    let x = evaluate(&p_big, c_big, tech, &opts);
    IsoAreaEntry {
        dnn: p.dnn.clone(),
        stage: p.stage,
        kind: c_big.kind,
        baseline: c_base.kind,
        capacity: c_big.capacity,
        baseline_capacity: c_base.capacity,
        dram_tx: p_big.dram_tx(),
        baseline_dram_tx: p_base.dram_tx(),
        evaluation: x,
        baseline_evaluation: b,
        edp_ratio_without_dram: ratio(x.edp_without_dram, b.edp_without_dram),
        edp_ratio_with_dram: ratio(x.edp_with_dram, b.edp_with_dram),
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_report_csv<W: Write>(entries: &[IsoAreaEntry], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "dnn",
        "stage",
        "kind",
        "capacity_mb",
        "baseline",
        "baseline_capacity_mb",
        "dram_tx",
        "baseline_dram_tx",
        "edp_without_dram",
        "edp_with_dram",
        "edp_norm_without_dram",
        "edp_norm_with_dram",
    ])?;
    for e in entries {
        w.write_record([
            e.dnn.clone(),
            e.stage.to_string(),
            e.kind.to_string(),
            (e.capacity as f64 / MB as f64).to_string(),
            e.baseline.to_string(),
            (e.baseline_capacity as f64 / MB as f64).to_string(),
            e.dram_tx.to_string(),
            e.baseline_dram_tx.to_string(),
            e.evaluation.edp_without_dram.to_string(),
            e.evaluation.edp_with_dram.to_string(),
            e.edp_ratio_without_dram.to_string(),
            e.edp_ratio_with_dram.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_stats_csv<W: Write>(rows: &[(u64, CacheStats)], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["capacity_mb", "accesses", "hits", "misses", "dirty_evictions", "dram_tx"])?;
    for (cap, s) in rows {
        w.write_record([
            (*cap as f64 / MB as f64).to_string(),
            s.accesses.to_string(),
            s.hits.to_string(),
            s.misses.to_string(),
            s.dirty_evictions.to_string(),
            s.dram_tx.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Capacity-versus-reduction series: one simulation per capacity, reduction
/// against `base`. Points keep the order of `capacities`.
pub fn reduction_series(
    trace: &MemoryTrace,
    base: &CacheConfig,
    capacities: &[u64],
) -> Result<Vec<(u64, CacheStats, f64)>> {
    use rayon::prelude::*;
    let b = simulate_cache(trace, base)?;
    if b.dram_tx == 0 {
        return Err(Error::NoBaseTraffic);
    }
    capacities
        .par_iter()
        .map(|&cap| {
            let cfg = CacheConfig::new(cap, base.line_size, base.associativity)?;
            let s = simulate_cache(trace, &cfg)?;
            let r = reduction(&b, &s);
            Ok((cap, s, r))
        })
        .collect()
}

pub fn write_reduction_csv<W: Write>(series: &[(u64, CacheStats, f64)], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["capacity_mb", "dram_tx", "reduction_pct"])?;
    for (cap, s, r) in series {
        w.write_record([(*cap as f64 / MB as f64).to_string(), s.dram_tx.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}
