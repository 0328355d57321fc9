//! Iso-capacity workload analysis: energy breakdown, delay and EDP of a
//! workload profile on a tuned cache, normalized to a baseline technology.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::techlib::{MemoryKind, TechConfig};
use crate::tuner::TunedConfig;
use crate::workloads::{Stage, WorkloadProfile};

/// Energies in mJ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dynamic_read: f64,
    pub dynamic_write: f64,
    pub leakage: f64,
    pub dram: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(dynamic_read: f64, dynamic_write: f64, leakage: f64, dram: f64) -> Self {
        EnergyBreakdown {
            dynamic_read,
            dynamic_write,
            leakage,
            dram,
            total: dynamic_read + dynamic_write + leakage + dram,
        }
    }

    pub fn dynamic(&self) -> f64 {
        self.dynamic_read + self.dynamic_write
    }
}

/// How long the cache leaks while a workload runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exposure {
    /// Measured execution time when the profile carries one, otherwise the
    /// transaction delay.
    #[default]
    Measured,
    /// Always the transaction delay.
    Transaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub include_dram: bool,
    pub exposure: Exposure,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            include_dram: true,
            exposure: Exposure::Measured,
        }
    }
}

const NJ_TO_MJ: f64 = 1e-6;
const NS_TO_MS: f64 = 1e-6;

/// `(reads * E_read, writes * E_write)` in mJ.
pub fn dynamic_energy(p: &WorkloadProfile, c: &TunedConfig) -> (f64, f64) {
    (
        p.l2_read_tx as f64 * c.ppa.read_energy * NJ_TO_MJ,
        p.l2_write_tx as f64 * c.ppa.write_energy * NJ_TO_MJ,
    )
}

/// Leakage power times the measured execution time, or `delay_fallback_ns`
/// when the profile has none. mJ.
pub fn leakage_energy(p: &WorkloadProfile, c: &TunedConfig, delay_fallback_ns: f64) -> f64 {
    let ms = p.exec_time_ms.unwrap_or(delay_fallback_ns * NS_TO_MS);
    // mW * ms = uJ
    c.ppa.leakage_power * ms * 1e-3
}

/// Serialized transaction time in ns.
pub fn memory_delay(p: &WorkloadProfile, c: &TunedConfig, tech: &TechConfig, include_dram: bool) -> f64 {
    let l2 = p.l2_read_tx as f64 * c.ppa.read_latency + p.l2_write_tx as f64 * c.ppa.write_latency;
    if include_dram {
        l2 + p.dram_tx() as f64 * tech.dram_access_latency
    } else {
        l2
    }
}

pub fn dram_energy(p: &WorkloadProfile, tech: &TechConfig) -> f64 {
    p.dram_tx() as f64 * tech.dram_access_energy * NJ_TO_MJ
}

/// Absolute figures of one profile on one design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// DRAM energy is present only when DRAM is included.
    pub breakdown: EnergyBreakdown,
    /// ms, with DRAM when included
    pub delay: f64,
    /// mJ * ms, under the chosen DRAM setting
    pub edp: f64,
    pub edp_without_dram: f64,
    pub edp_with_dram: f64,
}

pub fn evaluate(p: &WorkloadProfile, c: &TunedConfig, tech: &TechConfig, opts: &AnalysisOptions) -> Evaluation {
    let (read, write) = dynamic_energy(p, c);
    let t_l2 = memory_delay(p, c, tech, false);
    let t_dram = memory_delay(p, c, tech, true);
    // Without a measured time the cache leaks for as long as the variant's
    // own delay, DRAM stalls included.
    let leak = |delay_ns: f64| match opts.exposure {
        Exposure::Measured => leakage_energy(p, c, delay_ns),
        Exposure::Transaction => c.ppa.leakage_power * delay_ns * NS_TO_MS * 1e-3,
    };
    let dram = dram_energy(p, tech);
    let without = EnergyBreakdown::new(read, write, leak(t_l2), 0.0);
    let with = EnergyBreakdown::new(read, write, leak(t_dram), dram);
    let edp_without_dram = without.total * t_l2 * NS_TO_MS;
    let edp_with_dram = with.total * t_dram * NS_TO_MS;
    if opts.include_dram {
        Evaluation {
            breakdown: with,
            delay: t_dram * NS_TO_MS,
            edp: edp_with_dram,
            edp_without_dram,
            edp_with_dram,
        }
    } else {
        Evaluation {
            breakdown: without,
            delay: t_l2 * NS_TO_MS,
            edp: edp_without_dram,
            edp_without_dram,
            edp_with_dram,
        }
    }
}

/// `a / b`, with `0 / 0` read as "no change".
pub fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a / b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub dynamic: f64,
    pub dynamic_read: f64,
    pub dynamic_write: f64,
    pub leakage: f64,
    pub total_energy: f64,
    pub delay: f64,
    pub edp: f64,
    pub edp_without_dram: f64,
    pub edp_with_dram: f64,
    pub area: f64,
}

impl Ratios {
    pub fn between(x: &Evaluation, b: &Evaluation, x_area: f64, b_area: f64) -> Self {
        Ratios {
            dynamic: ratio(x.breakdown.dynamic(), b.breakdown.dynamic()),
            dynamic_read: ratio(x.breakdown.dynamic_read, b.breakdown.dynamic_read),
            dynamic_write: ratio(x.breakdown.dynamic_write, b.breakdown.dynamic_write),
            leakage: ratio(x.breakdown.leakage, b.breakdown.leakage),
            total_energy: ratio(x.breakdown.total, b.breakdown.total),
            delay: ratio(x.delay, b.delay),
            edp: ratio(x.edp, b.edp),
            edp_without_dram: ratio(x.edp_without_dram, b.edp_without_dram),
            edp_with_dram: ratio(x.edp_with_dram, b.edp_with_dram),
            area: ratio(x_area, b_area),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisEntry {
    pub dnn: String,
    pub stage: Stage,
    pub batch_size: u32,
    pub kind: MemoryKind,
    pub baseline: MemoryKind,
    pub capacity: u64,
    pub evaluation: Evaluation,
    pub ratios: Ratios,
}

/// Iso-capacity comparison of `c` against `baseline`.
pub fn analyze(
    p: &WorkloadProfile,
    c: &TunedConfig,
    baseline: &TunedConfig,
    tech: &TechConfig,
    opts: &AnalysisOptions,
) -> Result<AnalysisEntry> {
    if c.capacity != baseline.capacity {
        return Err(Error::CapacityMismatch {
            kind: c.kind,
            capacity: c.capacity,
            baseline: baseline.capacity,
        });
    }
    let x = evaluate(p, c, tech, opts);
    let b = evaluate(p, baseline, tech, opts);
    Ok(AnalysisEntry {
        dnn: p.dnn.clone(),
        stage: p.stage,
        batch_size: p.batch_size,
        kind: c.kind,
        baseline: baseline.kind,
        capacity: c.capacity,
        evaluation: x,
        ratios: Ratios::between(&x, &b, c.ppa.area, baseline.ppa.area),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub baseline: MemoryKind,
    pub options: AnalysisOptions,
    pub entries: Vec<AnalysisEntry>,
}

/// Analyzes every profile on every design (baseline included, so its
/// ratios read 1). Entries are ordered by profile, then design.
pub fn analyze_all(
    profiles: &[WorkloadProfile],
    designs: &[TunedConfig],
    baseline: &TunedConfig,
    tech: &TechConfig,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let mut entries = Vec::with_capacity(profiles.len() * designs.len());
    for p in profiles {
        for c in designs {
            entries.push(analyze(p, c, baseline, tech, opts)?);
        }
    }
    Ok(AnalysisReport {
        baseline: baseline.kind,
        options: *opts,
        entries,
    })
}

/// EDP ratio against the baseline for each batch size, ascending.
pub fn batch_sweep(
    profiles: &[WorkloadProfile],
    c: &TunedConfig,
    baseline: &TunedConfig,
    tech: &TechConfig,
    opts: &AnalysisOptions,
) -> Result<Vec<(u32, f64)>> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::invalid("profiles", "batch sweep needs profiles"))?;
    if profiles.iter().any(|p| p.dnn != first.dnn || p.stage != first.stage) {
        return Err(Error::invalid("profiles", "batch sweep profiles must share network and stage"));
    }
    let mut points = Vec::with_capacity(profiles.len());
    for p in profiles {
        points.push((p.batch_size, analyze(p, c, baseline, tech, opts)?.ratios.edp));
    }
    points.sort_by_key(|&(b, _)| b);
    if points.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid("profiles", "duplicate batch size"));
    }
    if points.len() < 2 {
        return Err(Error::invalid("profiles", "batch sweep needs at least two batch sizes"));
    }
    Ok(points)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Long format: `dnn,stage,kind,metric,value`.
pub fn write_report_csv<W: Write>(report: &AnalysisReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["dnn", "stage", "kind", "metric", "value"])?;
    for e in &report.entries {
        let ev = &e.evaluation;
        let r = &e.ratios;
        let metrics: [(&str, f64); 21] = [
            ("batch_size", e.batch_size as f64),
            ("capacity_mb", e.capacity as f64 / crate::cachemodel::MB as f64),
            ("dynamic_read_mj", ev.breakdown.dynamic_read),
            ("dynamic_write_mj", ev.breakdown.dynamic_write),
            ("leakage_mj", ev.breakdown.leakage),
            ("dram_mj", ev.breakdown.dram),
            ("total_mj", ev.breakdown.total),
            ("delay_ms", ev.delay),
            ("edp", ev.edp),
            ("edp_without_dram", ev.edp_without_dram),
            ("edp_with_dram", ev.edp_with_dram),
            ("dynamic_norm", r.dynamic),
            ("dynamic_read_norm", r.dynamic_read),
            ("dynamic_write_norm", r.dynamic_write),
            ("leakage_norm", r.leakage),
            ("total_energy_norm", r.total_energy),
            ("delay_norm", r.delay),
            ("edp_norm", r.edp),
            ("edp_without_dram_norm", r.edp_without_dram),
            ("edp_with_dram_norm", r.edp_with_dram),
            ("area_norm", r.area),
        ];
        for (m, v) in metrics {
            w.write_record([e.dnn.as_str(), e.stage.name(), e.kind.name(), m, &v.to_string()])?;
        }
    }
    finish(w)
}

pub fn report_json(report: &AnalysisReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Normalized dynamic and leakage energy per workload and technology.
pub fn write_energy_plot<W: Write>(report: &AnalysisReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["dnn", "stage", "kind", "dynamic_norm", "leakage_norm"])?;
    for e in &report.entries {
        w.write_record([
            e.dnn.as_str(),
            e.stage.name(),
            e.kind.name(),
            &e.ratios.dynamic.to_string(),
            &e.ratios.leakage.to_string(),
        ])?;
    }
    finish(w)
}

/// Normalized total energy and EDP per workload and technology.
pub fn write_edp_plot<W: Write>(report: &AnalysisReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["dnn", "stage", "kind", "energy_norm", "edp_norm"])?;
    for e in &report.entries {
        w.write_record([
            e.dnn.as_str(),
            e.stage.name(),
            e.kind.name(),
            &e.ratios.total_energy.to_string(),
            &e.ratios.edp.to_string(),
        ])?;
    }
    finish(w)
}

/// Batch-size series: `(dnn, stage, kind, points)`.
pub type BatchSeries = (String, Stage, MemoryKind, Vec<(u32, f64)>);

pub fn write_batch_plot<W: Write>(series: &[BatchSeries], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["dnn", "stage", "kind", "batch_size", "edp_norm"])?;
    for (dnn, stage, kind, points) in series {
        for (b, v) in points {
            w.write_record([dnn.as_str(), stage.name(), kind.name(), &b.to_string(), &v.to_string()])?;
        }
    }
    finish(w)
}
