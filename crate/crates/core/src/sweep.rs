//! Capacity scalability: per-kind metric series over a capacity grid,
//! normalization against a baseline kind and crossover detection.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cachemodel::MB;
use crate::error::{Error, Result};
use crate::isocap::{evaluate, AnalysisOptions};
use crate::techlib::{BitcellParams, MemoryKind, TechConfig};
use crate::tuner::{tune_all, TunedConfig};
use crate::workloads::WorkloadProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Area,
    ReadLatency,
    WriteLatency,
    ReadEnergy,
    WriteEnergy,
    LeakagePower,
    WorkloadEnergy,
    WorkloadLatency,
    WorkloadEdp,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Area,
        Metric::ReadLatency,
        Metric::WriteLatency,
        Metric::ReadEnergy,
        Metric::WriteEnergy,
        Metric::LeakagePower,
        Metric::WorkloadEnergy,
        Metric::WorkloadLatency,
        Metric::WorkloadEdp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Area => "area",
            Metric::ReadLatency => "read_latency",
            Metric::WriteLatency => "write_latency",
            Metric::ReadEnergy => "read_energy",
            Metric::WriteEnergy => "write_energy",
            Metric::LeakagePower => "leakage_power",
            Metric::WorkloadEnergy => "workload_energy",
            Metric::WorkloadLatency => "workload_latency",
            Metric::WorkloadEdp => "workload_edp",
        }
    }

    pub fn is_workload(self) -> bool {
        matches!(self, Metric::WorkloadEnergy | Metric::WorkloadLatency | Metric::WorkloadEdp)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::invalid("metric", format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub capacity: u64,
    pub value: f64,
    pub stdev: Option<f64>,
    /// Per-profile values behind a workload metric, in profile order.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilitySeries {
    pub metric: Metric,
    pub kind: MemoryKind,
    pub points: Vec<SeriesPoint>,
}

impl ScalabilitySeries {
    pub fn capacities(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.capacity).collect()
    }

    pub fn value_at(&self, capacity: u64) -> Option<f64> {
        self.points.iter().find(|p| p.capacity == capacity).map(|p| p.value)
    }
}

/// Mean and population standard deviation.
pub fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn hardware_value(metric: Metric, t: &TunedConfig) -> f64 {
    let p = &t.ppa;
    match metric {
        Metric::Area => p.area,
        Metric::ReadLatency => p.read_latency,
        Metric::WriteLatency => p.write_latency,
        Metric::ReadEnergy => p.read_energy,
        Metric::WriteEnergy => p.write_energy,
        Metric::LeakagePower => p.leakage_power,
        _ => unreachable!("workload metrics are aggregated over profiles"),
    }
}

/// Builds one series per kind and metric from tuned designs.
pub fn series_from_tuned(
    tuned: &[TunedConfig],
    kinds: &[MemoryKind],
    capacities: &[u64],
    profiles: &[WorkloadProfile],
    tech: &TechConfig,
    opts: &AnalysisOptions,
) -> Result<Vec<ScalabilitySeries>> {
    let mut out = Vec::new();
    for &kind in kinds {
        let row: Vec<&TunedConfig> = capacities
            .iter()
            .map(|&cap| {
                tuned
                    .iter()
                    .find(|t| t.kind == kind && t.capacity == cap)
                    .ok_or(Error::InfeasibleCapacity { capacity: cap })
            })
            .collect::<Result<_>>()?;
        for metric in Metric::ALL {
            if metric.is_workload() && profiles.is_empty() {
                continue;
            }
            let points = row
                .iter()
                .map(|t| {
                    if metric.is_workload() {
                        let samples: Vec<f64> = profiles
                            .iter()
                            .map(|p| {
                                let e = evaluate(p, t, tech, opts);
                                match metric {
                                    Metric::WorkloadEnergy => e.breakdown.total,
                                    Metric::WorkloadLatency => e.delay,
                                    _ => e.edp,
                                }
                            })
                            .collect();
                        let (value, stdev) = mean_stdev(&samples);
                        SeriesPoint {
                            capacity: t.capacity,
                            value,
                            stdev: Some(stdev),
                            samples,
                        }
                    } else {
                        SeriesPoint {
                            capacity: t.capacity,
                            value: hardware_value(metric, t),
                            stdev: None,
                            samples: Vec::new(),
                        }
                    }
                })
                .collect();
            out.push(ScalabilitySeries { metric, kind, points });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub tuned: Vec<TunedConfig>,
    pub series: Vec<ScalabilitySeries>,
}

/// Tunes every kind at every capacity (each independently for EDAP) and
/// derives the nine metric series. Capacities are sorted ascending.
pub fn scalability_sweep(
    cells: &[BitcellParams],
    capacities: &[u64],
    profiles: &[WorkloadProfile],
    tech: &TechConfig,
    opts: &AnalysisOptions,
) -> Result<SweepResult> {
    let mut caps = capacities.to_vec();
    caps.sort_unstable();
    caps.dedup();
    if caps.is_empty() {
        return Err(Error::invalid("capacities", "capacity grid is empty"));
    }
    let mut outcome = tune_all(cells, &caps, tech);
    if let Some((_, _, e)) = outcome.failures.drain(..).next() {
        return Err(e);
    }
    let kinds: Vec<MemoryKind> = cells.iter().map(|c| c.kind).collect();
    let series = series_from_tuned(&outcome.configs, &kinds, &caps, profiles, tech, opts)?;
    Ok(SweepResult {
        tuned: outcome.configs,
        series,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossover {
    pub metric: Metric,
    pub kind_a: MemoryKind,
    pub kind_b: MemoryKind,
    pub capacity_low: u64,
    pub capacity_high: u64,
}

fn same_grid(a: &ScalabilitySeries, b: &ScalabilitySeries) -> Result<()> {
    if a.capacities() != b.capacities() {
        return Err(Error::invalid("series", "capacity grids differ"));
    }
    Ok(())
}

/// Adjacent grid points where `a - b` changes sign. A zero difference is
/// a tie, never a flip.
pub fn find_crossover(a: &ScalabilitySeries, b: &ScalabilitySeries) -> Result<Vec<Crossover>> {
    same_grid(a, b)?;
    let sign = |i: usize| {
        let d = a.points[i].value - b.points[i].value;
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut out = Vec::new();
    for i in 1..a.points.len() {
        let (s0, s1) = (sign(i - 1), sign(i));
        if s0 != 0 && s1 != 0 && s0 != s1 {
            out.push(Crossover {
                metric: a.metric,
                kind_a: a.kind,
                kind_b: b.kind,
                capacity_low: a.points[i - 1].capacity,
                capacity_high: a.points[i].capacity,
            });
        }
    }
    Ok(out)
}

/// Every crossover between every pair of kinds, for every metric.
pub fn all_crossovers(series: &[ScalabilitySeries]) -> Result<Vec<Crossover>> {
    let mut out = Vec::new();
    for (i, a) in series.iter().enumerate() {
        for b in &series[i + 1..] {
            if a.metric == b.metric && a.kind != b.kind {
                out.extend(find_crossover(a, b)?);
            }
        }
    }
    Ok(out)
}

/// Pointwise division by `baseline`. Workload metrics are normalized per
/// profile first and then re-aggregated (mean, population stdev).
pub fn normalized_series(series: &ScalabilitySeries, baseline: &ScalabilitySeries) -> Result<ScalabilitySeries> {
    same_grid(series, baseline)?;
    if series.metric != baseline.metric {
        return Err(Error::invalid("baseline", "metric differs"));
    }
    let points = series
        .points
        .iter()
        .zip(&baseline.points)
        .map(|(p, b)| {
            if !p.samples.is_empty() && p.samples.len() == b.samples.len() {
                let samples: Vec<f64> = p.samples.iter().zip(&b.samples).map(|(x, y)| x / y).collect();
                let (value, stdev) = mean_stdev(&samples);
                SeriesPoint {
                    capacity: p.capacity,
                    value,
                    stdev: Some(stdev),
                    samples,
                }
            } else {
                SeriesPoint {
                    capacity: p.capacity,
                    value: p.value / b.value,
                    stdev: p.stdev.map(|s| s / b.value),
                    samples: Vec::new(),
                }
            }
        })
        .collect();
    Ok(ScalabilitySeries {
        metric: series.metric,
        kind: series.kind,
        points,
    })
}

/// Normalizes every series against the same-metric series of `baseline`.
pub fn normalize_all(series: &[ScalabilitySeries], baseline: MemoryKind) -> Result<Vec<ScalabilitySeries>> {
    series
        .iter()
        .map(|s| {
            let b = series
                .iter()
                .find(|b| b.metric == s.metric && b.kind == baseline)
                .ok_or_else(|| Error::invalid("baseline", format!("no {baseline} series for {}", s.metric)))?;
            normalized_series(s, b)
        })
        .collect()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Tidy form: `metric,kind,capacity_mb,value,stdev`.
pub fn write_series_csv<W: Write>(series: &[ScalabilitySeries], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["metric", "kind", "capacity_mb", "value", "stdev"])?;
    for s in series {
        for p in &s.points {
            w.write_record([
                s.metric.name(),
                s.kind.name(),
                &(p.capacity as f64 / MB as f64).to_string(),
                &p.value.to_string(),
                &p.stdev.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_crossovers_csv<W: Write>(crossovers: &[Crossover], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["metric", "kind_a", "kind_b", "cap_low_mb", "cap_high_mb"])?;
    for c in crossovers {
        w.write_record([
            c.metric.name(),
            c.kind_a.name(),
            c.kind_b.name(),
            &(c.capacity_low as f64 / MB as f64).to_string(),
            &(c.capacity_high as f64 / MB as f64).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn series_json(series: &[ScalabilitySeries]) -> Result<String> {
    Ok(serde_json::to_string_pretty(series)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(kind: MemoryKind, values: &[f64]) -> ScalabilitySeries {
        ScalabilitySeries {
            metric: Metric::ReadLatency,
            kind,
            points: values
                .iter()
                .enumerate()
                .map(|(i, &value)| SeriesPoint {
                    capacity: (1u64 << i) * MB,
                    value,
                    stdev: None,
                    samples: Vec::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn no_flip_when_uniformly_below() {
        let a = series(MemoryKind::SttMram, &[1.0, 2.0, 3.0]);
        let b = series(MemoryKind::Sram, &[2.0, 3.0, 4.0]);
        assert!(find_crossover(&a, &b).unwrap().is_empty());
        assert!(find_crossover(&a, &a).unwrap().is_empty());
    }

    #[test]
    fn single_flip_is_bracketed() {
        let a = series(MemoryKind::SotMram, &[3.0, 3.5, 4.0, 5.0]);
        let b = series(MemoryKind::Sram, &[2.0, 3.0, 4.5, 6.0]);
        let c = find_crossover(&a, &b).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].capacity_low, c[0].capacity_high), (2 * MB, 4 * MB));
    }

    #[test]
    fn grids_must_match() {
        let a = series(MemoryKind::SotMram, &[3.0, 3.5]);
        let b = series(MemoryKind::Sram, &[2.0, 3.0, 4.5]);
        assert!(find_crossover(&a, &b).is_err());
    }

    #[test]
    fn baseline_normalizes_to_one() {
        let b = series(MemoryKind::Sram, &[2.0, 3.0, 4.5]);
        let n = normalized_series(&b, &b).unwrap();
        assert!(n.points.iter().all(|p| p.value == 1.0));
    }
}
