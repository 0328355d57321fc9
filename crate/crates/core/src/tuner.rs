//! EDAP-driven design selection: for one memory kind and capacity, sweep
//! every optimization target and access type and keep the design with the
//! lowest energy-delay-area product.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cachemodel::{AccessType, CachePPA, DesignSpace, OptTarget, OrgBounds, MB};
use crate::error::{Error, Result};
use crate::techlib::{BitcellParams, MemoryKind, TechConfig};

pub const DEFAULT_CAPACITIES_MB: [u64; 6] = [1, 2, 4, 8, 16, 32];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedConfig {
    pub kind: MemoryKind,
    pub capacity: u64,
    pub chosen_target: OptTarget,
    pub chosen_access: AccessType,
    pub ppa: CachePPA,
    pub edap: f64,
    pub read_cycles: u64,
    pub write_cycles: u64,
}

/// `(E_r * t_r + E_w * t_w) * area` in nJ * ns * mm^2.
pub fn calculate_edap(ppa: &CachePPA) -> f64 {
    (ppa.read_energy * ppa.read_latency + ppa.write_energy * ppa.write_latency) * ppa.area
}

/// Whole clock cycles covering `latency_ns`, never fewer than one.
pub fn latency_cycles(latency_ns: f64, tech: &TechConfig) -> u64 {
    let cycles = (latency_ns * tech.clock_frequency * 1e-3).ceil();
    (cycles as u64).max(1)
}

pub fn tune(cell: &BitcellParams, capacity: u64, tech: &TechConfig) -> Result<TunedConfig> {
    tune_within(cell, capacity, tech, &OrgBounds::default())
}

pub fn tune_within(cell: &BitcellParams, capacity: u64, tech: &TechConfig, bounds: &OrgBounds) -> Result<TunedConfig> {
    let space = DesignSpace::build(cell, capacity, tech, bounds)?;
    Ok(tune_space(&space, tech))
}

/// Runs the target x access-type loop over an already evaluated design space.
pub fn tune_space(space: &DesignSpace, tech: &TechConfig) -> TunedConfig {
    let mut best: Option<(f64, OptTarget, AccessType, &CachePPA)> = None;
    for target in OptTarget::ALL {
        for acc in AccessType::ALL {
            let ppa = space.optimize(target, acc);
            let q = calculate_edap(ppa);
            if best.is_none_or(|(b, ..)| q < b) {
                best = Some((q, target, acc, ppa));
            }
        }
    }
    let (edap, chosen_target, chosen_access, ppa) = best.expect("target and access sets are non-empty");
    TunedConfig {
        kind: space.kind,
        capacity: space.capacity,
        chosen_target,
        chosen_access,
        ppa: ppa.clone(),
        edap,
        read_cycles: latency_cycles(ppa.read_latency, tech),
        write_cycles: latency_cycles(ppa.write_latency, tech),
    }
}

#[derive(Debug, Default)]
pub struct TuneOutcome {
    pub configs: Vec<TunedConfig>,
    pub failures: Vec<(MemoryKind, u64, Error)>,
}

/// Tunes every `(kind, capacity)` pair. Kinds keep the caller's order,
/// capacities are sorted ascending; a failing pair is recorded and skipped.
pub fn tune_all(cells: &[BitcellParams], capacities: &[u64], tech: &TechConfig) -> TuneOutcome {
    let mut caps = capacities.to_vec();
    caps.sort_unstable();
    caps.dedup();
    let jobs: Vec<(&BitcellParams, u64)> = cells.iter().flat_map(|c| caps.iter().map(move |&cap| (c, cap))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(cell, cap)| tune(cell, cap, tech)).collect();

    let mut outcome = TuneOutcome::default();
    for ((cell, cap), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(c) => outcome.configs.push(c),
            Err(e) => outcome.failures.push((cell.kind, cap, e)),
        }
    }
    outcome
}

const CSV_HEADER: [&str; 21] = [
    "kind",
    "capacity_bytes",
    "capacity_mb",
    "chosen_target",
    "chosen_access",
    "read_latency_ns",
    "write_latency_ns",
    "read_energy_nj",
    "write_energy_nj",
    "leakage_mw",
    "area_mm2",
    "edap",
    "read_cycles",
    "write_cycles",
    "banks",
    "mats_per_bank",
    "rows",
    "cols",
    "senseamp_mux",
    "line_size",
    "associativity",
];

pub fn write_csv<W: Write>(configs: &[TunedConfig], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in configs {
        let p = &c.ppa;
        let o = &p.organization;
        w.write_record([
            c.kind.to_string(),
            c.capacity.to_string(),
            (c.capacity as f64 / MB as f64).to_string(),
            c.chosen_target.to_string(),
            c.chosen_access.to_string(),
            p.read_latency.to_string(),
            p.write_latency.to_string(),
            p.read_energy.to_string(),
            p.write_energy.to_string(),
            p.leakage_power.to_string(),
            p.area.to_string(),
            c.edap.to_string(),
            c.read_cycles.to_string(),
            c.write_cycles.to_string(),
            o.banks.to_string(),
            o.mats_per_bank.to_string(),
            o.rows.to_string(),
            o.cols.to_string(),
            o.senseamp_mux.to_string(),
            o.line_size.to_string(),
            o.associativity.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn to_json(configs: &[TunedConfig]) -> Result<String> {
    Ok(serde_json::to_string_pretty(configs)?)
}
