//! First-order cache power/performance/area model.
//!
//! A cache is a set of banks, each bank a grid of mats, each mat one
//! subarray of `rows x cols` bitcells sharing `cols / senseamp_mux` sense
//! amplifiers and write drivers. The formulas live in [`evaluate_design`] and
//! are restated in [`model_ledger`].

mod calibrate;

pub use calibrate::{
    calibrate, calibrate_with, load_anchors, parse_anchors, Anchor, AnchorMetric, Calibration,
    CalibrationOptions, Residual,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::techlib::{BitcellParams, MemoryKind, TechConfig};

pub const MB: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessType {
    Normal,
    Fast,
    Sequential,
}

impl AccessType {
    pub const ALL: [AccessType; 3] = [AccessType::Normal, AccessType::Fast, AccessType::Sequential];

    pub fn name(self) -> &'static str {
        match self {
            AccessType::Normal => "Normal",
            AccessType::Fast => "Fast",
            AccessType::Sequential => "Sequential",
        }
    }
}

impl fmt::Display for AccessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AccessType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AccessType::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("access_type", format!("unknown access type `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptTarget {
    ReadLatency,
    WriteLatency,
    ReadEnergy,
    WriteEnergy,
    ReadEDP,
    WriteEDP,
    Area,
    Leakage,
}

impl OptTarget {
    pub const ALL: [OptTarget; 8] = [
        OptTarget::ReadLatency,
        OptTarget::WriteLatency,
        OptTarget::ReadEnergy,
        OptTarget::WriteEnergy,
        OptTarget::ReadEDP,
        OptTarget::WriteEDP,
        OptTarget::Area,
        OptTarget::Leakage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptTarget::ReadLatency => "ReadLatency",
            OptTarget::WriteLatency => "WriteLatency",
            OptTarget::ReadEnergy => "ReadEnergy",
            OptTarget::WriteEnergy => "WriteEnergy",
            OptTarget::ReadEDP => "ReadEDP",
            OptTarget::WriteEDP => "WriteEDP",
            OptTarget::Area => "Area",
            OptTarget::Leakage => "Leakage",
        }
    }

    /// The scalar this target minimizes.
    pub fn metric(self, ppa: &CachePPA) -> f64 {
        match self {
            OptTarget::ReadLatency => ppa.read_latency,
            OptTarget::WriteLatency => ppa.write_latency,
            OptTarget::ReadEnergy => ppa.read_energy,
            OptTarget::WriteEnergy => ppa.write_energy,
            OptTarget::ReadEDP => ppa.read_energy * ppa.read_latency,
            OptTarget::WriteEDP => ppa.write_energy * ppa.write_latency,
            OptTarget::Area => ppa.area,
            OptTarget::Leakage => ppa.leakage_power,
        }
    }
}

impl fmt::Display for OptTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptTarget::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("target", format!("unknown optimization target `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Organization {
    pub banks: u32,
    pub mats_per_bank: u32,
    pub rows: u32,
    pub cols: u32,
    pub senseamp_mux: u32,
    pub line_size: u32,
    pub associativity: u32,
}

impl Organization {
    /// One bitcell stores one bit.
    pub fn capacity_bits(&self) -> u64 {
        self.banks as u64 * self.mats_per_bank as u64 * self.rows as u64 * self.cols as u64
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bits() / 8
    }

    pub fn line_bits(&self) -> u32 {
        self.line_size * 8
    }

    /// Bits delivered by one mat per access.
    pub fn bits_per_mat(&self) -> u32 {
        self.cols / self.senseamp_mux
    }
}

/// Search space for [`enumerate_organizations`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrgBounds {
    pub max_banks: u32,
    pub max_mats_per_bank: u32,
    pub min_rows: u32,
    pub max_rows: u32,
    pub min_cols: u32,
    pub max_cols: u32,
    pub senseamp_mux: Vec<u32>,
    pub line_size: u32,
    pub associativity: u32,
}

impl Default for OrgBounds {
    fn default() -> Self {
        OrgBounds {
            max_banks: 64,
            max_mats_per_bank: 64,
            min_rows: 64,
            max_rows: 1024,
            min_cols: 64,
            max_cols: 1024,
            senseamp_mux: vec![1, 2, 4, 8],
            line_size: 128,
            associativity: 16,
        }
    }
}

impl OrgBounds {
    pub fn validate(&self) -> Result<()> {
        let pow2 = |v: u32| v >= 1 && v.is_power_of_two();
        if self.max_banks == 0 {
            return Err(Error::invalid("max_banks", "must be at least 1"));
        }
        for (name, v) in [
            ("max_mats_per_bank", self.max_mats_per_bank),
            ("min_rows", self.min_rows),
            ("max_rows", self.max_rows),
            ("min_cols", self.min_cols),
            ("max_cols", self.max_cols),
            ("line_size", self.line_size),
        ] {
            if !pow2(v) {
                return Err(Error::invalid(name, "must be a power of two"));
            }
        }
        if self.min_rows > self.max_rows || self.min_cols > self.max_cols {
            return Err(Error::invalid("rows/cols", "minimum exceeds maximum"));
        }
        if self.associativity == 0 {
            return Err(Error::invalid("associativity", "must be at least 1"));
        }
        if self.senseamp_mux.is_empty() || !self.senseamp_mux.iter().all(|&m| pow2(m)) {
            return Err(Error::invalid("senseamp_mux", "must be a non-empty list of powers of two"));
        }
        Ok(())
    }
}

fn powers_of_two(lo: u32, hi: u32) -> impl Iterator<Item = u32> {
    std::iter::successors(Some(lo), |&v| v.checked_mul(2)).take_while(move |&v| v <= hi)
}

/// All organizations storing exactly `capacity` bytes, in lexicographic
/// `(banks, mats_per_bank, rows, cols, senseamp_mux)` order.
///
/// Banks may be any integer so that capacities such as 3 MB or 7 MB are
/// reachable; mats, rows and columns are powers of two. An organization is
/// kept only if one bank can deliver a full line in a single access.
pub fn enumerate_organizations(capacity: u64, bounds: &OrgBounds) -> Result<Vec<Organization>> {
    let infeasible = Error::InfeasibleCapacity { capacity };
    let way_bytes = bounds.line_size as u64 * bounds.associativity as u64;
    if capacity == 0 || !capacity.is_multiple_of(way_bytes) {
        return Err(infeasible);
    }
    let bits = capacity * 8;
    let line_bits = bounds.line_size * 8;
    let mut mux = bounds.senseamp_mux.clone();
    mux.sort_unstable();
    mux.dedup();

    let mut out = Vec::new();
    for banks in 1..=bounds.max_banks {
        if !bits.is_multiple_of(banks as u64) {
            continue;
        }
        let per_bank = bits / banks as u64;
        for mats in powers_of_two(1, bounds.max_mats_per_bank) {
            for rows in powers_of_two(bounds.min_rows, bounds.max_rows) {
                let denom = mats as u64 * rows as u64;
                if !per_bank.is_multiple_of(denom) {
                    continue;
                }
                let cols = per_bank / denom;
                if cols < bounds.min_cols as u64 || cols > bounds.max_cols as u64 || !cols.is_power_of_two() {
                    continue;
                }
                let cols = cols as u32;
                for &m in &mux {
                    if m > cols || mats * (cols / m) < line_bits {
                        continue;
                    }
                    out.push(Organization {
                        banks,
                        mats_per_bank: mats,
                        rows,
                        cols,
                        senseamp_mux: m,
                        line_size: bounds.line_size,
                        associativity: bounds.associativity,
                    });
                }
            }
        }
    }
    if out.is_empty() {
        return Err(infeasible);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachePPA {
    pub kind: MemoryKind,
    /// bytes
    pub capacity: u64,
    /// ns
    pub read_latency: f64,
    /// ns
    pub write_latency: f64,
    /// nJ per access
    pub read_energy: f64,
    /// nJ per access
    pub write_energy: f64,
    /// mW
    pub leakage_power: f64,
    /// mm^2
    pub area: f64,
    pub organization: Organization,
    pub access_type: AccessType,
}

/// Internal quantities of one evaluation, exposed for the model ledger and
/// for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakdown {
    pub route_delay: f64,
    pub decoder_delay: f64,
    pub wordline_delay: f64,
    pub bitline_delay: f64,
    pub sense_delay: f64,
    pub tag_delay: f64,
    pub peripheral_area: f64,
}

/// Access-type independent part of an evaluation.
struct Geometry {
    area_mm2: f64,
    periph_mm2: f64,
    route: f64,
    t_dec: f64,
    t_wl: f64,
    t_bl: f64,
    t_blw: f64,
    t_sense: f64,
    t_tag: f64,
    per_mat_common: f64,
    junction_per_fin: f64,
    route_energy_per_bit: f64,
    broadcast: f64,
}

fn geometry(cell: &BitcellParams, org: &Organization, tech: &TechConfig) -> Geometry {
    let cell_area = cell.area_norm * tech.sram_cell_area_um2();
    let side = cell_area.sqrt();
    let rows = org.rows as f64;
    let cols = org.cols as f64;
    let mats = org.mats_per_bank as f64;
    let banks = org.banks as f64;
    let per_mat_out = org.bits_per_mat() as f64;
    let log_rows = rows.log2();

    let column_circuit = tech.senseamp_area
        + tech.write_driver_area_base
        + tech.write_driver_area_per_pj * cell.write_energy_mean();
    let mat_periph = per_mat_out * column_circuit + rows * tech.decoder_area_per_row + tech.mat_overhead_area;
    let mat_area = rows * cols * cell_area + mat_periph;
    let bank_area = mats * mat_area + tech.bank_overhead_area;
    let area_mm2 = banks * bank_area * 1e-6;
    let periph_mm2 = banks * (mats * mat_periph + tech.bank_overhead_area) * 1e-6;

    let span = area_mm2.sqrt();
    // Elmore delay of an unrepeated segment is 0.38 RC; ohm * fF = 1e-6 ns.
    let route = tech.route_delay_per_mm * span + 0.38e-6 * tech.wire_res_per_mm * tech.wire_cap_per_mm * span * span;

    let wordline_mm = cols * side * 1e-3;
    let bitline_um = rows * side;
    let t_dec = tech.decoder_delay_base + tech.decoder_delay_per_stage * log_rows;
    let t_wl = tech.wordline_delay_coeff * wordline_mm * wordline_mm;
    let t_bl = tech.bitline_sense_coeff * bitline_um / cell.read_power_uw();
    let t_blw = tech.bitline_write_coeff * bitline_um;

    let per_mat_common = tech.wordline_energy_per_mm * wordline_mm
        + tech.bitline_energy_per_mm * cols * bitline_um * 1e-3
        + tech.decoder_energy_per_stage * log_rows;
    // Access-transistor drains hang on the bitlines, one junction per fin.
    let junction_per_fin = tech.bitline_junction_energy * rows * cols;
    // fF * V^2 = 1e-6 nJ
    let route_energy_per_bit = tech.wire_cap_per_mm * tech.vdd * tech.vdd * 1e-6 * span;
    // Total H-tree length reaching N leaves spread over area A grows as sqrt(N * A).
    let broadcast = tech.htree_energy_coeff * (area_mm2 * banks * mats).sqrt();

    Geometry {
        area_mm2,
        periph_mm2,
        route,
        t_dec,
        t_wl,
        t_bl,
        t_blw,
        t_sense: cell.sense_latency * 1e-3,
        t_tag: tech.tag_delay_base + t_dec,
        per_mat_common,
        junction_per_fin,
        route_energy_per_bit,
        broadcast,
    }
}

fn check_org(org: &Organization) -> Result<()> {
    let fail = |msg: &str| Err(Error::InfeasibleOrganization(format!("{org:?}: {msg}")));
    if org.banks == 0 || org.mats_per_bank == 0 || org.rows == 0 || org.cols == 0 || org.associativity == 0 {
        return fail("all counts must be at least 1");
    }
    if org.senseamp_mux == 0 || org.senseamp_mux > org.cols || !org.cols.is_multiple_of(org.senseamp_mux) {
        return fail("senseamp_mux must divide cols");
    }
    if org.line_size == 0 {
        return fail("line size must be positive");
    }
    if (org.mats_per_bank as u64) * (org.bits_per_mat() as u64) < org.line_bits() as u64 {
        return fail("a bank cannot deliver a full line");
    }
    if !org.capacity_bits().is_multiple_of(org.line_bits() as u64 * org.associativity as u64) {
        return fail("capacity is not a whole number of sets");
    }
    Ok(())
}

fn assemble(cell: &BitcellParams, org: &Organization, acc: AccessType, tech: &TechConfig, g: &Geometry) -> CachePPA {
    let line_bits = org.line_bits() as f64;
    let ways = org.associativity as f64;
    let per_mat_out = org.bits_per_mat() as f64;

    let t_data = g.t_dec + g.t_wl + g.t_bl + g.t_sense;
    let (core, sensed_bits, routed_bits) = match acc {
        AccessType::Sequential => (g.t_tag + t_data, line_bits, line_bits),
        AccessType::Normal => (
            g.t_tag.max(t_data) + tech.way_select_fraction * g.t_tag.min(t_data),
            line_bits * ways,
            line_bits,
        ),
        AccessType::Fast => (g.t_tag.max(t_data), line_bits * ways, line_bits * ways),
    };
    let read_latency = 2.0 * g.route + core;
    let write_latency = g.route + g.t_tag + g.t_dec + g.t_wl + g.t_blw + cell.write_latency_max() * 1e-3;

    // Every cell on the open row conducts read current; only the muxed
    // columns fire a sense amplifier.
    let per_mat_read = g.per_mat_common
        + g.junction_per_fin * cell.fin_count_read as f64
        + cell.sense_energy * 1e-3 * org.cols as f64
        + tech.senseamp_energy * per_mat_out;
    let per_mat_write = g.per_mat_common
        + g.junction_per_fin * cell.fin_count_write as f64
        + tech.write_activity * cell.write_energy_mean() * 1e-3 * per_mat_out;
    let read_energy = sensed_bits / per_mat_out * per_mat_read
        + g.route_energy_per_bit * routed_bits
        + tech.tag_energy
        + g.broadcast;
    let write_energy = line_bits / per_mat_out * per_mat_write
        + g.route_energy_per_bit * line_bits
        + tech.tag_energy
        + g.broadcast;

    // nW per cell -> mW
    let retention = tech.leakage_per_bitcell * 1e-6 * org.capacity_bits() as f64 * cell.kind.retention_leakage_factor();
    let leakage_power = retention + tech.peripheral_leakage_density * g.periph_mm2;

    CachePPA {
        kind: cell.kind,
        capacity: org.capacity_bytes(),
        read_latency,
        write_latency,
        read_energy,
        write_energy,
        leakage_power,
        area: g.area_mm2,
        organization: *org,
        access_type: acc,
    }
}

/// Evaluates one organization under one access type.
pub fn evaluate_design(
    cell: &BitcellParams,
    org: &Organization,
    acc: AccessType,
    tech: &TechConfig,
) -> Result<CachePPA> {
    check_org(org)?;
    let ppa = assemble(cell, org, acc, tech, &geometry(cell, org, tech));
    let values = [
        ppa.read_latency,
        ppa.write_latency,
        ppa.read_energy,
        ppa.write_energy,
        ppa.leakage_power,
        ppa.area,
    ];
    if values.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(ppa)
    } else {
        Err(Error::InfeasibleOrganization(format!(
            "{org:?}: model produced a non-positive metric (check technology coefficients)"
        )))
    }
}

/// Stage-level breakdown of a design, for reports.
pub fn breakdown(cell: &BitcellParams, org: &Organization, tech: &TechConfig) -> Breakdown {
    let g = geometry(cell, org, tech);
    Breakdown {
        route_delay: g.route,
        decoder_delay: g.t_dec,
        wordline_delay: g.t_wl,
        bitline_delay: g.t_bl,
        sense_delay: g.t_sense,
        tag_delay: g.t_tag,
        peripheral_area: g.periph_mm2,
    }
}

/// Every enumerated organization of one capacity evaluated under every access
/// type. Optimizing over it is equivalent to re-enumerating per query.
#[derive(Debug, Clone)]
pub struct DesignSpace {
    pub kind: MemoryKind,
    pub capacity: u64,
    /// `designs[a][i]` is organization `i` under `AccessType::ALL[a]`.
    designs: [Vec<CachePPA>; 3],
}

impl DesignSpace {
    pub fn build(cell: &BitcellParams, capacity: u64, tech: &TechConfig, bounds: &OrgBounds) -> Result<Self> {
        let orgs = enumerate_organizations(capacity, bounds)?;
        let mut designs: [Vec<CachePPA>; 3] = Default::default();
        for slot in designs.iter_mut() {
            slot.reserve(orgs.len());
        }
        for org in &orgs {
            let g = geometry(cell, org, tech);
            for (slot, acc) in designs.iter_mut().zip(AccessType::ALL) {
                slot.push(assemble(cell, org, acc, tech, &g));
            }
        }
        Ok(DesignSpace { kind: cell.kind, capacity, designs })
    }

    pub fn designs(&self, acc: AccessType) -> &[CachePPA] {
        &self.designs[acc as usize]
    }

    /// Argmin of `target` under `acc`; the first minimum in enumeration
    /// order wins.
    pub fn optimize(&self, target: OptTarget, acc: AccessType) -> &CachePPA {
        let designs = self.designs(acc);
        let mut best = &designs[0];
        let mut best_value = target.metric(best);
        for d in &designs[1..] {
            let v = target.metric(d);
            if v < best_value {
                best = d;
                best_value = v;
            }
        }
        best
    }
}

pub fn optimize(
    cell: &BitcellParams,
    capacity: u64,
    target: OptTarget,
    acc: AccessType,
    tech: &TechConfig,
) -> Result<CachePPA> {
    optimize_within(cell, capacity, target, acc, tech, &OrgBounds::default())
}

pub fn optimize_within(
    cell: &BitcellParams,
    capacity: u64,
    target: OptTarget,
    acc: AccessType,
    tech: &TechConfig,
    bounds: &OrgBounds,
) -> Result<CachePPA> {
    let orgs = enumerate_organizations(capacity, bounds)?;
    let mut best: Option<(f64, CachePPA)> = None;
    for org in &orgs {
        let ppa = assemble(cell, org, acc, tech, &geometry(cell, org, tech));
        let v = target.metric(&ppa);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, ppa));
        }
    }
    Ok(best.expect("enumeration is non-empty").1)
}

/// Human-readable statement of every formula used by [`evaluate_design`].
pub fn model_ledger(tech: &TechConfig) -> String {
    let mut s = String::new();
    s.push_str(LEDGER);
    s.push_str("\nCoefficients\n------------\n");
    for &field in TechConfig::FIELDS {
        s.push_str(&format!("{field} = {}\n", tech.get(field).unwrap()));
    }
    s
}

const LEDGER: &str = "\
Cache model ledger, version 1
=============================

Units: ns, nJ, mW, mm^2 unless stated. cell = area_norm * sram_cell_area_f2 * node^2,
side = sqrt(cell). One bitcell stores one bit.

Organization
  bits = banks * mats_per_bank * rows * cols
  banks in 1..=64 (any integer), mats/rows/cols powers of two,
  senseamp_mux in {1,2,4,8}; a bank must deliver a full line:
  mats_per_bank * cols / mux >= line bits.

Area
  column_circuit = senseamp_area + write_driver_area_base
                   + write_driver_area_per_pj * mean(write_energy_set, write_energy_reset)
  mat_periph = (cols / mux) * column_circuit + rows * decoder_area_per_row + mat_overhead_area
  mat_area   = rows * cols * cell + mat_periph
  bank_area  = mats * mat_area + bank_overhead_area
  area       = banks * bank_area

Delay
  span    = sqrt(area)
  route   = route_delay_per_mm * span + 0.38 * wire_res_per_mm * wire_cap_per_mm * span^2
  decode  = decoder_delay_base + decoder_delay_per_stage * log2(rows)
  wordline= wordline_delay_coeff * (cols * side)^2
  bitline = bitline_sense_coeff * (rows * side) / (sense_energy / sense_latency)
  sense   = sense_latency
  tag     = tag_delay_base + decode
  data    = decode + wordline + bitline + sense
  read    = 2 * route + core, where core is
              Sequential: tag + data           (one way sensed and routed)
              Normal:     max(tag, data) + way_select_fraction * min(tag, data)
                                               (all ways sensed, one routed)
              Fast:       max(tag, data)       (all ways sensed and routed)
  write   = route + tag + decode + wordline + bitline_write_coeff * (rows * side)
            + max(write_latency_set, write_latency_reset)

Energy
  mat_common = wordline_energy_per_mm * (cols * side)
             + bitline_energy_per_mm * cols * (rows * side)
             + decoder_energy_per_stage * log2(rows)
  junction   = bitline_junction_energy * rows * cols
  mat_read   = mat_common + junction * fin_count_read + sense_energy * cols
               + senseamp_energy * cols / mux
  mat_write  = mat_common + junction * fin_count_write
               + write_activity * mean(write_energy_set, write_energy_reset) * cols / mux
  wire_bit   = wire_cap_per_mm * vdd^2 * span
  broadcast  = htree_energy_coeff * sqrt(area * banks * mats_per_bank)
  read_energy  = sensed_bits / (cols / mux) * mat_read + wire_bit * routed_bits
                 + tag_energy + broadcast
  write_energy = line_bits / (cols / mux) * mat_write + wire_bit * line_bits
                 + tag_energy + broadcast

Leakage
  leakage = leakage_per_bitcell * bits * retention + peripheral_leakage_density * peripheral_area
  retention = 1 for SRAM, 0 for STT-MRAM and SOT-MRAM.
";
