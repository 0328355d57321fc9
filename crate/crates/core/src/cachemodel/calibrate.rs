//! Fits the free model coefficients (and the synthetic SRAM bitcell) to
//! measured cache-level anchors by coordinate descent in log space.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv;
use crate::techlib::{BitcellParams, BitcellSet, MemoryKind, TechConfig, FREE_COEFFICIENTS};
use crate::tuner::{tune, TunedConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMetric {
    ReadLatency,
    WriteLatency,
    ReadEnergy,
    WriteEnergy,
    LeakagePower,
    Area,
}

impl AnchorMetric {
    pub const ALL: [AnchorMetric; 6] = [
        AnchorMetric::ReadLatency,
        AnchorMetric::WriteLatency,
        AnchorMetric::ReadEnergy,
        AnchorMetric::WriteEnergy,
        AnchorMetric::LeakagePower,
        AnchorMetric::Area,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnchorMetric::ReadLatency => "read_latency",
            AnchorMetric::WriteLatency => "write_latency",
            AnchorMetric::ReadEnergy => "read_energy",
            AnchorMetric::WriteEnergy => "write_energy",
            AnchorMetric::LeakagePower => "leakage_power",
            AnchorMetric::Area => "area",
        }
    }

    pub fn of(self, t: &TunedConfig) -> f64 {
        let p = &t.ppa;
        match self {
            AnchorMetric::ReadLatency => p.read_latency,
            AnchorMetric::WriteLatency => p.write_latency,
            AnchorMetric::ReadEnergy => p.read_energy,
            AnchorMetric::WriteEnergy => p.write_energy,
            AnchorMetric::LeakagePower => p.leakage_power,
            AnchorMetric::Area => p.area,
        }
    }
}

impl fmt::Display for AnchorMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Target values for the EDAP-tuned design of one kind at one capacity.
/// Metrics left as `None` are not fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub kind: MemoryKind,
    pub capacity: u64,
    pub values: Vec<(AnchorMetric, f64)>,
}

impl Anchor {
    pub fn label(&self) -> String {
        format!("{}@{}MB", self.kind, self.capacity as f64 / super::MB as f64)
    }

    /// Anchor reproducing an existing tuned design exactly.
    pub fn from_tuned(t: &TunedConfig) -> Self {
        Anchor {
            kind: t.kind,
            capacity: t.capacity,
            values: AnchorMetric::ALL.iter().map(|&m| (m, m.of(t))).collect(),
        }
    }
}

/// Parses an anchor document: one `[[anchor]]` table per design with `kind`,
/// `capacity_mb` and any subset of the six metric names (ns, nJ, mW, mm^2).
pub fn parse_anchors(text: &str) -> Result<Vec<Anchor>> {
    let table = kv::parse(text)?;
    let list = match table.get("anchor") {
        Some(toml::Value::Array(a)) => a,
        Some(_) => return Err(Error::invalid("anchor", "expected an array of tables")),
        None => return Err(Error::MissingField("anchor".into())),
    };
    let mut anchors = Vec::with_capacity(list.len());
    for item in list {
        let t = item
            .as_table()
            .ok_or_else(|| Error::invalid("anchor", "expected an array of tables"))?;
        let kind: MemoryKind = kv::string(t, "kind")?.parse()?;
        let mb = kv::positive(t, "capacity_mb")?;
        let capacity = (mb * super::MB as f64).round() as u64;
        let mut values = Vec::new();
        for m in AnchorMetric::ALL {
            if t.contains_key(m.name()) {
                values.push((m, kv::positive(t, m.name())?));
            }
        }
        for key in t.keys() {
            if key != "kind" && key != "capacity_mb" && !AnchorMetric::ALL.iter().any(|m| m.name() == key) {
                return Err(Error::invalid(key.as_str(), "unknown anchor field"));
            }
        }
        if values.is_empty() {
            return Err(Error::invalid("anchor", "anchor lists no metrics"));
        }
        anchors.push(Anchor { kind, capacity, values });
    }
    if anchors.is_empty() {
        return Err(Error::invalid("anchor", "no anchors given"));
    }
    Ok(anchors)
}

pub fn load_anchors(path: impl AsRef<Path>) -> Result<Vec<Anchor>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_anchors(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    /// Calibration fails when the best achievable max relative error is above this.
    pub ceiling: f64,
    /// Each coefficient stays within `[start / range, start * range]`.
    pub range: f64,
    /// First log-space step (a factor of `exp(step)`).
    pub initial_step: f64,
    pub min_step: f64,
    pub max_sweeps: usize,
    /// Move the synthetic SRAM bitcell together with the coefficients.
    pub fit_sram_bitcell: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            ceiling: 0.15,
            range: 16.0,
            initial_step: 0.25,
            min_step: 0.005,
            max_sweeps: 60,
            fit_sram_bitcell: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub anchor: String,
    pub metric: AnchorMetric,
    pub target: f64,
    pub model: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub tech: TechConfig,
    pub cells: BitcellSet,
    pub residuals: Vec<Residual>,
    pub max_error: f64,
    pub evaluations: usize,
}

impl Calibration {
    pub fn report(&self) -> String {
        let mut s = String::from("anchor,metric,target,model,relative_error\n");
        for r in &self.residuals {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.anchor, r.metric, r.target, r.model, r.relative_error
            ));
        }
        s
    }
}

const SRAM_COORDS: [&str; 4] = [
    "sram.sense_latency",
    "sram.sense_energy",
    "sram.write_latency",
    "sram.write_energy",
];

fn read_coord(tech: &TechConfig, cells: &BitcellSet, name: &str) -> f64 {
    match name {
        "sram.sense_latency" => cells.sram.sense_latency,
        "sram.sense_energy" => cells.sram.sense_energy,
        "sram.write_latency" => cells.sram.write_latency_set,
        "sram.write_energy" => cells.sram.write_energy_set,
        _ => tech.get(name).expect("coordinate names are checked"),
    }
}

fn write_coord(tech: &mut TechConfig, cells: &mut BitcellSet, name: &str, v: f64) {
    let sram: &mut BitcellParams = &mut cells.sram;
    match name {
        "sram.sense_latency" => sram.sense_latency = v,
        "sram.sense_energy" => sram.sense_energy = v,
        "sram.write_latency" => {
            sram.write_latency_set = v;
            sram.write_latency_reset = v;
        }
        "sram.write_energy" => {
            sram.write_energy_set = v;
            sram.write_energy_reset = v;
        }
        _ => {
            tech.set(name, v);
        }
    }
}

fn residuals(anchors: &[Anchor], tech: &TechConfig, cells: &BitcellSet) -> Result<Vec<Residual>> {
    let mut out = Vec::new();
    for a in anchors {
        let tuned = tune(cells.get(a.kind), a.capacity, tech)?;
        for &(m, target) in &a.values {
            let model = m.of(&tuned);
            out.push(Residual {
                anchor: a.label(),
                metric: m,
                target,
                model,
                relative_error: (model - target).abs() / target,
            });
        }
    }
    Ok(out)
}

/// Max relative error first, mean relative error as the tie-breaker.
fn max_error(rs: &[Residual]) -> f64 {
    rs.iter().map(|r| r.relative_error).fold(0.0, f64::max)
}

pub fn calibrate(anchors: &[Anchor], tech: &TechConfig, cells: &BitcellSet) -> Result<Calibration> {
    calibrate_with(anchors, tech, cells, &CalibrationOptions::default())
}

/// Coordinate descent: every free coordinate is tried at `x * exp(+-step)`;
/// improving moves are kept, and the step halves after a sweep without
/// improvement. Coordinates that start at zero stay at zero.
pub fn calibrate_with(
    anchors: &[Anchor],
    tech: &TechConfig,
    cells: &BitcellSet,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    if anchors.is_empty() {
        return Err(Error::invalid("anchors", "at least one anchor is required"));
    }
    tech.validate()?;
    let mut coords: Vec<&str> = FREE_COEFFICIENTS.to_vec();
    if opts.fit_sram_bitcell {
        coords.extend(SRAM_COORDS);
    }
    let starts: Vec<f64> = coords.iter().map(|c| read_coord(tech, cells, c)).collect();

    let mut cur_tech = tech.clone();
    let mut cur_cells = cells.clone();
    let mut cur_res = residuals(anchors, &cur_tech, &cur_cells)?;
    let mut cur = max_error(&cur_res);
    let mut evaluations = 1;
    let mut step = opts.initial_step;

    for _ in 0..opts.max_sweeps {
        if cur == 0.0 || step < opts.min_step {
            break;
        }
        let mut improved = false;
        for (i, &name) in coords.iter().enumerate() {
            let x = read_coord(&cur_tech, &cur_cells, name);
            if x == 0.0 {
                continue;
            }
            let lo = starts[i] / opts.range;
            let mut hi = starts[i] * opts.range;
            if TechConfig::is_fraction(name) {
                hi = hi.min(1.0);
            }
            for dir in [1.0, -1.0] {
                let v = (x * (dir * step).exp()).clamp(lo, hi);
                if v == x {
                    continue;
                }
                let mut t = cur_tech.clone();
                let mut c = cur_cells.clone();
                write_coord(&mut t, &mut c, name, v);
                evaluations += 1;
                let res = match residuals(anchors, &t, &c) {
                    Ok(r) => r,
                    Err(_) => continue,
                };
                // only a strict drop of the max error counts, so a calibrated
                // point is a fixed point of calibration
                let s = max_error(&res);
                if s < cur - 1e-12 {
                    cur_tech = t;
                    cur_cells = c;
                    cur_res = res;
                    cur = s;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    if cur > opts.ceiling {
        return Err(Error::CalibrationDiverged {
            max_error: cur,
            ceiling: opts.ceiling,
            residuals: cur_res
                .iter()
                .map(|r| (format!("{}:{}", r.anchor, r.metric), r.relative_error))
                .collect(),
        });
    }
    Ok(Calibration {
        tech: cur_tech,
        cells: cur_cells,
        residuals: cur_res,
        max_error: cur,
        evaluations,
    })
}
