//! Memory technologies: bitcell characterization records and the technology
//! constants that feed the analytical cache model.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MemoryKind {
    #[serde(rename = "SRAM")]
    Sram,
    #[serde(rename = "STT_MRAM")]
    SttMram,
    #[serde(rename = "SOT_MRAM")]
    SotMram,
}

impl MemoryKind {
    pub const ALL: [MemoryKind; 3] = [MemoryKind::Sram, MemoryKind::SttMram, MemoryKind::SotMram];

    pub fn name(self) -> &'static str {
        match self {
            MemoryKind::Sram => "SRAM",
            MemoryKind::SttMram => "STT_MRAM",
            MemoryKind::SotMram => "SOT_MRAM",
        }
    }

    /// Fraction of the array that keeps leaking to retain data. MRAM cells are
    /// non-volatile and contribute nothing; only their CMOS periphery leaks.
    pub fn retention_leakage_factor(self) -> f64 {
        match self {
            MemoryKind::Sram => 1.0,
            MemoryKind::SttMram | MemoryKind::SotMram => 0.0,
        }
    }

    pub fn is_mram(self) -> bool {
        self != MemoryKind::Sram
    }
}

impl fmt::Display for MemoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MemoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "SRAM" => Ok(MemoryKind::Sram),
            "STT_MRAM" | "STT" => Ok(MemoryKind::SttMram),
            "SOT_MRAM" | "SOT" => Ok(MemoryKind::SotMram),
            _ => Err(Error::UnknownMemoryKind(s.to_string())),
        }
    }
}

/// Device-level characterization of one bitcell flavor.
///
/// Units: latencies in ps, energies in pJ, `area_norm` relative to the
/// foundry SRAM bitcell. Fin counts only size the drain junctions that load
/// the bitlines (read path and write path respectively).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitcellParams {
    pub kind: MemoryKind,
    pub sense_latency: f64,
    pub sense_energy: f64,
    pub write_latency_set: f64,
    pub write_latency_reset: f64,
    pub write_energy_set: f64,
    pub write_energy_reset: f64,
    pub fin_count_read: u32,
    pub fin_count_write: u32,
    pub area_norm: f64,
}

const BITCELL_POSITIVE: [&str; 7] = [
    "sense_latency",
    "sense_energy",
    "write_latency_set",
    "write_latency_reset",
    "write_energy_set",
    "write_energy_reset",
    "area_norm",
];

impl BitcellParams {
    /// Write pulse that a cache write must accommodate (ps).
    pub fn write_latency_max(&self) -> f64 {
        self.write_latency_set.max(self.write_latency_reset)
    }

    /// Per-bit write energy averaged over both polarities (pJ).
    pub fn write_energy_mean(&self) -> f64 {
        0.5 * (self.write_energy_set + self.write_energy_reset)
    }

    /// Average read power drawn by one selected cell (uW).
    pub fn read_power_uw(&self) -> f64 {
        // pJ / ps = W
        self.sense_energy / self.sense_latency * 1e6
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            self.sense_latency,
            self.sense_energy,
            self.write_latency_set,
            self.write_latency_reset,
            self.write_energy_set,
            self.write_energy_reset,
            self.area_norm,
        ];
        for (name, v) in BITCELL_POSITIVE.iter().zip(values) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveValue(name.to_string()));
            }
        }
        match self.kind {
            MemoryKind::Sram => {
                if self.area_norm != 1.0 {
                    return Err(Error::invalid("area_norm", "SRAM bitcell defines the unit area (must be 1)"));
                }
                if self.write_latency_set != self.write_latency_reset {
                    return Err(Error::invalid("write_latency_reset", "SRAM writes are symmetric"));
                }
                if self.write_energy_set != self.write_energy_reset {
                    return Err(Error::invalid("write_energy_reset", "SRAM writes are symmetric"));
                }
            }
            MemoryKind::SttMram | MemoryKind::SotMram => {
                if self.area_norm > 1.0 {
                    return Err(Error::invalid("area_norm", "MRAM cell area must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table = kv::parse(text)?;
        let kind: MemoryKind = kv::string(&table, "kind")?.parse()?;
        let fins = |field: &str| -> Result<u32> {
            let v = kv::number(&table, field)?;
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(Error::invalid(field, "expected a non-negative integer"));
            }
            Ok(v as u32)
        };
        let params = BitcellParams {
            kind,
            sense_latency: kv::positive(&table, "sense_latency")?,
            sense_energy: kv::positive(&table, "sense_energy")?,
            write_latency_set: kv::positive(&table, "write_latency_set")?,
            write_latency_reset: kv::positive(&table, "write_latency_reset")?,
            write_energy_set: kv::positive(&table, "write_energy_set")?,
            write_energy_reset: kv::positive(&table, "write_energy_reset")?,
            fin_count_read: fins("fin_count_read")?,
            fin_count_write: fins("fin_count_write")?,
            area_norm: kv::positive(&table, "area_norm")?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kind = \"{}\"", self.kind.name());
        let _ = writeln!(out, "sense_latency = {}  # ps", kv::float(self.sense_latency));
        let _ = writeln!(out, "sense_energy = {}  # pJ", kv::float(self.sense_energy));
        let _ = writeln!(out, "write_latency_set = {}  # ps", kv::float(self.write_latency_set));
        let _ = writeln!(out, "write_latency_reset = {}  # ps", kv::float(self.write_latency_reset));
        let _ = writeln!(out, "write_energy_set = {}  # pJ", kv::float(self.write_energy_set));
        let _ = writeln!(out, "write_energy_reset = {}  # pJ", kv::float(self.write_energy_reset));
        let _ = writeln!(out, "fin_count_read = {}", self.fin_count_read);
        let _ = writeln!(out, "fin_count_write = {}", self.fin_count_write);
        let _ = writeln!(out, "area_norm = {}", kv::float(self.area_norm));
        out
    }
}

pub fn load_bitcell(path: impl AsRef<Path>) -> Result<BitcellParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BitcellParams::from_toml_str(&text)
}

/// Built-in bitcells. The MRAM records are the 16nm device characterization
/// results; the SRAM record is synthetic: its values were back-solved by
/// calibrating the cache model against 3 MB SRAM cache anchors and are
/// calibration artifacts, not foundry data.
pub fn builtin_bitcell(kind: MemoryKind) -> BitcellParams {
    match kind {
        MemoryKind::Sram => BitcellParams {
            kind,
            sense_latency: SRAM_SENSE_LATENCY,
            sense_energy: SRAM_SENSE_ENERGY,
            write_latency_set: SRAM_WRITE_LATENCY,
            write_latency_reset: SRAM_WRITE_LATENCY,
            write_energy_set: SRAM_WRITE_ENERGY,
            write_energy_reset: SRAM_WRITE_ENERGY,
            fin_count_read: 1,
            fin_count_write: 1,
            area_norm: 1.0,
        },
        MemoryKind::SttMram => BitcellParams {
            kind,
            sense_latency: 650.0,
            sense_energy: 0.076,
            write_latency_set: 8400.0,
            write_latency_reset: 7780.0,
            write_energy_set: 1.1,
            write_energy_reset: 2.2,
            fin_count_read: 4,
            fin_count_write: 4,
            area_norm: 0.34,
        },
        MemoryKind::SotMram => BitcellParams {
            kind,
            sense_latency: 650.0,
            sense_energy: 0.020,
            write_latency_set: 313.0,
            write_latency_reset: 243.0,
            write_energy_set: 0.08,
            write_energy_reset: 0.08,
            fin_count_read: 1,
            fin_count_write: 3,
            area_norm: 0.29,
        },
    }
}

/// One bitcell per memory kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitcellSet {
    pub sram: BitcellParams,
    pub stt: BitcellParams,
    pub sot: BitcellParams,
}

impl Default for BitcellSet {
    fn default() -> Self {
        BitcellSet {
            sram: builtin_bitcell(MemoryKind::Sram),
            stt: builtin_bitcell(MemoryKind::SttMram),
            sot: builtin_bitcell(MemoryKind::SotMram),
        }
    }
}

impl BitcellSet {
    pub fn get(&self, kind: MemoryKind) -> &BitcellParams {
        match kind {
            MemoryKind::Sram => &self.sram,
            MemoryKind::SttMram => &self.stt,
            MemoryKind::SotMram => &self.sot,
        }
    }

    /// Replaces the entry for `cell.kind`.
    pub fn insert(&mut self, cell: BitcellParams) {
        match cell.kind {
            MemoryKind::Sram => self.sram = cell,
            MemoryKind::SttMram => self.stt = cell,
            MemoryKind::SotMram => self.sot = cell,
        }
    }
}

// Calibration artifacts (see `builtin_bitcell`).
const SRAM_SENSE_LATENCY: f64 = 16.036990323766087;
const SRAM_SENSE_ENERGY: f64 = 0.006318259399636437;
const SRAM_WRITE_LATENCY: f64 = 0.0872819880241628;
const SRAM_WRITE_ENERGY: f64 = 0.9533440464131004;

macro_rules! tech_config {
    ($( $(#[$doc:meta])* $name:ident : $default:expr ),* $(,)?) => {
        /// Technology constants and first-order model coefficients.
        ///
        /// Every field is a plain `f64` so the whole record maps one-to-one onto
        /// the key-value technology file and onto the calibrator's coordinate
        /// vector.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct TechConfig {
            $( $(#[$doc])* pub $name: f64, )*
        }

        impl Default for TechConfig {
            fn default() -> Self {
                TechConfig { $( $name: $default, )* }
            }
        }

        impl TechConfig {
            pub const FIELDS: &'static [&'static str] = &[ $( stringify!($name) ),* ];

            pub fn get(&self, field: &str) -> Option<f64> {
                match field {
                    $( stringify!($name) => Some(self.$name), )*
                    _ => None,
                }
            }

            pub fn set(&mut self, field: &str, value: f64) -> bool {
                match field {
                    $( stringify!($name) => { self.$name = value; true } )*
                    _ => false,
                }
            }
        }
    };
}

tech_config! {
    /// Process node (nm).
    node: 16.0,
    /// Core clock used for cycle conversion (MHz).
    clock_frequency: 1481.0,
    /// Supply voltage (V).
    vdd: 0.8,
    /// Foundry SRAM bitcell area in units of F^2.
    sram_cell_area_f2: 754.3957123037802,
    /// Global wire resistance (ohm/mm).
    wire_res_per_mm: 19891.35332619534,
    /// Global wire capacitance (fF/mm).
    wire_cap_per_mm: 23.393194912917714,
    /// Repeated-wire and buffering delay (ns/mm).
    route_delay_per_mm: 0.001467439282321736,
    /// Retention leakage of one SRAM bitcell (nW).
    leakage_per_bitcell: 245.0026753219374,
    /// Leakage of peripheral CMOS per unit of peripheral area (mW/mm^2).
    peripheral_leakage_density: 999.0199798524835,
    /// Fixed row-decoder delay (ns).
    decoder_delay_base: 0.0112141920541921,
    /// Row-decoder delay per address bit (ns).
    decoder_delay_per_stage: 0.009249707921159237,
    /// Distributed RC delay of a wordline (ns/mm^2).
    wordline_delay_coeff: 0.008400251574257491,
    /// Bitline development time per um of bitline per uW of cell read power
    /// (ns * uW / um).
    bitline_sense_coeff: 0.39163197890475204,
    /// Bitline charging time on writes (ns/um).
    bitline_write_coeff: 2.326608048694847e-06,
    /// Tag lookup delay on top of the row decoder (ns).
    tag_delay_base: 0.44873669349807277,
    /// Way-select delay as a fraction of the shorter of tag and data paths.
    way_select_fraction: 0.1469596492513587,
    /// Wordline switching energy per active mat (nJ/mm).
    wordline_energy_per_mm: 3.088713206234615e-06,
    /// Bitline swing energy per column (nJ/mm).
    bitline_energy_per_mm: 6.1794165284801534e-09,
    /// Switching energy of one access-transistor drain junction (one fin)
    /// on an active bitline (nJ).
    bitline_junction_energy: 1.8734569987315458e-11,
    /// Energy of one sense amplifier firing (nJ).
    senseamp_energy: 8.148599840240944e-05,
    /// Decoder energy per address bit per active mat (nJ).
    decoder_energy_per_stage: 1.508894007066944e-06,
    /// Tag array energy per access (nJ).
    tag_energy: 0.03125414572515085,
    /// Address/control broadcast energy over the mat H-tree (nJ/mm).
    htree_energy_coeff: 0.012188448857067314,
    /// Fraction of written line bits that draw the full cell write energy.
    write_activity: 0.09671487650500082,
    /// Row-decoder area per row (um^2).
    decoder_area_per_row: 0.054379728434207256,
    /// Sense amplifier area (um^2).
    senseamp_area: 28.898166405853523,
    /// Write-driver area independent of the cell (um^2).
    write_driver_area_base: 0.2816383221482414,
    /// Write-driver area per pJ of cell write energy (um^2/pJ).
    write_driver_area_per_pj: 64.13373206583005,
    /// Fixed per-mat control area (um^2).
    mat_overhead_area: 6.524774762914454,
    /// Fixed per-bank control area (um^2).
    bank_overhead_area: 101810.12450045145,
    /// Energy of one multiply-accumulate, the normalization unit (nJ).
    mac_energy: 0.058,
    /// Energy of one DRAM access (nJ); default is 200 MACs.
    dram_access_energy: 11.6,
    /// Latency of one DRAM access (ns).
    dram_access_latency: 100.0,
}

/// Coefficients that the calibrator may move. Everything else in
/// [`TechConfig`] is a fixed technology or system constant.
pub const FREE_COEFFICIENTS: &[&str] = &[
    "sram_cell_area_f2",
    "wire_res_per_mm",
    "wire_cap_per_mm",
    "route_delay_per_mm",
    "leakage_per_bitcell",
    "peripheral_leakage_density",
    "decoder_delay_base",
    "decoder_delay_per_stage",
    "wordline_delay_coeff",
    "bitline_sense_coeff",
    "bitline_write_coeff",
    "tag_delay_base",
    "way_select_fraction",
    "wordline_energy_per_mm",
    "bitline_energy_per_mm",
    "bitline_junction_energy",
    "senseamp_energy",
    "decoder_energy_per_stage",
    "tag_energy",
    "htree_energy_coeff",
    "write_activity",
    "decoder_area_per_row",
    "senseamp_area",
    "write_driver_area_base",
    "write_driver_area_per_pj",
    "mat_overhead_area",
    "bank_overhead_area",
];

/// Coefficients that are fractions and must stay within (0, 1].
const FRACTIONS: &[&str] = &["way_select_fraction", "write_activity"];

impl TechConfig {
    pub fn clock_period_ns(&self) -> f64 {
        1e3 / self.clock_frequency
    }

    /// Area of one foundry SRAM bitcell (um^2).
    pub fn sram_cell_area_um2(&self) -> f64 {
        let f = self.node * 1e-3;
        self.sram_cell_area_f2 * f * f
    }

    pub fn validate(&self) -> Result<()> {
        for &field in Self::FIELDS {
            let v = self.get(field).expect("field list is generated from the struct");
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(field, "coefficients must be finite and non-negative"));
            }
        }
        for field in ["node", "clock_frequency", "vdd", "sram_cell_area_f2"] {
            if self.get(field).unwrap() <= 0.0 {
                return Err(Error::NonPositiveValue(field.to_string()));
            }
        }
        for &field in FRACTIONS {
            if self.get(field).unwrap() > 1.0 {
                return Err(Error::invalid(field, "fraction must not exceed 1"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table = kv::parse(text)?;
        for key in table.keys() {
            if !Self::FIELDS.contains(&key.as_str()) {
                return Err(Error::invalid(key.as_str(), "unknown technology field"));
            }
        }
        let mut tech = TechConfig::default();
        for &field in Self::FIELDS {
            tech.set(field, kv::number(&table, field)?);
        }
        tech.validate()?;
        Ok(tech)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for &field in Self::FIELDS {
            let _ = writeln!(out, "{field} = {}", kv::float(self.get(field).unwrap()));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub(crate) fn is_fraction(field: &str) -> bool {
        FRACTIONS.contains(&field)
    }
}
