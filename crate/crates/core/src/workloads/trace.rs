use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 5] = b"NVMT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceRecord {
    pub address: u64,
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryTrace {
    pub records: Vec<TraceRecord>,
    pub line_size_hint: u32,
}

impl MemoryTrace {
    pub fn new(records: Vec<TraceRecord>) -> Self {
        MemoryTrace {
            records,
            line_size_hint: 128,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Text form: one `<hex address> <R|W>` record per line. Blank lines are
/// skipped; line numbers in errors are 1-based file lines.
pub fn parse_text_trace(text: &str) -> Result<MemoryTrace> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::MalformedRecord {
            line,
            reason: reason.to_string(),
        };
        let mut parts = s.split_whitespace();
        let (Some(addr), Some(op), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected `<hex address> <R|W>`"));
        };
        let digits = addr.strip_prefix("0x").or_else(|| addr.strip_prefix("0X")).unwrap_or(addr);
        let address = u64::from_str_radix(digits, 16).map_err(|_| bad("address is not a 64-bit hex number"))?;
        let op = match op {
            "R" | "r" => Op::Read,
            "W" | "w" => Op::Write,
            _ => return Err(bad("operation must be R or W")),
        };
        records.push(TraceRecord { address, op });
    }
    Ok(MemoryTrace::new(records))
}

/// Binary form: the magic `NVMT1`, then 9-byte records (little-endian
/// address, then `R` or `W`). Record numbers in errors are 1-based.
pub fn read_binary_trace(bytes: &[u8]) -> Result<MemoryTrace> {
    let body = bytes.strip_prefix(BINARY_MAGIC.as_slice()).ok_or_else(|| Error::MalformedRecord {
        line: 0,
        reason: "missing NVMT1 header".into(),
    })?;
    let chunks = body.chunks_exact(9);
    if !chunks.remainder().is_empty() {
        return Err(Error::MalformedRecord {
            line: body.len() / 9 + 1,
            reason: "truncated record".into(),
        });
    }
    let mut records = Vec::with_capacity(body.len() / 9);
    for (i, c) in chunks.enumerate() {
        let address = u64::from_le_bytes(c[..8].try_into().unwrap());
        let op = match c[8] {
            b'R' => Op::Read,
            b'W' => Op::Write,
            _ => {
                return Err(Error::MalformedRecord {
                    line: i + 1,
                    reason: "operation byte must be R or W".into(),
                })
            }
        };
        records.push(TraceRecord { address, op });
    }
    Ok(MemoryTrace::new(records))
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<MemoryTrace> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary_trace(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::MalformedRecord {
            line: 0,
            reason: format!("not UTF-8 text: {e}"),
        })?;
        parse_text_trace(&text)
    }
}

pub fn write_text_trace<W: Write>(trace: &MemoryTrace, mut out: W) -> std::io::Result<()> {
    for r in &trace.records {
        let op = if r.op == Op::Read { 'R' } else { 'W' };
        writeln!(out, "{:x} {op}", r.address)?;
    }
    out.flush()
}

pub fn write_binary_trace<W: Write>(trace: &MemoryTrace, mut out: W) -> std::io::Result<()> {
    out.write_all(BINARY_MAGIC)?;
    let mut buf = Vec::with_capacity(trace.len() * 9);
    for r in &trace.records {
        buf.extend_from_slice(&r.address.to_le_bytes());
        buf.push(if r.op == Op::Read { b'R' } else { b'W' });
    }
    out.write_all(&buf)?;
    out.flush()
}

/// Parameters of the reuse-controlled trace generator.
///
/// Each access either touches a never-seen line (probability
/// `cold_fraction`) or re-touches the line at LRU stack distance `d`, with
/// `d` log-uniform over `[1, max_distance]` lines. A distance deeper than the
/// current stack also yields a new line. Under fully associative LRU with
/// `C` lines, an access hits exactly when its distance is at most `C`, so the
/// distance law fixes the miss-rate curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackDistanceSpec {
    pub accesses: usize,
    pub cold_fraction: f64,
    pub max_distance: u64,
    pub write_fraction: f64,
    pub line_size: u32,
    pub seed: u64,
}

impl StackDistanceSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cold_fraction", self.cold_fraction), ("write_fraction", self.write_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, "must lie in [0, 1]"));
            }
        }
        if self.max_distance == 0 {
            return Err(Error::invalid("max_distance", "must be at least 1"));
        }
        if self.line_size == 0 || !self.line_size.is_power_of_two() {
            return Err(Error::invalid("line_size", "must be a power of two"));
        }
        Ok(())
    }
}

/// Binary indexed tree over access timestamps; a set bit marks the last
/// access of some line.
struct Fenwick {
    tree: Vec<i32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { tree: vec![0; n + 1] }
    }

    fn add(&mut self, pos: usize, delta: i32) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Position of the `k`-th set bit (1-based `k`).
    fn find(&self, mut k: i32) -> usize {
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] < k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Spreads consecutive line ids over a 2^36-line address space; odd
/// multipliers are bijective modulo a power of two.
fn line_address(id: u64, line_size: u32) -> u64 {
    const MASK: u64 = (1 << 36) - 1;
    (id.wrapping_mul(0x9E37_79B9) & MASK) * line_size as u64
}

pub fn generate_trace(spec: &StackDistanceSpec) -> Result<MemoryTrace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.accesses;
    let mut marks = Fenwick::new(n);
    let mut line_at: Vec<u64> = vec![0; n];
    let mut last_access: Vec<usize> = Vec::new();
    let mut distinct: i32 = 0;
    let log_max = ((spec.max_distance + 1) as f64).ln();
    let mut records = Vec::with_capacity(n);

    for t in 0..n {
        let cold = rng.gen::<f64>() < spec.cold_fraction;
        let d = ((rng.gen::<f64>() * log_max).exp().floor() as u64).clamp(1, spec.max_distance);
        let line = if cold || d > distinct as u64 {
            let id = last_access.len() as u64;
            last_access.push(usize::MAX);
            distinct += 1;
            id
        } else {
            let pos = marks.find(distinct - d as i32 + 1);
            line_at[pos]
        };
        let prev = last_access[line as usize];
        if prev != usize::MAX {
            marks.add(prev, -1);
        }
        marks.add(t, 1);
        last_access[line as usize] = t;
        line_at[t] = line;
        let op = if rng.gen::<f64>() < spec.write_fraction { Op::Write } else { Op::Read };
        records.push(TraceRecord {
            address: line_address(line, spec.line_size),
            op,
        });
    }
    Ok(MemoryTrace {
        records,
        line_size_hint: spec.line_size,
    })
}

/// Hex SHA-256 of the binary encoding; identifies a trace independently of
/// how it was stored.
pub fn trace_checksum(trace: &MemoryTrace) -> String {
    use sha2::{Digest, Sha256};
    let mut buf = Vec::with_capacity(BINARY_MAGIC.len() + trace.len() * 9);
    write_binary_trace(trace, &mut buf).expect("writing to memory cannot fail");
    Sha256::digest(&buf).iter().map(|b| format!("{b:02x}")).collect()
}

/// A frozen generated trace: generator parameters plus the expected checksum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpecFile {
    pub sha256: Option<String>,
    pub generator: StackDistanceSpec,
}

impl TraceSpecFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Generates the trace and checks it against `sha256` when present.
    pub fn generate(&self) -> Result<MemoryTrace> {
        let trace = generate_trace(&self.generator)?;
        if let Some(expected) = &self.sha256 {
            let got = trace_checksum(&trace);
            if !got.eq_ignore_ascii_case(expected) {
                return Err(Error::invalid(
                    "sha256",
                    format!("generated trace checksum {got} does not match {expected}"),
                ));
            }
        }
        Ok(trace)
    }
}
