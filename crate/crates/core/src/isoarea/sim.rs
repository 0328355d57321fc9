use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workloads::{MemoryTrace, Op};

/// Set-associative write-back, write-allocate LRU cache geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub capacity: u64,
    pub line_size: u32,
    pub associativity: u32,
    pub sets: u64,
}

impl CacheConfig {
    /// Sets follow from capacity; they need not be a power of two (a 3 MB,
    /// 16-way, 128 B cache has 1536 sets).
    pub fn new(capacity: u64, line_size: u32, associativity: u32) -> Result<Self> {
        if line_size == 0 || !line_size.is_power_of_two() {
            return Err(Error::invalid("line_size", "must be a power of two"));
        }
        if associativity == 0 {
            return Err(Error::invalid("associativity", "must be at least 1"));
        }
        let way_bytes = line_size as u64 * associativity as u64;
        if capacity == 0 || !capacity.is_multiple_of(way_bytes) {
            return Err(Error::invalid(
                "capacity",
                format!("must be a positive multiple of line_size x associativity ({way_bytes} bytes)"),
            ));
        }
        Ok(CacheConfig {
            capacity,
            line_size,
            associativity,
            sets: capacity / way_bytes,
        })
    }

    pub fn fully_associative(lines: u32, line_size: u32) -> Result<Self> {
        Self::new(lines as u64 * line_size as u64, line_size, lines)
    }

    pub fn lines(&self) -> u64 {
        self.sets * self.associativity as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CacheStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub dirty_evictions: u64,
    /// Line fills plus write-backs.
    pub dram_tx: u64,
}

/// Exact LRU simulation. Each set keeps its ways in recency order, most
/// recent first.
pub fn simulate_cache(trace: &MemoryTrace, cfg: &CacheConfig) -> Result<CacheStats> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let ways = cfg.associativity as usize;
    let sets = usize::try_from(cfg.sets).map_err(|_| Error::invalid("sets", "too many sets"))?;
    let mut lines: Vec<(u64, bool)> = vec![(0, false); sets * ways];
    let mut fill: Vec<u32> = vec![0; sets];
    let mut stats = CacheStats::default();

    for r in &trace.records {
        let line = r.address / cfg.line_size as u64;
        let set = (line % cfg.sets) as usize;
        let write = r.op == Op::Write;
        let n = fill[set] as usize;
        let slot = &mut lines[set * ways..set * ways + ways];
        stats.accesses += 1;
        match slot[..n].iter().position(|&(l, _)| l == line) {
            Some(p) => {
                stats.hits += 1;
                slot[p].1 |= write;
                slot[..=p].rotate_right(1);
            }
            None => {
                stats.misses += 1;
                let used = if n < ways {
                    fill[set] += 1;
                    n + 1
                } else {
                    if slot[ways - 1].1 {
                        stats.dirty_evictions += 1;
                    }
                    ways
                };
                slot[..used].rotate_right(1);
                slot[0] = (line, write);
            }
        }
    }
    stats.dram_tx = stats.misses + stats.dirty_evictions;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::TraceRecord;

    fn trace(addrs: &[(u64, Op)]) -> MemoryTrace {
        MemoryTrace::new(addrs.iter().map(|&(address, op)| TraceRecord { address, op }).collect())
    }

    #[test]
    fn repeated_address() {
        let t = trace(&[(0x40, Op::Read); 10]);
        let s = simulate_cache(&t, &CacheConfig::new(4096, 64, 4).unwrap()).unwrap();
        assert_eq!((s.hits, s.misses, s.dram_tx), (9, 1, 1));
    }

    #[test]
    fn lru_thrash() {
        let cfg = CacheConfig::new(4 * 64 * 8, 64, 4).unwrap();
        let stride = cfg.sets * 64;
        let mut recs = Vec::new();
        for _ in 0..6 {
            for i in 0..5 {
                recs.push((i * stride, Op::Read));
            }
        }
        let s = simulate_cache(&trace(&recs), &cfg).unwrap();
        assert_eq!(s.hits, 0);
    }

    #[test]
    fn dirty_eviction_counts_a_writeback() {
        let cfg = CacheConfig::fully_associative(1, 64).unwrap();
        let s = simulate_cache(&trace(&[(0, Op::Write), (64, Op::Read), (0, Op::Read)]), &cfg).unwrap();
        assert_eq!((s.misses, s.dirty_evictions, s.dram_tx), (3, 1, 4));
    }

    #[test]
    fn non_power_of_two_sets() {
        let cfg = CacheConfig::new(3 << 20, 128, 16).unwrap();
        assert_eq!(cfg.sets, 1536);
        assert!(CacheConfig::new(1000, 128, 16).is_err());
    }

    #[test]
    fn empty_trace_is_rejected() {
        let cfg = CacheConfig::new(4096, 64, 4).unwrap();
        assert!(matches!(simulate_cache(&trace(&[]), &cfg), Err(Error::EmptyTrace)));
    }
}
