use std::collections::HashMap;

use nvmdse::cachemodel::MB;
use nvmdse::isoarea::{dram_reduction, iso_area_capacity, simulate_cache, with_simulated_dram, CacheConfig, CacheStats};
use nvmdse::techlib::{builtin_bitcell, MemoryKind, TechConfig};
use nvmdse::tuner::tune;
use nvmdse::workloads::{synthetic_suite, MemoryTrace, Op, TraceRecord};
use nvmdse::Error;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

/// Timestamp LRU: every resident line remembers its last use; a full set
/// evicts the oldest.
fn reference(trace: &MemoryTrace, cfg: &CacheConfig) -> CacheStats {
    let mut sets: Vec<HashMap<u64, (usize, bool)>> = vec![HashMap::new(); cfg.sets as usize];
    let mut s = CacheStats::default();
    for (now, r) in trace.records.iter().enumerate() {
        let line = r.address / cfg.line_size as u64;
        let set = &mut sets[(line % cfg.sets) as usize];
        let write = r.op == Op::Write;
        s.accesses += 1;
        if let Some(e) = set.get_mut(&line) {
            s.hits += 1;
            e.0 = now;
            e.1 |= write;
            continue;
        }
        s.misses += 1;
        if set.len() == cfg.associativity as usize {
            let (&victim, &(_, dirty)) = set.iter().min_by_key(|(_, (t, _))| *t).unwrap();
            if dirty {
                s.dirty_evictions += 1;
            }
            set.remove(&victim);
        }
        set.insert(line, (now, write));
    }
    s.dram_tx = s.misses + s.dirty_evictions;
    s
}

fn arb_trace(max_len: usize) -> impl Strategy<Value = MemoryTrace> {
    (1u64..200).prop_flat_map(move |pool| {
        prop::collection::vec((0..pool, any::<bool>(), 0u64..64), 1..max_len).prop_map(|v| {
            MemoryTrace::new(
                v.into_iter()
                    .map(|(line, w, off)| TraceRecord {
                        address: line * 64 + off,
                        op: if w { Op::Write } else { Op::Read },
                    })
                    .collect(),
            )
        })
    })
}

fn arb_config() -> impl Strategy<Value = CacheConfig> {
    prop::sample::select(vec![1u32, 2, 4, 8, 16, 32, 64]).prop_flat_map(|ways| {
        (1u64..=(64 / ways as u64)).prop_map(move |sets| CacheConfig::new(sets * ways as u64 * 64, 64, ways).unwrap())
    })
}

#[test]
fn thrash_pattern_never_hits() {
    let cfg = CacheConfig::new(4 * 64 * 16, 64, 4).unwrap();
    let stride = cfg.sets * 64;
    let recs = (0..50)
        .flat_map(|_| (0..5).map(move |i| TraceRecord { address: i * stride, op: Op::Read }))
        .collect();
    let s = simulate_cache(&MemoryTrace::new(recs), &cfg).unwrap();
    assert_eq!((s.hits, s.misses), (0, 250));
}

#[test]
fn reduction_requires_matching_geometry() {
    let t = MemoryTrace::new(vec![TraceRecord { address: 0, op: Op::Read }]);
    let a = CacheConfig::new(4096, 64, 4).unwrap();
    let b = CacheConfig::new(8192, 64, 8).unwrap();
    assert!(dram_reduction(&t, &a, &b).is_err());
    assert_eq!(dram_reduction(&t, &a, &CacheConfig::new(8192, 64, 4).unwrap()).unwrap(), 0.0);
}

#[test]
fn budget_of_a_tuned_design_admits_its_capacity() {
    let tech = TechConfig::default();
    let cell = builtin_bitcell(MemoryKind::Sram);
    let t = tune(&cell, 3 * MB, &tech).unwrap();
    let (cap, fit) = iso_area_capacity(&cell, t.ppa.area, &tech, MB, 0.0).unwrap();
    assert_eq!(cap, 3 * MB);
    assert_eq!(fit, t);
}

#[test]
fn tiny_budget_has_no_capacity() {
    let tech = TechConfig::default();
    let err = iso_area_capacity(&builtin_bitcell(MemoryKind::SotMram), 1e-3, &tech, MB, 0.025);
    assert!(matches!(err, Err(Error::NoFeasibleCapacity { kind: MemoryKind::SotMram, .. })));
    assert!(iso_area_capacity(&builtin_bitcell(MemoryKind::SotMram), -1.0, &tech, MB, 0.025).is_err());
}

#[test]
fn simulated_rates_scale_to_the_profile() {
    let p = synthetic_suite(1).remove(0);
    let stats = CacheStats {
        accesses: 1000,
        hits: 800,
        misses: 200,
        dirty_evictions: 50,
        dram_tx: 250,
    };
    let q = with_simulated_dram(&p, &stats);
    assert_eq!(q.l2_tx(), p.l2_tx());
    assert_eq!(q.dram_read_tx, (p.l2_tx() as f64 * 0.2).round() as u64);
    assert_eq!(q.dram_write_tx, (p.l2_tx() as f64 * 0.05).round() as u64);
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 256,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn simulator_matches_reference(trace in arb_trace(2000), cfg in arb_config()) {
        let s = simulate_cache(&trace, &cfg).unwrap();
        prop_assert_eq!(s, reference(&trace, &cfg));
        prop_assert_eq!(s.accesses, s.hits + s.misses);
        prop_assert_eq!(s.dram_tx, s.misses + s.dirty_evictions);
    }

    #[test]
    fn fully_associative_misses_never_grow_with_capacity(trace in arb_trace(2000)) {
        let mut prev = u64::MAX;
        for lines in [1u32, 2, 4, 8, 16, 32] {
            let s = simulate_cache(&trace, &CacheConfig::fully_associative(lines, 64).unwrap()).unwrap();
            prop_assert!(s.misses <= prev);
            prev = s.misses;
        }
    }
}
