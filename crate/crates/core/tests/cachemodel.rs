use nvmdse::cachemodel::{
    calibrate, enumerate_organizations, evaluate_design, load_anchors, optimize, parse_anchors, AccessType, Anchor,
    AnchorMetric, DesignSpace, OptTarget, OrgBounds, MB,
};
use nvmdse::techlib::{builtin_bitcell, BitcellSet, MemoryKind, TechConfig};
use nvmdse::Error;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn fixed(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn kinds() -> impl Strategy<Value = MemoryKind> {
    prop::sample::select(MemoryKind::ALL.to_vec())
}

#[test]
fn one_megabyte_has_organizations_of_exactly_2_pow_23_bits() {
    let orgs = enumerate_organizations(MB, &OrgBounds::default()).unwrap();
    assert!(!orgs.is_empty());
    assert!(orgs.iter().all(|o| o.capacity_bits() == 1 << 23));
}

#[test]
fn area_and_leakage_grow_with_capacity() {
    let tech = TechConfig::default();
    for kind in MemoryKind::ALL {
        let cell = builtin_bitcell(kind);
        let mut prev = (0.0, 0.0);
        for mb in [1, 2, 4, 8, 16, 32] {
            let space = DesignSpace::build(&cell, mb * MB, &tech, &OrgBounds::default()).unwrap();
            let area = space.optimize(OptTarget::Area, AccessType::Normal).area;
            let leak = space.optimize(OptTarget::Leakage, AccessType::Normal).leakage_power;
            assert!(area >= prev.0 && leak >= prev.1, "{kind} {mb} MB");
            prev = (area, leak);
        }
    }
}

#[test]
fn mram_cells_leak_nothing_in_the_array() {
    // an SRAM cache leaks more than an MRAM cache of the same organization
    let tech = TechConfig::default();
    let org = enumerate_organizations(2 * MB, &OrgBounds::default()).unwrap()[0];
    let sram = evaluate_design(&builtin_bitcell(MemoryKind::Sram), &org, AccessType::Normal, &tech).unwrap();
    for kind in [MemoryKind::SttMram, MemoryKind::SotMram] {
        let m = evaluate_design(&builtin_bitcell(kind), &org, AccessType::Normal, &tech).unwrap();
        assert!(m.leakage_power < sram.leakage_power);
    }
}

#[test]
fn anchor_document_parses() {
    let text = "[[anchor]]\nkind = \"SOT\"\ncapacity_mb = 3\nread_latency = 3.71\narea = 1.95\n";
    let a = parse_anchors(text).unwrap();
    assert_eq!(a[0].kind, MemoryKind::SotMram);
    assert_eq!(a[0].capacity, 3 * MB);
    assert_eq!(a[0].values, vec![(AnchorMetric::ReadLatency, 3.71), (AnchorMetric::Area, 1.95)]);
    assert!(parse_anchors("[[anchor]]\nkind = \"SRAM\"\ncapacity_mb = 3\nlatency = 1\n").is_err());
}

#[test]
fn anchors_taken_from_the_model_calibrate_exactly() {
    let tech = TechConfig::default();
    let cells = BitcellSet::default();
    let anchors: Vec<Anchor> = MemoryKind::ALL
        .iter()
        .map(|&k| Anchor::from_tuned(&nvmdse::tuner::tune(cells.get(k), 3 * MB, &tech).unwrap()))
        .collect();
    let cal = calibrate(&anchors, &tech, &cells).unwrap();
    assert_eq!(cal.max_error, 0.0);
    assert_eq!(cal.tech, tech);
}

#[test]
fn shipped_technology_is_a_calibration_fixed_point() {
    let anchors = load_anchors(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/anchors.toml")).unwrap();
    let (tech, cells) = (TechConfig::default(), BitcellSet::default());
    let cal = calibrate(&anchors, &tech, &cells).unwrap();
    assert_eq!(cal.tech, tech);
    assert_eq!(cal.cells, cells);
    assert!(cal.max_error <= 0.10, "{}", cal.max_error);
}

#[test]
fn contradictory_anchors_diverge() {
    let tech = TechConfig::default();
    let cells = BitcellSet::default();
    let anchor = Anchor::from_tuned(&nvmdse::tuner::tune(&cells.sram, 3 * MB, &tech).unwrap());
    let mut scaled = anchor.clone();
    for (m, v) in scaled.values.iter_mut() {
        if *m == AnchorMetric::Area {
            *v *= 10.0;
        }
    }
    // no single area is within 15% of both x and 10x
    match calibrate(&[anchor, scaled], &tech, &cells) {
        Err(Error::CalibrationDiverged { max_error, residuals, .. }) => {
            assert!(max_error >= 9.0 / 11.0 - 1e-9);
            assert_eq!(residuals.len(), 12);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(fixed(48))]

    #[test]
    fn organizations_conserve_capacity(mb in 1u64..=32, half in any::<bool>()) {
        let capacity = if half { mb * MB / 2 } else { mb * MB };
        let orgs = enumerate_organizations(capacity, &OrgBounds::default()).unwrap();
        for o in &orgs {
            prop_assert_eq!(
                o.banks as u64 * o.mats_per_bank as u64 * o.rows as u64 * o.cols as u64,
                capacity * 8
            );
            prop_assert!(o.cols / o.senseamp_mux * o.mats_per_bank >= o.line_bits());
        }
    }

    #[test]
    fn optimize_returns_a_minimum(
        kind in kinds(),
        mb in 1u64..=16,
        t in 0usize..8,
        a in 0usize..3,
    ) {
        let tech = TechConfig::default();
        let cell = builtin_bitcell(kind);
        let target = OptTarget::ALL[t];
        let acc = AccessType::ALL[a];
        let space = DesignSpace::build(&cell, mb * MB, &tech, &OrgBounds::default()).unwrap();
        let best = optimize(&cell, mb * MB, target, acc, &tech).unwrap();
        prop_assert_eq!(&best, space.optimize(target, acc));
        for d in space.designs(acc) {
            prop_assert!(target.metric(&best) <= target.metric(d));
        }
    }
}
