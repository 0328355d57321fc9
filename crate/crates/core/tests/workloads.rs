use std::path::PathBuf;

use nvmdse::workloads::{
    builtin_dnns, load_profiles, synth_profile, synthetic_suite, write_profiles, Stage, TraceSpecFile,
};
use nvmdse::Error;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn network_registry_matches_published_statistics() {
    // (name, top-5 error %, conv layers, fc layers, weights, MACs)
    let expected = [
        ("AlexNet", 16.4, 5, 3, 61_000_000, 724_000_000),
        ("GoogLeNet", 6.7, 57, 1, 7_000_000, 1_430_000_000),
        ("VGG-16", 7.3, 13, 3, 138_000_000, 15_500_000_000),
        ("ResNet-18", 10.71, 17, 1, 11_800_000, 2_000_000_000),
        ("SqueezeNet", 16.4, 26, 0, 1_200_000, 837_000_000),
    ];
    let got: Vec<_> = builtin_dnns()
        .into_iter()
        .map(|d| (d.name, d.top5_error, d.conv_layers, d.fc_layers, d.total_weights, d.total_macs))
        .collect();
    let want: Vec<_> = expected
        .iter()
        .map(|&(n, e, c, f, w, m)| (n.to_string(), e, c, f, w, m))
        .collect();
    assert_eq!(got, want);
}

#[test]
fn shipped_profiles_are_the_seeded_suite() {
    let file = std::fs::File::open(data("profiles.csv")).unwrap();
    assert_eq!(load_profiles(file).unwrap(), synthetic_suite(1));
}

#[test]
fn suite_is_deterministic_and_covers_both_stages() {
    let a = synthetic_suite(7);
    assert_eq!(a, synthetic_suite(7));
    assert_ne!(a, synthetic_suite(8));
    assert_eq!(a.len(), 10);
    assert_eq!(a.iter().filter(|p| p.stage == Stage::Training).count(), 5);
}

#[test]
fn profile_csv_round_trip() {
    let mut suite = synthetic_suite(3);
    suite[0].exec_time_ms = Some(12.5);
    let mut buf = Vec::new();
    write_profiles(&suite, &mut buf).unwrap();
    assert_eq!(load_profiles(buf.as_slice()).unwrap(), suite);
}

#[test]
fn schema_violations_name_the_row_and_column() {
    let header = "dnn,stage,l2_read_tx,l2_write_tx,dram_read_tx,dram_write_tx\n";
    let neg = format!("{header}AlexNet,inference,1,2,3,4\nAlexNet,inference,1,-2,3,4\n");
    assert!(matches!(
        load_profiles(neg.as_bytes()),
        Err(Error::NegativeCount { row: 2, ref column }) if column == "l2_write_tx"
    ));
    let missing = "dnn,stage,l2_read_tx,l2_write_tx,dram_read_tx\nAlexNet,inference,1,2,3\n";
    assert!(matches!(load_profiles(missing.as_bytes()), Err(Error::SchemaError { .. })));
    let extra = format!("{}x\n", header.trim_end().to_string() + ",");
    assert!(load_profiles(extra.as_bytes()).is_err());
}

#[test]
fn golden_trace_spec_matches_its_checksum() {
    let spec = TraceSpecFile::load(data("golden_trace.toml")).unwrap();
    assert!(spec.sha256.is_some());
    let trace = spec.generate().unwrap();
    assert_eq!(trace.len(), spec.generator.accesses);
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 512,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn synthetic_split_sums_to_total(f in 0.0f64..=1.0, total in 0u64..1 << 40, seed in any::<u64>()) {
        let p = synth_profile(f, total, seed).unwrap();
        prop_assert_eq!(p.l2_read_tx + p.l2_write_tx, total);
        prop_assert!(p.dram_read_tx <= p.l2_read_tx);
        prop_assert!(p.dram_write_tx <= p.l2_write_tx);
    }
}
