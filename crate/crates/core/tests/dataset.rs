use std::collections::HashSet;

use leap_core::dataset::{write_tables, InstanceKey};
use leap_core::{build_cohort, generate_synthetic, load_tables, DatasetError, RawTables, SynthConfig};
use proptest::prelude::*;

fn synth(n: usize, seed: u64) -> RawTables {
    generate_synthetic(&SynthConfig { n_instances: n, seed, ..Default::default() }).unwrap()
}

#[test]
fn written_tables_load_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let tables = synth(150, 8);
    write_tables(&tables, dir.path()).unwrap();
    let back = load_tables(dir.path()).unwrap();
    assert_eq!(back, tables);
    assert_eq!(build_cohort(&back).unwrap().summary(), build_cohort(&tables).unwrap().summary());
}

#[test]
fn missing_file_is_reported_before_parsing() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(&synth(10, 0), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("vle.csv")).unwrap();
    match load_tables(dir.path()) {
        Err(DatasetError::MissingFile(p)) => assert!(p.ends_with("vle.csv")),
        other => panic!("expected missing file, got {other:?}"),
    }
}

#[test]
fn malformed_row_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(&synth(10, 0), dir.path()).unwrap();
    let path = dir.path().join("studentVle.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("AAA,2013J,1,1,seven,3\n");
    std::fs::write(&path, text).unwrap();
    match load_tables(dir.path()) {
        Err(DatasetError::MalformedRow { file, .. }) => assert_eq!(file, "studentVle.csv"),
        other => panic!("expected malformed row, got {other:?}"),
    }
}

#[test]
fn synthetic_output_is_a_function_of_the_config() {
    assert_eq!(synth(80, 3), synth(80, 3));
    assert_ne!(synth(80, 3), synth(80, 4));
    let bad = SynthConfig { positive_rate: 1.5, ..Default::default() };
    assert!(matches!(generate_synthetic(&bad), Err(DatasetError::InvalidSynthConfig(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cohort_counts_reconcile_with_raw_rows(n in 1usize..60, seed in any::<u64>(), drop in 0usize..5) {
        let mut tables = synth(n, seed);
        // Remove some instances so their events become orphans.
        let removed: HashSet<(u16, u32)> =
            tables.student_info.iter().take(drop).map(|s| (s.run, s.student)).collect();
        tables.student_info.retain(|s| !removed.contains(&(s.run, s.student)));
        if tables.student_info.is_empty() {
            return Ok(());
        }
        let cohort = build_cohort(&tables).unwrap();
        let s = cohort.summary();
        prop_assert_eq!(s.instances, tables.student_info.len());
        prop_assert_eq!(s.interaction_records + s.dropped_interactions, tables.student_vle.len());
        prop_assert_eq!(
            s.submission_records + s.dropped_submissions + s.undated_submissions,
            tables.student_assessment.len()
        );
        prop_assert_eq!(s.positives, cohort.labels().iter().filter(|&&y| y == 1).count());
        let keys: Vec<InstanceKey> = cohort.keys();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        for i in 0..cohort.len() {
            prop_assert!(cohort.interactions_of(i).iter().all(|r| r.instance == i));
            prop_assert!(cohort.submissions_of(i).iter().all(|r| r.instance == i));
        }
    }
}
