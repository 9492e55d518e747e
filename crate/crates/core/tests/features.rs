use leap_core::dataset::tables::{read_table_into, TableKind};
use leap_core::{build_cohort, build_cutoff_dataset, Cohort, CutoffDataset, LeakagePolicy, RawTables, FEATURE_NAMES};

fn fixture() -> Cohort {
    let files = [
        (
            TableKind::StudentInfo,
            "code_module,code_presentation,id_student,final_result\n\
             AAA,2013J,1,Pass\nAAA,2013J,2,Withdrawn\nBBB,2014J,1,Fail\n",
        ),
        (
            TableKind::Vle,
            "id_site,code_module,code_presentation,activity_type\n\
             10,AAA,2013J,resource\n11,AAA,2013J,quiz\n12,AAA,2013J,resource\n20,BBB,2014J,forum\n",
        ),
        (
            TableKind::Assessments,
            "id_assessment,code_module,code_presentation,date\n100,AAA,2013J,10\n101,AAA,2013J,\n200,BBB,2014J,20\n",
        ),
        (
            TableKind::StudentVle,
            "code_module,code_presentation,id_student,id_site,date,sum_click\n\
             AAA,2013J,1,10,-2,3\nAAA,2013J,1,11,0,5\nAAA,2013J,1,10,0,2\nAAA,2013J,1,12,6,10\n\
             AAA,2013J,1,10,8,100\nBBB,2014J,1,20,3,4\n",
        ),
        (
            TableKind::StudentAssessment,
            "id_assessment,id_student,date_submitted,is_banked,score\n\
             100,1,9,0,80\n101,1,5,0,60\n100,2,,1,\n",
        ),
    ];
    let mut tables = RawTables::default();
    for (kind, text) in files {
        read_table_into(&mut tables, kind, text.as_bytes()).unwrap();
    }
    build_cohort(&tables).unwrap()
}

fn row(ds: &CutoffDataset, module: &str, student: u32) -> Vec<f64> {
    let i = ds.keys.iter().position(|k| k.module == module && k.student == student).unwrap();
    ds.features.row(i).to_vec()
}

fn assert_close(got: &[f64], want: &[f64]) {
    for (j, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() < 1e-12, "{}: got {g}, want {w}", FEATURE_NAMES[j]);
    }
}

#[test]
fn strict_features_at_day_seven() {
    let cohort = fixture();
    let ds = build_cutoff_dataset(&cohort, 7, LeakagePolicy::Strict).unwrap();
    // Daily totals 3, 7, 10 over three active days.
    let std = ((13.0 + 4.0 / 9.0 + 1.0 / 9.0 + 11.0 + 1.0 / 9.0) / 3.0f64).sqrt();
    assert_close(
        &row(&ds, "AAA", 1),
        &[20.0, 3.0, 3.0, 2.0, 20.0 / 3.0, std, 10.0, 1.0, 0.0, 60.0],
    );
    assert_close(&row(&ds, "AAA", 2), &[0.0; 10]);
    assert_close(&row(&ds, "BBB", 1), &[4.0, 1.0, 1.0, 1.0, 4.0, 0.0, 4.0, 0.0, 0.0, 0.0]);
    assert!(ds.audit.passed());
}

#[test]
fn cutoff_boundary_is_inclusive() {
    let cohort = fixture();
    let at8 = build_cutoff_dataset(&cohort, 8, LeakagePolicy::Strict).unwrap();
    assert_eq!(row(&at8, "AAA", 1)[0], 120.0);
    let at9 = build_cutoff_dataset(&cohort, 9, LeakagePolicy::Strict).unwrap();
    let r = row(&at9, "AAA", 1);
    assert_eq!(&r[7..], &[2.0, -1.0, 70.0]);
}

#[test]
fn negative_cutoff_sees_only_pre_course_activity() {
    let ds = build_cutoff_dataset(&fixture(), -2, LeakagePolicy::Strict).unwrap();
    assert_close(&row(&ds, "AAA", 1), &[3.0, 1.0, 1.0, 1.0, 3.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
}

#[test]
fn leaky_policies_widen_only_their_sources() {
    let cohort = fixture();
    let strict = row(&build_cutoff_dataset(&cohort, 7, LeakagePolicy::Strict).unwrap(), "AAA", 1);
    let assess_ds = build_cutoff_dataset(&cohort, 7, LeakagePolicy::LeakyAssessment).unwrap();
    let assess = row(&assess_ds, "AAA", 1);
    assert_eq!(&assess[..7], &strict[..7]);
    assert_eq!(&assess[7..], &[2.0, -1.0, 70.0]);
    let all = row(&build_cutoff_dataset(&cohort, 7, LeakagePolicy::LeakyAll).unwrap(), "AAA", 1);
    assert_eq!(all[0], 120.0);
    assert_eq!(&all[7..], &[2.0, -1.0, 70.0]);
    assert!(assess_ds.audit.passed());
    assert!(!assess_ds.audit.violations.is_empty());
}

#[test]
fn labels_follow_final_result() {
    let ds = build_cutoff_dataset(&fixture(), 7, LeakagePolicy::Strict).unwrap();
    let by_key: Vec<(String, u32, u8)> = ds
        .keys
        .iter()
        .zip(&ds.labels)
        .map(|(k, &y)| (k.module.clone(), k.student, y))
        .collect();
    assert_eq!(
        by_key,
        vec![("AAA".into(), 1, 1), ("AAA".into(), 2, 0), ("BBB".into(), 1, 0)]
    );
}

#[test]
fn csv_export_has_header_and_one_row_per_instance() {
    let ds = build_cutoff_dataset(&fixture(), 7, LeakagePolicy::Strict).unwrap();
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("code_module,code_presentation,id_student,total_clicks_t,"));
    assert!(lines[0].ends_with(",avg_score_t,label"));
    assert_eq!(lines[3], "BBB,2014J,1,4,1,1,1,4,0,4,0,0,0,0");
}
