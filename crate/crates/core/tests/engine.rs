mod common;

use std::time::Instant;

use fairaudit::balance::{plan_rebalance, priors, sample_priors, Strategy};
use fairaudit::grouping::apply_grouping;
use fairaudit::ingest::validate;
use fairaudit::metrics::{group_row_metrics, macro_over_classes};
use fairaudit::report::{build_audit, Provenance};
use fairaudit::simulator::{reference_roster, simulate, Model, SimSpec};
use fairaudit::{fairness_summary, Attribute, Roster, SubjectProfile};
use num_rational::Ratio;

fn r4() -> Roster {
    Roster::new(vec![
        SubjectProfile::new("s1", 22, "Male", "A"),
        SubjectProfile::new("s2", 27, "Female", "A"),
        SubjectProfile::new("s3", 33, "Male", "B"),
        SubjectProfile::new("s4", 40, "Female", "B"),
    ])
    .unwrap()
}

#[test]
fn r4_group_rows() {
    let roster = r4();
    let mut log = common::perfect_log(&roster, &[10; 4]);
    let gender = apply_grouping(&roster, &Attribute::Gender).unwrap();
    let m = group_row_metrics(&log, &roster, &gender, "Male").unwrap();
    assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));

    for r in log.iter_mut().filter(|r| r.true_subject.as_str() == "s1") {
        r.predicted_subject = "s3".into();
    }
    let m = group_row_metrics(&log, &roster, &gender, "Male").unwrap();
    assert_eq!(m.recall, 0.5);
    // s1: no predictions (precision zero-filled), s3: 10 of 20 predictions correct.
    assert_eq!(m.precision, 0.25);
    assert_eq!(m.undefined_precision, 1);
    assert!(group_row_metrics(&log, &roster, &gender, "Other").is_err());
}

#[test]
fn reference_roster_perfect_limits() {
    let roster = reference_roster();
    let log = simulate(&SimSpec::new(roster.clone(), Model::Perfect, 7)).unwrap();
    assert_eq!(log.len(), 80 * 478);
    for (attr, expected) in [
        (Attribute::Age, 5.0),
        (Attribute::Gender, 2.5),
        (Attribute::Ethnicity, 3.75),
    ] {
        let g = apply_grouping(&roster, &attr).unwrap();
        let s = fairness_summary(&log, &roster, &g).unwrap();
        assert!((s.dpd - expected).abs() < 1e-9, "{attr}: {}", s.dpd);
    }
}

#[test]
fn reference_roster_priors() {
    let roster = reference_roster();
    let prior = |attr: Attribute, label: &str| {
        let g = apply_grouping(&roster, &attr).unwrap();
        priors(&roster, &g).unwrap().prior(label).unwrap()
    };
    assert_eq!(prior(Attribute::Gender, "Male"), Ratio::new(5625, 10000));
    assert_eq!(prior(Attribute::Gender, "Female"), Ratio::new(4375, 10000));
    assert_eq!(prior(Attribute::Ethnicity, "A"), Ratio::new(750, 1000));
    assert_eq!(prior(Attribute::Ethnicity, "B"), Ratio::new(375, 10000));
    assert_eq!(prior(Attribute::Ethnicity, "C"), Ratio::new(2125, 10000));
    assert_eq!(prior(Attribute::Age, "under25"), Ratio::new(3875, 10000));
    assert_eq!(prior(Attribute::Age, "25-30"), Ratio::new(3250, 10000));
    assert_eq!(prior(Attribute::Age, "31-35"), Ratio::new(1250, 10000));
    assert_eq!(prior(Attribute::Age, "over35"), Ratio::new(1625, 10000));
}

#[test]
fn reference_roster_rebalance() {
    let roster = reference_roster();
    let eth = apply_grouping(&roster, &Attribute::Ethnicity).unwrap();
    let plan = plan_rebalance(&priors(&roster, &eth).unwrap(), Strategy::AugmentMax).unwrap();
    let deltas: Vec<i64> = plan.rows.iter().map(|r| r.delta).collect();
    assert_eq!(deltas, [0, 57, 43]);
    let after = plan.apply();
    assert!(after.priors().iter().all(|(_, p)| *p == Ratio::new(1, 3)));

    // Sample-count balancing of a log with unequal per-subject counts.
    let mut spec = SimSpec::new(roster.clone(), Model::Perfect, 1).with_samples(10);
    spec.samples_per_subject.insert("s61".into(), 40);
    let log = simulate(&spec).unwrap();
    let d = sample_priors(&log, &roster, &eth).unwrap();
    assert_eq!(d.count("A"), Some(600));
    assert_eq!(d.count("B"), Some(60));
    assert_eq!(d.count("C"), Some(170));
}

#[test]
fn uniform_guessing_recall_near_one_in_n() {
    let roster = reference_roster();
    let log = simulate(&SimSpec::new(roster.clone(), Model::Uniform, 3).with_samples(2000)).unwrap();
    let m = macro_over_classes(&log, roster.ids()).unwrap();
    assert!((m.recall - 1.0 / 80.0).abs() < 0.002, "{}", m.recall);
}

#[test]
fn accuracy_recall_converges_to_p() {
    let roster = reference_roster();
    let mut recalls = Vec::new();
    for seed in 0..10 {
        // 10,000 samples per run, spread over the 80 subjects.
        let spec = SimSpec::new(roster.clone(), Model::Accuracy(0.5), seed).with_samples(125);
        let log = simulate(&spec).unwrap();
        recalls.push(macro_over_classes(&log, roster.ids()).unwrap().recall);
    }
    let mean = recalls.iter().sum::<f64>() / recalls.len() as f64;
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
}

#[test]
fn group_accuracy_disparity_surfaces_in_rows() {
    let roster = reference_roster();
    let probabilities = [("Male".to_owned(), 0.95), ("Female".to_owned(), 0.30)].into();
    let spec = SimSpec::new(
        roster.clone(),
        Model::GroupAccuracy {
            attribute: Attribute::Gender,
            probabilities,
        },
        5,
    );
    let log = simulate(&spec).unwrap();
    let report = build_audit(&roster, &log, &[Attribute::Gender], &Provenance::default()).unwrap();
    let rows = &report.attributes[0].groups;
    assert_eq!(rows[0].label, "Female");
    assert!((rows[0].metrics.recall - 30.0).abs() < 2.0, "{:?}", rows[0]);
    assert!((rows[1].metrics.recall - 95.0).abs() < 1.0, "{:?}", rows[1]);
}

#[test]
fn full_scale_validation_is_fast() {
    let roster = reference_roster();
    let log = simulate(&SimSpec::new(roster.clone(), Model::Uniform, 1)).unwrap();
    let start = Instant::now();
    let report = validate(&log, &roster);
    let elapsed = start.elapsed();
    assert!(report.is_valid());
    assert_eq!(report.subject_samples.values().sum::<u64>(), 38_240);
    assert_eq!(report.group_samples["gender"]["Male"], 45 * 478);
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
}

#[test]
fn empty_log_report_is_zeroed_and_flagged() {
    let roster = r4();
    let report = build_audit(
        &roster,
        &[],
        &[Attribute::Gender, Attribute::Age],
        &Provenance::default(),
    )
    .unwrap();
    assert_eq!(report.baseline.recall, 0.0);
    assert_eq!(report.baseline.zero_filled, 4);
    for format in ["table", "csv", "json"] {
        let bytes = fairaudit::report::render_report(&report, format.parse().unwrap());
        assert!(!bytes.is_empty());
    }
}
