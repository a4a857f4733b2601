//! Test-only brute-force oracle and random case generators.
//!
//! The oracle rescans the whole log for every (class, group, cell) it needs and
//! shares no counting code with the library.

#![allow(dead_code)]

use fairaudit::metrics::ConfusionCounts;
use fairaudit::rng::SubjectStream;
use fairaudit::{GroupingScheme, PredictionRecord, Roster, SubjectId, SubjectProfile};

pub fn brute_confusion(log: &[PredictionRecord], class: &SubjectId) -> ConfusionCounts {
    let tp = log
        .iter()
        .filter(|r| &r.true_subject == class && &r.predicted_subject == class)
        .count() as u64;
    let fp = log
        .iter()
        .filter(|r| &r.true_subject != class && &r.predicted_subject == class)
        .count() as u64;
    let fneg = log
        .iter()
        .filter(|r| &r.true_subject == class && &r.predicted_subject != class)
        .count() as u64;
    let tn = log
        .iter()
        .filter(|r| &r.true_subject != class && &r.predicted_subject != class)
        .count() as u64;
    ConfusionCounts::new(tp, fp, fneg, tn)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Rates of one class in one group: (selection, tpr, fpr).
pub fn brute_group_rates(
    log: &[PredictionRecord],
    roster: &Roster,
    grouping: &GroupingScheme,
    class: &SubjectId,
    label: &str,
) -> (f64, f64, f64) {
    let in_group = |r: &&PredictionRecord| {
        let pos = roster.position(&r.true_subject).unwrap();
        grouping.label_of(pos) == label
    };
    let records = log.iter().filter(in_group).count();
    let selected = log
        .iter()
        .filter(in_group)
        .filter(|r| &r.predicted_subject == class)
        .count();
    let positives = log
        .iter()
        .filter(in_group)
        .filter(|r| &r.true_subject == class)
        .count();
    let true_pos = log
        .iter()
        .filter(in_group)
        .filter(|r| &r.true_subject == class && &r.predicted_subject == class)
        .count();
    let negatives = log
        .iter()
        .filter(in_group)
        .filter(|r| &r.true_subject != class)
        .count();
    let false_pos = log
        .iter()
        .filter(in_group)
        .filter(|r| &r.true_subject != class && &r.predicted_subject == class)
        .count();
    (
        ratio(selected, records),
        ratio(true_pos, positives),
        ratio(false_pos, negatives),
    )
}

/// Per-class (dpd, tpd, fpd, eod) on the rate scale.
pub fn brute_class_fairness(
    log: &[PredictionRecord],
    roster: &Roster,
    grouping: &GroupingScheme,
    class: &SubjectId,
) -> (f64, f64, f64, f64) {
    let rates: Vec<(f64, f64, f64)> = grouping
        .labels()
        .iter()
        .map(|l| brute_group_rates(log, roster, grouping, class, l))
        .collect();
    let dpd = spread(&rates.iter().map(|r| r.0).collect::<Vec<_>>());
    let tpd = spread(&rates.iter().map(|r| r.1).collect::<Vec<_>>());
    let fpd = spread(&rates.iter().map(|r| r.2).collect::<Vec<_>>());
    (dpd, tpd, fpd, tpd.max(fpd))
}

/// Aggregated (dpd, tpd, fpd, eod), percent scale, summed in sorted id order.
pub fn brute_summary(
    log: &[PredictionRecord],
    roster: &Roster,
    grouping: &GroupingScheme,
) -> (f64, f64, f64, f64) {
    let per_class: Vec<_> = roster
        .ids()
        .iter()
        .map(|c| brute_class_fairness(log, roster, grouping, c))
        .collect();
    let n = per_class.len() as f64;
    let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| 100.0 * per_class.iter().map(f).sum::<f64>() / n;
    (mean(|c| c.0), mean(|c| c.1), mean(|c| c.2), mean(|c| c.3))
}

/// Random roster + grouping + log with at most `max_ids` identities,
/// `max_groups` groups and `max_records` records. Always has >= 2 groups.
pub struct Case {
    pub roster: Roster,
    pub grouping: GroupingScheme,
    pub log: Vec<PredictionRecord>,
}

pub fn random_case(rng: &mut SubjectStream, max_ids: u64, max_groups: u64, max_records: u64) -> Case {
    let n = 2 + rng.below(max_ids - 1) as usize;
    let k = (2 + rng.below(max_groups - 1) as usize).min(n);
    let mut labels: Vec<String> = (0..n).map(|i| format!("g{}", i % k)).collect();
    // Shuffle labels so group membership is not tied to id order.
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        labels.swap(i, j);
    }
    let profiles = (0..n)
        .map(|i| SubjectProfile::new(format!("id{i}"), 30, "x", "y"))
        .collect();
    let roster = Roster::new(profiles).unwrap();
    let grouping = GroupingScheme::from_labels("g", labels);
    let len = rng.below(max_records + 1);
    let log = (0..len)
        .map(|i| {
            let t = rng.below(n as u64) as usize;
            let p = if rng.bernoulli(0.5) { t } else { rng.below(n as u64) as usize };
            PredictionRecord::new(format!("r{i}"), roster.ids()[t].clone(), roster.ids()[p].clone())
        })
        .collect();
    Case { roster, grouping, log }
}

/// Perfect log with the given per-subject counts.
pub fn perfect_log(roster: &Roster, counts: &[u64]) -> Vec<PredictionRecord> {
    roster
        .ids()
        .iter()
        .zip(counts)
        .flat_map(|(id, &n)| {
            (0..n).map(move |i| PredictionRecord::new(format!("{id}#{i}"), id.clone(), id.clone()))
        })
        .collect()
}
