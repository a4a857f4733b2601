//! Demographic parity and equalized odds differences for multiclass identification.
//!
//! Each identity is treated as its own binary task (one-vs-rest). A record
//! belongs to the demographic group of its *true* subject. For one class `c`
//! and group `g`:
//!
//! * selection rate: share of `g`'s records predicted as `c`,
//! * TPR: share of `g`'s records of subject `c` predicted as `c`,
//! * FPR: share of `g`'s records of other subjects predicted as `c`.
//!
//! Differences are taken between the highest- and lowest-rate groups, with
//! zero-denominator rates filled as 0. The per-class values are averaged over
//! all roster identities and reported on a percent scale.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{PredictionRecord, Roster, SubjectId};
use crate::error::{Error, Result};
use crate::grouping::GroupingScheme;
use crate::metrics::{ConfusionMatrix, Rate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub selection_rate: Rate,
    pub tpr: Rate,
    pub fpr: Rate,
}

/// Rates of every group for one identity class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub attribute: String,
    pub class: SubjectId,
    pub labels: Vec<String>,
    pub rates: Vec<GroupRate>,
}

impl GroupRates {
    pub fn get(&self, label: &str) -> Option<&GroupRate> {
        self.labels.iter().position(|l| l == label).map(|i| &self.rates[i])
    }

    fn spread(&self, pick: impl Fn(&GroupRate) -> Rate) -> Result<f64> {
        if self.rates.len() < 2 {
            return Err(Error::TooFewGroups {
                attribute: self.attribute.clone(),
                present: self.rates.len(),
            });
        }
        let (lo, hi) = self
            .rates
            .iter()
            .map(|r| pick(r).value)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        Ok(hi - lo)
    }
}

/// Highest minus lowest selection rate.
pub fn dpd_class(r: &GroupRates) -> Result<f64> {
    r.spread(|g| g.selection_rate)
}

/// Highest minus lowest true positive rate.
pub fn tpd_class(r: &GroupRates) -> Result<f64> {
    r.spread(|g| g.tpr)
}

/// Highest minus lowest false positive rate.
pub fn fpd_class(r: &GroupRates) -> Result<f64> {
    r.spread(|g| g.fpr)
}

pub fn eod_class(r: &GroupRates) -> Result<f64> {
    Ok(tpd_class(r)?.max(fpd_class(r)?))
}

/// Per-group aggregates of a confusion matrix, enough to produce the rates of
/// any class without rescanning the log.
#[derive(Debug, Clone)]
pub struct GroupTable<'a> {
    matrix: &'a ConfusionMatrix,
    grouping: &'a GroupingScheme,
    group_records: Vec<u64>,
    // predicted[g * n + c]: records of group g predicted as c
    predicted: Vec<u64>,
}

impl<'a> GroupTable<'a> {
    pub fn new(matrix: &'a ConfusionMatrix, grouping: &'a GroupingScheme) -> Result<Self> {
        let n = matrix.class_count();
        if grouping.subject_count() != n {
            return Err(Error::GroupingMismatch {
                expected: grouping.subject_count(),
                actual: n,
            });
        }
        let k = grouping.group_count();
        let mut group_records = vec![0u64; k];
        let mut predicted = vec![0u64; k * n];
        for t in 0..n {
            let g = grouping.group_of(t);
            group_records[g] += matrix.row_sum(t);
            for c in 0..n {
                predicted[g * n + c] += matrix.cell(t, c);
            }
        }
        Ok(Self {
            matrix,
            grouping,
            group_records,
            predicted,
        })
    }

    pub fn group_records(&self, group: usize) -> u64 {
        self.group_records[group]
    }

    pub fn rates(&self, class: usize) -> Vec<GroupRate> {
        let n = self.matrix.class_count();
        let own = self.grouping.group_of(class);
        (0..self.grouping.group_count())
            .map(|g| {
                let records = self.group_records[g];
                let predicted = self.predicted[g * n + class];
                let (positives, tp) = if g == own {
                    (self.matrix.row_sum(class), self.matrix.cell(class, class))
                } else {
                    (0, 0)
                };
                GroupRate {
                    selection_rate: Rate::ratio(predicted, records),
                    tpr: Rate::ratio(tp, positives),
                    fpr: Rate::ratio(predicted - tp, records - positives),
                }
            })
            .collect()
    }

    pub fn group_rates(&self, class: usize, class_id: &SubjectId) -> GroupRates {
        GroupRates {
            attribute: self.grouping.attribute().to_owned(),
            class: class_id.clone(),
            labels: self.grouping.labels().to_vec(),
            rates: self.rates(class),
        }
    }
}

/// Group rates for a single identity class.
pub fn group_rates(
    log: &[PredictionRecord],
    roster: &Roster,
    grouping: &GroupingScheme,
    class: &SubjectId,
) -> Result<GroupRates> {
    check_grouping(roster, grouping)?;
    let pos = roster
        .position(class)
        .ok_or_else(|| Error::UnknownSubject(class.to_string()))?;
    let matrix = ConfusionMatrix::from_log(log, roster.index())?;
    Ok(GroupTable::new(&matrix, grouping)?.group_rates(pos, class))
}

/// Per-class differences on the rate scale `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFairness {
    pub subject: SubjectId,
    pub dpd: f64,
    pub tpd: f64,
    pub fpd: f64,
    pub eod: f64,
}

/// Mean per-class differences for one attribute, percent scale `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSummary {
    pub attribute: String,
    pub dpd: f64,
    pub tpd: f64,
    pub fpd: f64,
    pub eod: f64,
    pub classes: Vec<ClassFairness>,
}

fn check_grouping(roster: &Roster, grouping: &GroupingScheme) -> Result<()> {
    if roster.is_empty() {
        return Err(Error::EmptyRoster);
    }
    grouping.check_roster(roster)?;
    if grouping.group_count() < 2 {
        return Err(Error::TooFewGroups {
            attribute: grouping.attribute().to_owned(),
            present: grouping.group_count(),
        });
    }
    Ok(())
}

/// Summary from an already counted matrix over `roster`'s index.
pub fn summarize(
    matrix: &ConfusionMatrix,
    roster: &Roster,
    grouping: &GroupingScheme,
) -> Result<FairnessSummary> {
    check_grouping(roster, grouping)?;
    let table = GroupTable::new(matrix, grouping)?;
    let classes: Vec<ClassFairness> = roster
        .ids()
        .par_iter()
        .enumerate()
        .map(|(c, id)| {
            let rates = table.group_rates(c, id);
            Ok(ClassFairness {
                subject: id.clone(),
                dpd: dpd_class(&rates)?,
                tpd: tpd_class(&rates)?,
                fpd: fpd_class(&rates)?,
                eod: eod_class(&rates)?,
            })
        })
        .collect::<Result<_>>()?;

    // Sequential sums in sorted identity order keep the result independent
    // of the thread count.
    let n = classes.len() as f64;
    let mean = |f: fn(&ClassFairness) -> f64| 100.0 * classes.iter().map(f).sum::<f64>() / n;
    Ok(FairnessSummary {
        attribute: grouping.attribute().to_owned(),
        dpd: mean(|c| c.dpd),
        tpd: mean(|c| c.tpd),
        fpd: mean(|c| c.fpd),
        eod: mean(|c| c.eod),
        classes,
    })
}

/// Aggregated DPD / TPD / FPD / EOD for one grouping of the roster.
pub fn fairness_summary(
    log: &[PredictionRecord],
    roster: &Roster,
    grouping: &GroupingScheme,
) -> Result<FairnessSummary> {
    check_grouping(roster, grouping)?;
    let matrix = ConfusionMatrix::from_log(log, roster.index())?;
    summarize(&matrix, roster, grouping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SubjectProfile;
    use crate::grouping::{apply_grouping, Attribute};

    fn r4() -> Roster {
        Roster::new(vec![
            SubjectProfile::new("s1", 22, "Male", "A"),
            SubjectProfile::new("s2", 27, "Female", "A"),
            SubjectProfile::new("s3", 33, "Male", "B"),
            SubjectProfile::new("s4", 40, "Female", "B"),
        ])
        .unwrap()
    }

    fn perfect_log(roster: &Roster, per_subject: usize) -> Vec<PredictionRecord> {
        roster
            .ids()
            .iter()
            .flat_map(|id| {
                (0..per_subject).map(move |i| PredictionRecord::new(format!("{id}-{i}"), id.clone(), id.clone()))
            })
            .collect()
    }

    fn rates(labels: &[&str], values: &[(Rate, Rate, Rate)]) -> GroupRates {
        GroupRates {
            attribute: "x".into(),
            class: "c".into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            rates: values
                .iter()
                .map(|&(selection_rate, tpr, fpr)| GroupRate {
                    selection_rate,
                    tpr,
                    fpr,
                })
                .collect(),
        }
    }

    #[test]
    fn r4_perfect_group_rates() {
        let roster = r4();
        let log = perfect_log(&roster, 10);
        let gender = apply_grouping(&roster, &Attribute::Gender).unwrap();
        let r = group_rates(&log, &roster, &gender, &"s1".into()).unwrap();
        let male = r.get("Male").unwrap();
        let female = r.get("Female").unwrap();
        assert_eq!(male.selection_rate, Rate::ratio(10, 20));
        assert_eq!(female.selection_rate.value, 0.0);
        assert!(female.selection_rate.defined);
        assert_eq!(male.tpr.value, 1.0);
        assert_eq!((female.tpr.value, female.tpr.defined), (0.0, false));
        assert_eq!(dpd_class(&r).unwrap(), 0.5);
        assert_eq!(tpd_class(&r).unwrap(), 1.0);
        assert_eq!(fpd_class(&r).unwrap(), 0.0);
        assert_eq!(eod_class(&r).unwrap(), 1.0);
    }

    #[test]
    fn spread_examples() {
        let x = Rate::ratio(4, 10);
        let y = Rate::ratio(2, 20);
        let z = Rate::ratio(0, 1);
        let r = rates(&["X", "Y"], &[(x, z, z), (y, z, z)]);
        assert!((dpd_class(&r).unwrap() - 0.3).abs() < 1e-15);

        let same = rates(&["X", "Y"], &[(x, x, y), (x, x, y)]);
        assert_eq!(dpd_class(&same).unwrap(), 0.0);
        assert_eq!(eod_class(&same).unwrap(), 0.0);

        let tp = Rate::ratio(6, 10);
        let fp = Rate::ratio(1, 10);
        let r = rates(&["X", "Y"], &[(z, tp, fp), (z, Rate::undefined(), z)]);
        assert_eq!(tpd_class(&r).unwrap(), 0.6);
        assert_eq!(fpd_class(&r).unwrap(), 0.1);
        assert_eq!(eod_class(&r).unwrap(), 0.6);

        let single = rates(&["X"], &[(x, x, x)]);
        assert!(matches!(dpd_class(&single), Err(Error::TooFewGroups { present: 1, .. })));
    }

    #[test]
    fn r4_perfect_summary() {
        let roster = r4();
        let log = perfect_log(&roster, 10);
        for attr in [Attribute::Gender, Attribute::Ethnicity, Attribute::Age] {
            let g = apply_grouping(&roster, &attr).unwrap();
            let s = fairness_summary(&log, &roster, &g).unwrap();
            assert!((s.eod - 100.0).abs() < 1e-12, "{attr}");
            assert_eq!(s.fpd, 0.0);
            let expected = 100.0 * g.group_count() as f64 / 4.0;
            assert!((s.dpd - expected).abs() < 1e-9, "{attr}: {}", s.dpd);
        }
    }

    #[test]
    fn partial_recall_gives_tpd_equal_recall() {
        let roster = r4();
        let mut log = perfect_log(&roster, 10);
        // s1: 6 of 10 correct, rest predicted as s2 (a Female subject).
        for r in log.iter_mut().filter(|r| r.true_subject.as_str() == "s1").take(4) {
            r.predicted_subject = "s2".into();
        }
        let gender = apply_grouping(&roster, &Attribute::Gender).unwrap();
        let r = group_rates(&log, &roster, &gender, &"s1".into()).unwrap();
        assert_eq!(tpd_class(&r).unwrap(), 0.6);
        let r2 = group_rates(&log, &roster, &gender, &"s2".into()).unwrap();
        // s2 picks up 4 false positives out of the Male group's 20 records.
        assert_eq!(r2.get("Male").unwrap().fpr, Rate::ratio(4, 20));
        assert_eq!(r2.get("Female").unwrap().fpr, Rate::ratio(0, 10));
    }

    #[test]
    fn single_group_and_empty_roster_rejected() {
        let roster = Roster::new(vec![
            SubjectProfile::new("a", 30, "Male", "A"),
            SubjectProfile::new("b", 31, "Male", "A"),
        ])
        .unwrap();
        let g = apply_grouping(&roster, &Attribute::Gender).unwrap();
        assert!(matches!(
            fairness_summary(&[], &roster, &g),
            Err(Error::TooFewGroups { present: 1, .. })
        ));
        let empty = Roster::new(vec![]).unwrap();
        let g = GroupingScheme::from_labels("x", vec![]);
        assert_eq!(fairness_summary(&[], &empty, &g), Err(Error::EmptyRoster));
    }

    #[test]
    fn empty_log_is_all_zero() {
        let roster = r4();
        let g = apply_grouping(&roster, &Attribute::Gender).unwrap();
        let s = fairness_summary(&[], &roster, &g).unwrap();
        assert_eq!((s.dpd, s.tpd, s.fpd, s.eod), (0.0, 0.0, 0.0, 0.0));
    }
}
