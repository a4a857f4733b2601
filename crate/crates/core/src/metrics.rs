//! One-vs-rest confusion counting and precision / recall / F1.
//!
//! Everything is counted in exact integers; rates are only formed at the end.
//! A rate whose denominator is zero evaluates to 0 and is flagged undefined.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{IdentityIndex, PredictionRecord, Roster, SubjectId};
use crate::error::{Error, Result};
use crate::grouping::GroupingScheme;

const CHUNK: usize = 4096;

/// A ratio of counts with the zero-denominator case made explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub defined: bool,
}

impl Rate {
    pub fn ratio(numerator: u64, denominator: u64) -> Self {
        if denominator == 0 {
            Self::undefined()
        } else {
            Self {
                value: numerator as f64 / denominator as f64,
                defined: true,
            }
        }
    }

    pub fn undefined() -> Self {
        Self {
            value: 0.0,
            defined: false,
        }
    }
}

/// One-vs-rest counts for a single identity class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, false_pos: u64, false_neg: u64, true_neg: u64) -> Self {
        Self {
            true_pos,
            false_pos,
            false_neg,
            true_neg,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

pub fn precision(c: &ConfusionCounts) -> Rate {
    Rate::ratio(c.true_pos, c.true_pos + c.false_pos)
}

pub fn recall(c: &ConfusionCounts) -> Rate {
    Rate::ratio(c.true_pos, c.true_pos + c.false_neg)
}

/// Count form `2TP / (2TP + FP + FN)`, which agrees with the harmonic mean of
/// precision and recall whenever the latter is defined and non-zero.
pub fn f1(c: &ConfusionCounts) -> Rate {
    Rate::ratio(2 * c.true_pos, 2 * c.true_pos + c.false_pos + c.false_neg)
}

/// Counts for `class` from a single pass over the log.
pub fn confusion_for_class(log: &[PredictionRecord], class: &SubjectId) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for r in log {
        match (&r.true_subject == class, &r.predicted_subject == class) {
            (true, true) => c.true_pos += 1,
            (false, true) => c.false_pos += 1,
            (true, false) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    c
}

/// Unweighted means over a set of classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub class_count: usize,
    /// Number of classes whose precision (resp. recall, F1) was zero-filled.
    pub undefined_precision: usize,
    pub undefined_recall: usize,
    pub undefined_f1: usize,
}

impl MacroMetrics {
    /// Averages per-class metrics in iteration order. Zero-filled values
    /// take part in the mean.
    pub fn from_counts<'a>(counts: impl IntoIterator<Item = &'a ConfusionCounts>) -> Result<Self> {
        let mut m = MacroMetrics {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            class_count: 0,
            undefined_precision: 0,
            undefined_recall: 0,
            undefined_f1: 0,
        };
        for c in counts {
            let (p, r, f) = (precision(c), recall(c), f1(c));
            m.precision += p.value;
            m.recall += r.value;
            m.f1 += f.value;
            m.undefined_precision += usize::from(!p.defined);
            m.undefined_recall += usize::from(!r.defined);
            m.undefined_f1 += usize::from(!f.defined);
            m.class_count += 1;
        }
        if m.class_count == 0 {
            return Err(Error::EmptyClassSet);
        }
        let n = m.class_count as f64;
        m.precision /= n;
        m.recall /= n;
        m.f1 /= n;
        Ok(m)
    }

    pub fn has_undefined(&self) -> bool {
        self.undefined_precision + self.undefined_recall + self.undefined_f1 > 0
    }
}

/// Full `true x predicted` count matrix over an [`IdentityIndex`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    cells: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ConfusionMatrix {
    /// Counts the log in parallel chunks. Chunk matrices are merged by integer
    /// addition, so the result does not depend on the thread count.
    pub fn from_log(log: &[PredictionRecord], index: &IdentityIndex) -> Result<Self> {
        let n = index.len();
        let position = |id: &SubjectId| {
            index
                .position(id)
                .ok_or_else(|| Error::UnknownSubject(id.to_string()))
        };
        let cells = log
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut cells = vec![0u64; n * n];
                for r in chunk {
                    let t = position(&r.true_subject)?;
                    let p = position(&r.predicted_subject)?;
                    cells[t * n + p] += 1;
                }
                Ok(cells)
            })
            .try_reduce(
                || vec![0u64; n * n],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )?;
        Ok(Self::from_cells(n, cells))
    }

    /// Builds a matrix from row-major cells (`cells[true * n + predicted]`).
    pub fn from_cells(n: usize, cells: Vec<u64>) -> Self {
        assert_eq!(cells.len(), n * n, "cell count must be n*n");
        let mut row_sums = vec![0u64; n];
        let mut col_sums = vec![0u64; n];
        for t in 0..n {
            for p in 0..n {
                let v = cells[t * n + p];
                row_sums[t] += v;
                col_sums[p] += v;
            }
        }
        let total = row_sums.iter().sum();
        Self {
            n,
            cells,
            row_sums,
            col_sums,
            total,
        }
    }

    pub fn class_count(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cell(&self, truth: usize, predicted: usize) -> u64 {
        self.cells[truth * self.n + predicted]
    }

    /// Records whose true identity is `class`.
    pub fn row_sum(&self, class: usize) -> u64 {
        self.row_sums[class]
    }

    /// Records predicted as `class`.
    pub fn col_sum(&self, class: usize) -> u64 {
        self.col_sums[class]
    }

    pub fn counts(&self, class: usize) -> ConfusionCounts {
        let tp = self.cell(class, class);
        let fp = self.col_sums[class] - tp;
        let fneg = self.row_sums[class] - tp;
        ConfusionCounts::new(tp, fp, fneg, self.total - tp - fp - fneg)
    }

    pub fn macro_metrics(&self, classes: impl IntoIterator<Item = usize>) -> Result<MacroMetrics> {
        let counts: Vec<ConfusionCounts> = classes.into_iter().map(|c| self.counts(c)).collect();
        MacroMetrics::from_counts(&counts)
    }
}

/// Macro metrics over `classes`; classes absent from the log count as fully
/// zero-filled.
pub fn macro_over_classes(log: &[PredictionRecord], classes: &[SubjectId]) -> Result<MacroMetrics> {
    if classes.is_empty() {
        return Err(Error::EmptyClassSet);
    }
    let index = IdentityIndex::covering(log, classes);
    let matrix = ConfusionMatrix::from_log(log, &index)?;
    let mut positions: Vec<usize> = classes.iter().filter_map(|c| index.position(c)).collect();
    positions.sort_unstable();
    positions.dedup();
    matrix.macro_metrics(positions)
}

/// Macro metrics over the identities that `grouping` assigns to `label`.
/// Counts come from the whole log, so false positives from other groups
/// still lower a group's precision.
pub fn group_row_metrics(
    log: &[PredictionRecord],
    roster: &Roster,
    grouping: &GroupingScheme,
    label: &str,
) -> Result<MacroMetrics> {
    grouping.check_roster(roster)?;
    let members = grouping.members(label)?;
    let matrix = ConfusionMatrix::from_log(log, roster.index())?;
    matrix.macro_metrics(members.iter().copied())
}
