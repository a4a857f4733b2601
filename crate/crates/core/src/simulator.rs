//! Synthetic prediction logs from simple classifier models.
//!
//! Output is a pure function of the [`SimSpec`]: records are emitted subject by
//! subject in sorted `subject_id` order, and each subject's predictions come
//! from its own random substream (see [`crate::rng`]).

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::domain::{Modality, PredictionRecord, Roster, SubjectId, SubjectProfile};
use crate::error::{Error, Result};
use crate::grouping::{apply_grouping, Attribute, GroupingScheme};
use crate::rng::SubjectStream;

/// Samples per subject when a spec does not say otherwise.
pub const DEFAULT_SAMPLES_PER_SUBJECT: u64 = 478;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// Every prediction is correct.
    Perfect,
    /// Prediction drawn uniformly over the whole roster, true subject included.
    Uniform,
    /// Correct with probability `p`, otherwise uniform over the other subjects.
    Accuracy(f64),
    /// As `Accuracy`, with `p` looked up by the true subject's group.
    GroupAccuracy {
        attribute: Attribute,
        probabilities: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone)]
pub struct SimSpec {
    pub roster: Roster,
    /// Per-subject overrides; subjects not listed get `default_samples`.
    pub samples_per_subject: BTreeMap<SubjectId, u64>,
    pub default_samples: u64,
    pub model: Model,
    pub seed: u64,
    pub modality: Modality,
    pub masked: bool,
}

impl SimSpec {
    pub fn new(roster: Roster, model: Model, seed: u64) -> Self {
        Self {
            roster,
            samples_per_subject: BTreeMap::new(),
            default_samples: DEFAULT_SAMPLES_PER_SUBJECT,
            model,
            seed,
            modality: Modality::Visual,
            masked: false,
        }
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.default_samples = samples;
        self
    }

    pub fn samples_for(&self, id: &SubjectId) -> u64 {
        self.samples_per_subject
            .get(id)
            .copied()
            .unwrap_or(self.default_samples)
    }

    pub fn total_samples(&self) -> u64 {
        self.roster.ids().iter().map(|id| self.samples_for(id)).sum()
    }

    /// Per-subject probability of a correct prediction, or `None` for the
    /// uniform model.
    fn accuracies(&self) -> Result<Option<Vec<f64>>> {
        if self.roster.is_empty() {
            return Err(Error::InvalidSpec("roster is empty".into()));
        }
        if let Some(id) = self
            .samples_per_subject
            .keys()
            .find(|id| !self.roster.contains(id))
        {
            return Err(Error::InvalidSpec(format!(
                "sample count given for unknown subject '{id}'"
            )));
        }
        let n = self.roster.len();
        match &self.model {
            Model::Perfect => Ok(Some(vec![1.0; n])),
            Model::Uniform => Ok(None),
            Model::Accuracy(p) => Ok(Some(vec![check_probability(*p, "p")?; n])),
            Model::GroupAccuracy {
                attribute,
                probabilities,
            } => {
                let grouping = apply_grouping(&self.roster, attribute)?;
                let by_group = group_probabilities(&grouping, probabilities)?;
                Ok(Some((0..n).map(|i| by_group[grouping.group_of(i)]).collect()))
            }
        }
    }
}

fn check_probability(p: f64, name: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::InvalidSpec(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

fn group_probabilities(
    grouping: &GroupingScheme,
    probabilities: &BTreeMap<String, f64>,
) -> Result<Vec<f64>> {
    if let Some(label) = probabilities
        .keys()
        .find(|l| grouping.group_index(l).is_none())
    {
        return Err(Error::InvalidSpec(format!(
            "group '{label}' does not exist for attribute '{}'",
            grouping.attribute()
        )));
    }
    grouping
        .labels()
        .iter()
        .map(|label| match probabilities.get(label) {
            Some(&p) => check_probability(p, &format!("p[{label}]")),
            None => Err(Error::InvalidSpec(format!(
                "no accuracy given for group '{label}' of attribute '{}'",
                grouping.attribute()
            ))),
        })
        .collect()
}

fn sample_id(subject: &SubjectId, index: u64) -> String {
    format!("{subject}_{index:05}")
}

/// Generates the prediction log described by `spec`.
pub fn simulate(spec: &SimSpec) -> Result<Vec<PredictionRecord>> {
    let accuracies = spec.accuracies()?;
    let ids = spec.roster.ids();
    let n = ids.len() as u64;

    let per_subject: Vec<Vec<PredictionRecord>> = ids
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let mut stream = SubjectStream::new(spec.seed, i as u64);
            let count = spec.samples_for(id);
            (0..count)
                .map(|k| {
                    let predicted = match &accuracies {
                        None => stream.below(n) as usize,
                        Some(acc) => {
                            let p = acc[i];
                            if p >= 1.0 || n == 1 || stream.bernoulli(p) {
                                i
                            } else {
                                // Uniform over the other n - 1 identities.
                                let j = stream.below(n - 1) as usize;
                                if j >= i {
                                    j + 1
                                } else {
                                    j
                                }
                            }
                        }
                    };
                    PredictionRecord {
                        sample_id: sample_id(id, k),
                        true_subject: id.clone(),
                        predicted_subject: ids[predicted].clone(),
                        modality: spec.modality,
                        masked: spec.masked,
                    }
                })
                .collect()
        })
        .collect();
    Ok(per_subject.into_iter().flatten().collect())
}

pub const REFERENCE_ROSTER_SIZE: usize = 80;

/// Fixed 80-subject roster with gender 45 Male / 35 Female, ethnicity
/// 60 A / 3 B / 17 C and age bins 31 / 26 / 10 / 13
/// (`under25`, `25-30`, `31-35`, `over35`).
///
/// Ethnicity is assigned in index blocks; gender and age use fixed
/// permutations of the index so the attributes cross rather than nest.
pub fn reference_roster() -> Roster {
    const AGE_BINS: [(usize, u32, u32); 4] = [(31, 20, 24), (26, 25, 30), (10, 31, 35), (13, 36, 65)];

    let profiles = (0..REFERENCE_ROSTER_SIZE)
        .map(|i| {
            let ethnicity = match i {
                0..=59 => "A",
                60..=62 => "B",
                _ => "C",
            };
            // 35 is coprime to 16: i*35 mod 80 hits each multiple of 5 exactly
            // five times, nine of which are below 45.
            let gender = if (i * 35) % 80 < 45 { "Male" } else { "Female" };

            // 37 is coprime to 80, so this is a permutation of 0..80.
            let slot = (i * 37) % REFERENCE_ROSTER_SIZE;
            let mut start = 0;
            let mut age = 0;
            for (size, lo, hi) in AGE_BINS {
                if slot < start + size {
                    age = lo + ((slot - start) as u32) % (hi - lo + 1);
                    break;
                }
                start += size;
            }
            SubjectProfile::new(format!("s{:02}", i + 1), age, gender, ethnicity)
        })
        .collect();
    Roster::new(profiles).expect("reference roster ids are unique")
}
