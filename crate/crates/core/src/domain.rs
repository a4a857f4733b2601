use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque identity token. Ordering is plain byte-wise string ordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(String);

impl SubjectId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SubjectId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for SubjectId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// One enrolled identity and its demographic attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: SubjectId,
    pub age: u32,
    pub gender: String,
    pub ethnicity: String,
}

impl SubjectProfile {
    pub fn new(
        subject_id: impl Into<SubjectId>,
        age: u32,
        gender: impl Into<String>,
        ethnicity: impl Into<String>,
    ) -> Self {
        Self {
            subject_id: subject_id.into(),
            age,
            gender: gender.into(),
            ethnicity: ethnicity.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Thermal,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Visual => "visual",
            Modality::Thermal => "thermal",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "visual" => Some(Modality::Visual),
            "thermal" => Some(Modality::Thermal),
            _ => None,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One test sample: who it was, who the classifier said it was.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub true_subject: SubjectId,
    pub predicted_subject: SubjectId,
    pub modality: Modality,
    pub masked: bool,
}

impl PredictionRecord {
    pub fn new(
        sample_id: impl Into<String>,
        true_subject: impl Into<SubjectId>,
        predicted_subject: impl Into<SubjectId>,
    ) -> Self {
        Self {
            sample_id: sample_id.into(),
            true_subject: true_subject.into(),
            predicted_subject: predicted_subject.into(),
            modality: Modality::Visual,
            masked: false,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.true_subject == self.predicted_subject
    }
}

/// Dense, sorted numbering of a set of identities.
#[derive(Debug, Clone, Default)]
pub struct IdentityIndex {
    ids: Vec<SubjectId>,
    positions: HashMap<SubjectId, usize>,
}

impl IdentityIndex {
    /// Builds an index over the distinct ids yielded, in sorted order.
    pub fn from_ids<'a>(ids: impl IntoIterator<Item = &'a SubjectId>) -> Self {
        let mut ids: Vec<SubjectId> = ids.into_iter().cloned().collect();
        ids.sort();
        ids.dedup();
        let positions = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Self { ids, positions }
    }

    /// Index over every identity referenced by a log plus any extra ids.
    pub fn covering<'a>(
        log: &'a [PredictionRecord],
        extra: impl IntoIterator<Item = &'a SubjectId>,
    ) -> Self {
        Self::from_ids(
            log.iter()
                .flat_map(|r| [&r.true_subject, &r.predicted_subject])
                .chain(extra),
        )
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: &SubjectId) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn id(&self, position: usize) -> &SubjectId {
        &self.ids[position]
    }

    pub fn ids(&self) -> &[SubjectId] {
        &self.ids
    }
}

/// Validated set of subject profiles, sorted by `subject_id`.
#[derive(Debug, Clone)]
pub struct Roster {
    profiles: Vec<SubjectProfile>,
    index: IdentityIndex,
}

impl Roster {
    pub fn new(mut profiles: Vec<SubjectProfile>) -> Result<Self> {
        profiles.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        if let Some(w) = profiles.windows(2).find(|w| w[0].subject_id == w[1].subject_id) {
            return Err(Error::DuplicateSubject(w[0].subject_id.to_string()));
        }
        let index = IdentityIndex::from_ids(profiles.iter().map(|p| &p.subject_id));
        Ok(Self { profiles, index })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[SubjectProfile] {
        &self.profiles
    }

    pub fn index(&self) -> &IdentityIndex {
        &self.index
    }

    pub fn ids(&self) -> &[SubjectId] {
        self.index.ids()
    }

    pub fn position(&self, id: &SubjectId) -> Option<usize> {
        self.index.position(id)
    }

    pub fn get(&self, id: &SubjectId) -> Option<&SubjectProfile> {
        self.position(id).map(|i| &self.profiles[i])
    }

    pub fn contains(&self, id: &SubjectId) -> bool {
        self.index.position(id).is_some()
    }
}

impl PartialEq for Roster {
    fn eq(&self, other: &Self) -> bool {
        self.profiles == other.profiles
    }
}
