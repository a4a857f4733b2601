//! Demographic attributes and the partitions they induce on a roster.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::domain::{Roster, SubjectProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgeBin {
    Under25,
    From25To30,
    From31To35,
    Over35,
}

impl AgeBin {
    pub const ALL: [AgeBin; 4] = [
        AgeBin::Under25,
        AgeBin::From25To30,
        AgeBin::From31To35,
        AgeBin::Over35,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AgeBin::Under25 => "under25",
            AgeBin::From25To30 => "25-30",
            AgeBin::From31To35 => "31-35",
            AgeBin::Over35 => "over35",
        }
    }
}

impl fmt::Display for AgeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `<25`, `25..=30`, `31..=35`, `>35`.
pub fn bin_age(age: i64) -> Result<AgeBin> {
    match age {
        i64::MIN..=0 => Err(Error::NonPositiveAge(age)),
        1..=24 => Ok(AgeBin::Under25),
        25..=30 => Ok(AgeBin::From25To30),
        31..=35 => Ok(AgeBin::From31To35),
        _ => Ok(AgeBin::Over35),
    }
}

/// A demographic attribute. `Joint` builds intersectional groups whose labels
/// join the component labels with `|`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    Age,
    Gender,
    Ethnicity,
    Joint(Vec<Attribute>),
}

impl Attribute {
    pub fn label_of(&self, profile: &SubjectProfile) -> Result<String> {
        let label = match self {
            Attribute::Age => bin_age(i64::from(profile.age))?.label().to_owned(),
            Attribute::Gender => profile.gender.clone(),
            Attribute::Ethnicity => profile.ethnicity.clone(),
            Attribute::Joint(parts) => {
                let labels = parts
                    .iter()
                    .map(|a| a.label_of(profile))
                    .collect::<Result<Vec<_>>>()?;
                labels.join("|")
            }
        };
        if label.is_empty() {
            return Err(Error::EmptyLabel {
                subject: profile.subject_id.to_string(),
                attribute: self.to_string(),
            });
        }
        Ok(label)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attribute::Age => f.write_str("age"),
            Attribute::Gender => f.write_str("gender"),
            Attribute::Ethnicity => f.write_str("ethnicity"),
            Attribute::Joint(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let single = |part: &str| match part.trim() {
            "age" => Ok(Attribute::Age),
            "gender" => Ok(Attribute::Gender),
            "ethnicity" => Ok(Attribute::Ethnicity),
            _ => Err(Error::UnknownAttribute(s.to_owned())),
        };
        if s.contains('+') {
            let parts = s.split('+').map(single).collect::<Result<Vec<_>>>()?;
            Ok(Attribute::Joint(parts))
        } else {
            single(s)
        }
    }
}

/// Total partition of a roster into labelled groups.
///
/// Group indices follow the sorted label order; subject positions follow the
/// roster's sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupingScheme {
    attribute: String,
    labels: Vec<String>,
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl GroupingScheme {
    /// Labels each roster profile with `label_of`.
    pub fn from_fn(
        attribute: impl Into<String>,
        roster: &Roster,
        mut label_of: impl FnMut(&SubjectProfile) -> Result<String>,
    ) -> Result<Self> {
        let attribute = attribute.into();
        let labels = roster
            .profiles()
            .iter()
            .map(|p| {
                let label = label_of(p)?;
                if label.is_empty() {
                    return Err(Error::EmptyLabel {
                        subject: p.subject_id.to_string(),
                        attribute: attribute.clone(),
                    });
                }
                Ok(label)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(attribute, labels))
    }

    /// Builds a grouping from one label per roster position.
    pub fn from_labels(attribute: impl Into<String>, subject_labels: Vec<String>) -> Self {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (pos, label) in subject_labels.iter().enumerate() {
            groups.entry(label.clone()).or_default().push(pos);
        }
        let mut assignment = vec![0; subject_labels.len()];
        let mut labels = Vec::with_capacity(groups.len());
        let mut members = Vec::with_capacity(groups.len());
        for (g, (label, positions)) in groups.into_iter().enumerate() {
            for &p in &positions {
                assignment[p] = g;
            }
            labels.push(label);
            members.push(positions);
        }
        Self {
            attribute: attribute.into(),
            labels,
            assignment,
            members,
        }
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    /// Sorted group labels.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn group_count(&self) -> usize {
        self.labels.len()
    }

    pub fn subject_count(&self) -> usize {
        self.assignment.len()
    }

    /// Group index of the subject at roster position `pos`.
    pub fn group_of(&self, pos: usize) -> usize {
        self.assignment[pos]
    }

    pub fn label_of(&self, pos: usize) -> &str {
        &self.labels[self.assignment[pos]]
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    /// Roster positions in the group called `label`.
    pub fn members(&self, label: &str) -> Result<&[usize]> {
        self.group_index(label)
            .map(|g| self.members[g].as_slice())
            .ok_or_else(|| Error::UnknownGroup {
                attribute: self.attribute.clone(),
                label: label.to_owned(),
            })
    }

    pub fn members_of_group(&self, group: usize) -> &[usize] {
        &self.members[group]
    }

    pub fn check_roster(&self, roster: &Roster) -> Result<()> {
        if roster.len() != self.assignment.len() {
            return Err(Error::GroupingMismatch {
                expected: self.assignment.len(),
                actual: roster.len(),
            });
        }
        Ok(())
    }
}

/// Partitions `roster` by `attribute`.
pub fn apply_grouping(roster: &Roster, attribute: &Attribute) -> Result<GroupingScheme> {
    GroupingScheme::from_fn(attribute.to_string(), roster, |p| attribute.label_of(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn r4() -> Roster {
        Roster::new(vec![
            SubjectProfile::new("s1", 22, "Male", "A"),
            SubjectProfile::new("s2", 27, "Female", "A"),
            SubjectProfile::new("s3", 33, "Male", "B"),
            SubjectProfile::new("s4", 40, "Female", "B"),
        ])
        .unwrap()
    }

    #[test]
    fn age_bins_follow_label_boundaries() {
        assert_eq!(bin_age(24).unwrap(), AgeBin::Under25);
        assert_eq!(bin_age(25).unwrap(), AgeBin::From25To30);
        assert_eq!(bin_age(30).unwrap(), AgeBin::From25To30);
        assert_eq!(bin_age(31).unwrap(), AgeBin::From31To35);
        assert_eq!(bin_age(35).unwrap(), AgeBin::From31To35);
        assert_eq!(bin_age(36).unwrap(), AgeBin::Over35);
        assert_eq!(bin_age(1).unwrap(), AgeBin::Under25);
        assert_eq!(bin_age(0), Err(Error::NonPositiveAge(0)));
        assert_eq!(bin_age(-3), Err(Error::NonPositiveAge(-3)));
    }

    proptest! {
        #[test]
        fn age_bins_partition_valid_range(age in 1i64..=120) {
            let bin = bin_age(age).unwrap();
            let hits = AgeBin::ALL.iter().filter(|b| match b {
                AgeBin::Under25 => age < 25,
                AgeBin::From25To30 => (25..=30).contains(&age),
                AgeBin::From31To35 => (31..=35).contains(&age),
                AgeBin::Over35 => age > 35,
            }).count();
            prop_assert_eq!(hits, 1);
            prop_assert!(bin_age(age + 1).unwrap() >= bin);
        }
    }

    #[test]
    fn r4_gender_partition() {
        let roster = r4();
        let g = apply_grouping(&roster, &Attribute::Gender).unwrap();
        assert_eq!(g.labels(), &["Female".to_owned(), "Male".to_owned()]);
        assert_eq!(g.members("Male").unwrap(), &[0, 2]);
        assert_eq!(g.members("Female").unwrap(), &[1, 3]);
        assert!(matches!(g.members("Other"), Err(Error::UnknownGroup { .. })));
    }

    #[test]
    fn joint_attribute_labels() {
        let roster = r4();
        let attr: Attribute = "gender+ethnicity".parse().unwrap();
        assert_eq!(attr.to_string(), "gender+ethnicity");
        let g = apply_grouping(&roster, &attr).unwrap();
        assert_eq!(g.group_count(), 4);
        assert_eq!(g.label_of(0), "Male|A");
    }

    #[test]
    fn empty_label_is_rejected() {
        let roster = Roster::new(vec![
            SubjectProfile::new("a", 30, "", "A"),
            SubjectProfile::new("b", 30, "Male", "A"),
        ])
        .unwrap();
        let err = apply_grouping(&roster, &Attribute::Gender).unwrap_err();
        assert_eq!(
            err,
            Error::EmptyLabel {
                subject: "a".into(),
                attribute: "gender".into()
            }
        );
    }

    #[test]
    fn attribute_parsing() {
        assert_eq!("age".parse::<Attribute>().unwrap(), Attribute::Age);
        assert!("height".parse::<Attribute>().is_err());
        assert!("age+height".parse::<Attribute>().is_err());
    }
}
