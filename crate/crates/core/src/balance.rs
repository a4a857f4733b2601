//! Demographic priors and count-equalizing rebalancing plans.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::Serialize;

use crate::domain::{PredictionRecord, Roster};
use crate::error::{Error, Result};
use crate::grouping::GroupingScheme;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupCount {
    pub label: String,
    pub count: u64,
}

/// Counts per group label, sorted by label. Priors are exact ratios.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassDistribution {
    pub groups: Vec<GroupCount>,
}

impl ClassDistribution {
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>) -> Result<Self> {
        let mut groups: Vec<GroupCount> = counts
            .into_iter()
            .map(|(label, count)| GroupCount { label, count })
            .collect();
        if groups.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        groups.sort_by(|a, b| a.label.cmp(&b.label));
        Ok(Self { groups })
    }

    pub fn total(&self) -> u64 {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// `count / total`; `None` when the total is zero.
    pub fn prior(&self, label: &str) -> Option<Ratio<u64>> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        self.groups
            .iter()
            .find(|g| g.label == label)
            .map(|g| Ratio::new(g.count, total))
    }

    pub fn priors(&self) -> Vec<(String, Ratio<u64>)> {
        let total = self.total();
        self.groups
            .iter()
            .map(|g| {
                let p = if total == 0 {
                    Ratio::from_integer(0)
                } else {
                    Ratio::new(g.count, total)
                };
                (g.label.clone(), p)
            })
            .collect()
    }

    pub fn count(&self, label: &str) -> Option<u64> {
        self.groups.iter().find(|g| g.label == label).map(|g| g.count)
    }
}

/// Subjects per group.
pub fn priors(roster: &Roster, grouping: &GroupingScheme) -> Result<ClassDistribution> {
    if roster.is_empty() {
        return Err(Error::EmptyRoster);
    }
    grouping.check_roster(roster)?;
    ClassDistribution::from_counts(
        grouping
            .labels()
            .iter()
            .enumerate()
            .map(|(g, label)| (label.clone(), grouping.members_of_group(g).len() as u64)),
    )
}

/// Samples per group, attributing each record to its true subject's group.
pub fn sample_priors(
    log: &[PredictionRecord],
    roster: &Roster,
    grouping: &GroupingScheme,
) -> Result<ClassDistribution> {
    if roster.is_empty() {
        return Err(Error::EmptyRoster);
    }
    grouping.check_roster(roster)?;
    let mut counts = vec![0u64; grouping.group_count()];
    for r in log {
        let pos = roster
            .position(&r.true_subject)
            .ok_or_else(|| Error::UnknownSubject(r.true_subject.to_string()))?;
        counts[grouping.group_of(pos)] += 1;
    }
    ClassDistribution::from_counts(grouping.labels().iter().cloned().zip(counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Raise every group to the largest count (synthetic augmentation).
    AugmentMax,
    /// Lower every group to the smallest count.
    SubsampleMin,
    /// Move every group to an explicit count.
    Target(i64),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::AugmentMax => f.write_str("augment-max"),
            Strategy::SubsampleMin => f.write_str("subsample-min"),
            Strategy::Target(n) => write!(f, "target:{n}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "augment-max" => Ok(Strategy::AugmentMax),
            "subsample-min" => Ok(Strategy::SubsampleMin),
            _ => {
                let n = s
                    .strip_prefix("target:")
                    .ok_or_else(|| format!("unknown strategy '{s}' (expected augment-max, subsample-min or target:N)"))?;
                n.parse::<i64>()
                    .map(Strategy::Target)
                    .map_err(|_| format!("target '{n}' is not an integer"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanRow {
    pub label: String,
    pub current: u64,
    pub target: u64,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RebalancePlan {
    pub strategy: Strategy,
    pub rows: Vec<PlanRow>,
}

impl RebalancePlan {
    /// Distribution after applying every delta.
    pub fn apply(&self) -> ClassDistribution {
        ClassDistribution {
            groups: self
                .rows
                .iter()
                .map(|r| GroupCount {
                    label: r.label.clone(),
                    count: r.target,
                })
                .collect(),
        }
    }

    pub fn added(&self) -> u64 {
        self.rows.iter().map(|r| r.delta.max(0) as u64).sum()
    }

    pub fn removed(&self) -> u64 {
        self.rows.iter().map(|r| (-r.delta).max(0) as u64).sum()
    }
}

pub fn plan_rebalance(dist: &ClassDistribution, strategy: Strategy) -> Result<RebalancePlan> {
    if dist.groups.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let counts = dist.groups.iter().map(|g| g.count);
    let target = match strategy {
        Strategy::AugmentMax => counts.max().expect("non-empty"),
        Strategy::SubsampleMin => counts.min().expect("non-empty"),
        Strategy::Target(n) if n < 0 => return Err(Error::NegativeTarget(n)),
        Strategy::Target(n) => n as u64,
    };
    let rows = dist
        .groups
        .iter()
        .map(|g| PlanRow {
            label: g.label.clone(),
            current: g.count,
            target,
            delta: target as i64 - g.count as i64,
        })
        .collect();
    Ok(RebalancePlan { strategy, rows })
}
