use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the in-memory engine.
///
/// Parse failures have their own type in [`crate::ingest::IngestError`] because
/// they carry line positions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("class set is empty")]
    EmptyClassSet,
    #[error("roster is empty")]
    EmptyRoster,
    #[error("grouping '{attribute}' has {present} group(s) present in the roster, at least 2 are required")]
    TooFewGroups { attribute: String, present: usize },
    #[error("unknown group label '{label}' for attribute '{attribute}'")]
    UnknownGroup { attribute: String, label: String },
    #[error("duplicate subject '{0}'")]
    DuplicateSubject(String),
    #[error("subject '{0}' is not in the roster")]
    UnknownSubject(String),
    #[error("subject '{subject}' has an empty {attribute} label")]
    EmptyLabel { subject: String, attribute: String },
    #[error("unknown attribute '{0}' (expected age, gender or ethnicity, optionally joined with '+')")]
    UnknownAttribute(String),
    #[error("age must be at least 1, got {0}")]
    NonPositiveAge(i64),
    #[error("grouping was built for a roster of {expected} subjects, got {actual}")]
    GroupingMismatch { expected: usize, actual: usize },
    #[error("distribution is empty")]
    EmptyDistribution,
    #[error("rebalance target must be non-negative, got {0}")]
    NegativeTarget(i64),
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
}
