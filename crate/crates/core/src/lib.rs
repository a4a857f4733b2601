//! Fairness auditing for multiclass biometric identification.
//!
//! The crate turns a prediction log (true identity, predicted identity) and a
//! roster of enrolled subjects with demographic attributes into:
//!
//! * per-class and macro-averaged precision, recall and F1 ([`metrics`]),
//! * demographic parity and equalized odds differences aggregated one-vs-rest
//!   over identities ([`fairness`]),
//! * rebalancing prescriptions for skewed demographic distributions ([`balance`]).
//!
//! [`simulator`] generates seeded synthetic logs (perfect, random-guess and
//! accuracy-controlled classifiers) so the fairness limits can be studied
//! without a trained model, and [`report`] renders audits as tables, CSV or JSON.

pub mod balance;
pub mod domain;
pub mod error;
pub mod fairness;
pub mod grouping;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod simulator;

pub use domain::{IdentityIndex, Modality, PredictionRecord, Roster, SubjectId, SubjectProfile};
pub use error::{Error, Result};
pub use fairness::{fairness_summary, FairnessSummary, GroupRates};
pub use grouping::{bin_age, AgeBin, Attribute, GroupingScheme};
pub use metrics::{ConfusionCounts, ConfusionMatrix, MacroMetrics, Rate};
