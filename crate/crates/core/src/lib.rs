//! Personalized decision sets for clinical decision support.
//!
//! A small set of two-way rules is induced from tree-ensemble paths and L1
//! subset selection. Each rule gets a logistic model of its own per-patient
//! correctness; those predicted correctness values weight the rule votes and
//! drive a per-patient reliability score.

pub mod aggregation;
pub mod dataset;
pub mod evaluation;
pub mod induction;
pub mod learners;
pub mod matrix;
pub mod personalization;
pub mod pipeline;
pub mod rng;
pub mod rules;

pub use dataset::{BuiltinDataset, DataError, Dataset, Scaler, Schema, SplitPlan};
pub use learners::{FitError, FitOptions, LinearModel, Regularization};
pub use matrix::Matrix;
pub use rules::{Comparator, Condition, DecisionSet, Rule};
