//! Per-rule correctness models.
//!
//! For each rule the training labels are replaced by the rule's correctness
//! (1 where its output matches the truth) and a ridge logistic model is fit on
//! the standardized features. At inference its probability is the rule's
//! predicted correctness (PRC) for that patient.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Scaler};
use crate::learners::{FitError, FitOptions, LinearModel, LogisticProblem, Regularization};
use crate::matrix::Matrix;
use crate::rules::{correctness_labels, DecisionSet, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectnessConfig {
    /// Ridge strength; `None` means `1 / N`.
    pub l2_strength: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CorrectnessConfig {
    fn default() -> Self {
        let fit = FitOptions::default();
        Self { l2_strength: None, tol: fit.tol, max_iter: fit.max_iter }
    }
}

/// Maps a PRC to a voting weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightTransform {
    #[default]
    Identity,
    Squared,
}

impl WeightTransform {
    pub fn apply(self, prc: f64) -> f64 {
        match self {
            Self::Identity => prc,
            Self::Squared => prc * prc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrectnessPredictor {
    Logistic { model: LinearModel },
    /// Fallback for single-class correctness labels.
    Constant { probability: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessModel {
    pub rule_index: usize,
    pub predictor: CorrectnessPredictor,
    pub train_correctness_rate: f64,
}

impl CorrectnessModel {
    pub fn is_degenerate(&self) -> bool {
        matches!(self.predictor, CorrectnessPredictor::Constant { .. })
    }

    /// PRC for an already standardized feature vector.
    pub fn predict(&self, standardized: &[f64]) -> f64 {
        match &self.predictor {
            CorrectnessPredictor::Logistic { model } => model.predict_proba(standardized),
            CorrectnessPredictor::Constant { probability } => *probability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleAssessment {
    pub rule_index: usize,
    pub rule_output: u8,
    pub prc: f64,
    pub weight: f64,
}

/// Standardized features and the rule's correctness labels.
pub fn build_correctness_dataset(rule: &Rule, dataset: &Dataset, scaler: &Scaler) -> (Matrix, Vec<u8>) {
    (scaler.transform(dataset.x()), correctness_labels(rule, dataset))
}

/// One correctness model per rule, all fit on the same standardized design.
pub fn train_correctness_models(
    set: &DecisionSet,
    dataset: &Dataset,
    scaler: &Scaler,
    config: &CorrectnessConfig,
) -> Result<Vec<CorrectnessModel>, FitError> {
    let n = dataset.n_samples();
    let standardized = scaler.transform(dataset.x());
    let l2 = config.l2_strength.unwrap_or(1.0 / n as f64);
    let opts = FitOptions { tol: config.tol, max_iter: config.max_iter };
    let mut problem: Option<LogisticProblem> = None;
    set.rules()
        .iter()
        .enumerate()
        .map(|(rule_index, rule)| {
            let labels = correctness_labels(rule, dataset);
            let correct = labels.iter().filter(|&&c| c == 1).count();
            let rate = correct as f64 / n as f64;
            let predictor = if correct == 0 || correct == n {
                let nf = n as f64;
                CorrectnessPredictor::Constant { probability: rate.clamp(1.0 / (nf + 2.0), (nf + 1.0) / (nf + 2.0)) }
            } else {
                let targets: Vec<f64> = labels.iter().map(|&c| c as f64).collect();
                let p = match problem.take() {
                    Some(p) => p.with_targets(&targets)?,
                    None => LogisticProblem::new(&standardized, &targets)?,
                };
                let model = p.fit(Regularization::L2 { strength: l2 }, &opts, None)?.model;
                problem = Some(p);
                CorrectnessPredictor::Logistic { model }
            };
            Ok(CorrectnessModel { rule_index, predictor, train_correctness_rate: rate })
        })
        .collect()
}

/// Rule outputs come from raw features; PRCs from standardized ones.
pub fn predict_prc(
    models: &[CorrectnessModel],
    set: &DecisionSet,
    scaler: &Scaler,
    instance: &[f64],
    transform: WeightTransform,
) -> Vec<RuleAssessment> {
    let standardized = scaler.transform_row(instance);
    set.rules()
        .iter()
        .zip(models)
        .enumerate()
        .map(|(rule_index, (rule, model))| {
            let prc = model.predict(&standardized);
            RuleAssessment { rule_index, rule_output: rule.evaluate(instance), prc, weight: transform.apply(prc) }
        })
        .collect()
}
