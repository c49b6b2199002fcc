//! End-to-end training: rules, correctness models, calibrators.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{fit_calibrator, AggregationError, Calibrator, Calibrators, Scheme, TrainedModel};
use crate::dataset::{split_labels, DataError, Dataset, Scaler};
use crate::induction::{induce, InductionConfig, InductionError, Selection};
use crate::learners::FitError;
use crate::personalization::{train_correctness_models, CorrectnessConfig, WeightTransform};
use crate::rng::{stream_rng, DOMAIN_CALIBRATION};
use crate::rules::DecisionSet;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Induction(#[from] InductionError),
    #[error("correctness model: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("induction produced no rules")]
    NoRules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub induction: InductionConfig,
    pub correctness: CorrectnessConfig,
    pub weight_transform: WeightTransform,
    /// Inner folds used to produce out-of-fold scores for calibration.
    pub calibration_folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            induction: InductionConfig::default(),
            correctness: CorrectnessConfig::default(),
            weight_transform: WeightTransform::Identity,
            calibration_folds: 5,
        }
    }
}

impl PipelineConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.induction.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.induction.seed
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutput {
    pub model: TrainedModel,
    pub selection: Selection,
}

/// Trains every artifact on `dataset`.
pub fn train_model(dataset: &Dataset, config: &PipelineConfig) -> Result<TrainingOutput, PipelineError> {
    let selection = induce(dataset, &config.induction)?;
    if selection.decision_set.is_empty() {
        return Err(PipelineError::NoRules);
    }
    let set = selection.decision_set.clone();
    let scaler = Scaler::fit(dataset.x());
    let correctness_models = train_correctness_models(&set, dataset, &scaler, &config.correctness)?;
    let mut model = TrainedModel {
        feature_names: dataset.feature_names().to_vec(),
        scaler,
        decision_set: set,
        correctness_models,
        calibrators: Calibrators {
            non_weighted: Calibrator::identity(),
            weighted: Calibrator::identity(),
            personalized: Calibrator::identity(),
        },
        weight_transform: config.weight_transform,
    };
    model.calibrators = fit_calibrators(&model, dataset, config)?;
    Ok(TrainingOutput { model, selection })
}

/// Out-of-fold raw scores under each scheme. The rule set stays fixed; only
/// the scaler, rule accuracies and correctness models are refit per fold.
/// Falls back to in-sample scores when a class is too small to stratify.
pub fn out_of_fold_scores(
    model: &TrainedModel,
    dataset: &Dataset,
    config: &PipelineConfig,
) -> Result<[Vec<f64>; 3], PipelineError> {
    let n = dataset.n_samples();
    let mut scores = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let split_seed = stream_rng(config.seed(), DOMAIN_CALIBRATION, 0).random::<u64>();
    let plan = match split_labels(dataset.y(), 1, config.calibration_folds.max(2), split_seed) {
        Ok(plan) => plan,
        Err(_) => {
            for (i, row) in dataset.x().row_iter().enumerate() {
                let (s, _) = model.score_all(row)?;
                for k in 0..3 {
                    scores[k][i] = s[k];
                }
            }
            return Ok(scores);
        }
    };
    let rules = model.decision_set.rules().to_vec();
    for fold in &plan.assignments {
        let inner = dataset.subset(&fold.train)?;
        let scaler = Scaler::fit(inner.x());
        let set = DecisionSet::fit(rules.clone(), &inner);
        let correctness_models = train_correctness_models(&set, &inner, &scaler, &config.correctness)?;
        let fold_model = TrainedModel {
            feature_names: model.feature_names.clone(),
            scaler,
            decision_set: set,
            correctness_models,
            calibrators: model.calibrators,
            weight_transform: model.weight_transform,
        };
        for &i in &fold.test {
            let (s, _) = fold_model.score_all(dataset.x().row(i))?;
            for k in 0..3 {
                scores[k][i] = s[k];
            }
        }
    }
    Ok(scores)
}

pub fn fit_calibrators(model: &TrainedModel, dataset: &Dataset, config: &PipelineConfig) -> Result<Calibrators, PipelineError> {
    let scores = out_of_fold_scores(model, dataset, config)?;
    let fit = |scheme: Scheme| {
        let k = Scheme::ALL.iter().position(|&s| s == scheme).expect("scheme listed");
        fit_calibrator(&scores[k], dataset.y())
    };
    Ok(Calibrators {
        non_weighted: fit(Scheme::NonWeighted)?,
        weighted: fit(Scheme::Weighted)?,
        personalized: fit(Scheme::Personalized)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::predict_patient;
    use crate::dataset::BuiltinDataset;

    #[test]
    fn trains_end_to_end_on_heart() {
        let d = BuiltinDataset::Heart.load();
        let out = train_model(&d, &PipelineConfig::default().with_seed(1)).unwrap();
        assert_eq!(out.model.decision_set.len(), 10);
        assert_eq!(out.model.correctness_models.len(), 10);
        for s in Scheme::ALL {
            assert!(out.model.calibrators.get(s).slope > 0.0);
        }
        let p = predict_patient(&out.model, d.x().row(0), Scheme::Personalized).unwrap();
        assert_eq!(p.rules.len(), 10);
        assert!((0.0..=1.0).contains(&p.probability));
    }

    #[test]
    fn training_is_deterministic() {
        let d = BuiltinDataset::Mammo.load();
        let a = train_model(&d, &PipelineConfig::default().with_seed(5)).unwrap();
        let b = train_model(&d, &PipelineConfig::default().with_seed(5)).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let c = PipelineConfig::default().with_seed(9);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), c);
        let partial: PipelineConfig = serde_json::from_str(r#"{"induction":{"k_target":5}}"#).unwrap();
        assert_eq!(partial.induction.k_target, 5);
        assert_eq!(partial.calibration_folds, 5);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus":1}"#).is_err());
    }
}
