//! Voting, calibration and per-patient reliability.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Scaler;
use crate::learners::{sigmoid, FitOptions, LogisticProblem, Regularization};
use crate::matrix::Matrix;
use crate::personalization::{predict_prc, CorrectnessModel, RuleAssessment, WeightTransform};
use crate::rules::DecisionSet;

/// Calibrator slopes are kept at or above this so the map stays increasing.
pub const MIN_CALIBRATOR_SLOPE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("no rule assessments")]
    Empty,
    #[error("vote weights must be finite, non-negative and not all zero")]
    DegenerateWeights,
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("invalid input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    NonWeighted,
    Weighted,
    Personalized,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::NonWeighted, Scheme::Weighted, Scheme::Personalized];

    pub fn name(self) -> &'static str {
        match self {
            Self::NonWeighted => "non_weighted",
            Self::Weighted => "weighted",
            Self::Personalized => "personalized",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "non_weighted" | "nonweighted" | "unweighted" => Ok(Self::NonWeighted),
            "weighted" | "global" => Ok(Self::Weighted),
            "personalized" | "personalised" => Ok(Self::Personalized),
            other => Err(AggregationError::Input(format!("unknown scheme {other:?}"))),
        }
    }
}

/// `Σ o·w / Σ w`.
pub fn weighted_vote(outputs: &[u8], weights: &[f64]) -> Result<f64, AggregationError> {
    if outputs.is_empty() {
        return Err(AggregationError::Empty);
    }
    if outputs.len() != weights.len() {
        return Err(AggregationError::Input(format!("{} outputs but {} weights", outputs.len(), weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(AggregationError::DegenerateWeights);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(AggregationError::DegenerateWeights);
    }
    if weights.iter().all(|&w| w == weights[0]) {
        let count = outputs.iter().filter(|&&o| o == 1).count();
        return Ok(count as f64 / outputs.len() as f64);
    }
    let positive: f64 = outputs.iter().zip(weights).filter(|(&o, _)| o == 1).map(|(_, w)| w).sum();
    Ok((positive / total).clamp(0.0, 1.0))
}

pub fn vote_non_weighted(assessments: &[RuleAssessment]) -> Result<f64, AggregationError> {
    if assessments.is_empty() {
        return Err(AggregationError::Empty);
    }
    let positive = assessments.iter().filter(|a| a.rule_output == 1).count();
    Ok(positive as f64 / assessments.len() as f64)
}

pub fn vote_weighted(assessments: &[RuleAssessment], global_accuracies: &[f64]) -> Result<f64, AggregationError> {
    let outputs: Vec<u8> = assessments.iter().map(|a| a.rule_output).collect();
    weighted_vote(&outputs, global_accuracies)
}

pub fn vote_personalized(assessments: &[RuleAssessment]) -> Result<f64, AggregationError> {
    let outputs: Vec<u8> = assessments.iter().map(|a| a.rule_output).collect();
    let weights: Vec<f64> = assessments.iter().map(|a| a.weight).collect();
    weighted_vote(&outputs, &weights)
}

pub fn vote(scheme: Scheme, assessments: &[RuleAssessment], global_accuracies: &[f64]) -> Result<f64, AggregationError> {
    match scheme {
        Scheme::NonWeighted => vote_non_weighted(assessments),
        Scheme::Weighted => vote_weighted(assessments, global_accuracies),
        Scheme::Personalized => vote_personalized(assessments),
    }
}

/// Platt map `sigmoid(slope·(s − center) + offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub slope: f64,
    pub offset: f64,
    /// Mean training score; centering keeps the fit well conditioned.
    pub center: f64,
}

impl Calibrator {
    pub fn identity() -> Self {
        Self { slope: 1.0, offset: 0.0, center: 0.0 }
    }

    pub fn apply(&self, raw_score: f64) -> f64 {
        sigmoid(self.slope * (raw_score - self.center) + self.offset)
    }
}

/// Fits a Platt calibrator with smoothed targets `(N+ + 1)/(N+ + 2)` and
/// `1/(N- + 2)`.
pub fn fit_calibrator(raw_scores: &[f64], labels: &[u8]) -> Result<Calibrator, AggregationError> {
    if raw_scores.len() != labels.len() {
        return Err(AggregationError::Input(format!("{} scores but {} labels", raw_scores.len(), labels.len())));
    }
    if raw_scores.iter().any(|s| !s.is_finite()) {
        return Err(AggregationError::Calibration("non-finite score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(AggregationError::Calibration("labels contain a single class".into()));
    }
    let center = raw_scores.iter().sum::<f64>() / raw_scores.len() as f64;
    let base_rate = n_pos as f64 / labels.len() as f64;
    if raw_scores.iter().all(|&s| s == raw_scores[0]) {
        return Ok(Calibrator { slope: MIN_CALIBRATOR_SLOPE, offset: logit(base_rate), center });
    }
    let hi = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let lo = 1.0 / (n_neg as f64 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let x = Matrix::new(raw_scores.len(), 1, raw_scores.iter().map(|s| s - center).collect());
    let model = LogisticProblem::new(&x, &targets)
        .and_then(|p| p.fit(Regularization::L2 { strength: 0.0 }, &FitOptions::default(), None))
        .map_err(|e| AggregationError::Calibration(e.to_string()))?
        .model;
    Ok(Calibrator { slope: model.weights[0].max(MIN_CALIBRATOR_SLOPE), offset: model.intercept, center })
}

pub fn apply_calibrator(calibrator: &Calibrator, raw_score: f64) -> f64 {
    calibrator.apply(raw_score)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One calibrator per voting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrators {
    pub non_weighted: Calibrator,
    pub weighted: Calibrator,
    pub personalized: Calibrator,
}

impl Calibrators {
    pub fn get(&self, scheme: Scheme) -> &Calibrator {
        match scheme {
            Scheme::NonWeighted => &self.non_weighted,
            Scheme::Weighted => &self.weighted,
            Scheme::Personalized => &self.personalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteBreakdown {
    pub positive_rules: Vec<usize>,
    pub negative_rules: Vec<usize>,
    pub mean_prc_positive: Option<f64>,
    pub mean_prc_negative: Option<f64>,
}

pub fn vote_breakdown(assessments: &[RuleAssessment]) -> VoteBreakdown {
    let (pos, neg): (Vec<&RuleAssessment>, Vec<&RuleAssessment>) =
        assessments.iter().partition(|a| a.rule_output == 1);
    let mean = |side: &[&RuleAssessment]| {
        (!side.is_empty()).then(|| side.iter().map(|a| a.prc).sum::<f64>() / side.len() as f64)
    };
    VoteBreakdown {
        positive_rules: pos.iter().map(|a| a.rule_index).collect(),
        negative_rules: neg.iter().map(|a| a.rule_index).collect(),
        mean_prc_positive: mean(&pos),
        mean_prc_negative: mean(&neg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    pub value: f64,
    /// Every rule voted the same way; the value uses `|2m - 1|`.
    pub unanimous: bool,
}

/// Absolute gap between the mean PRC of rules voting positive and of rules
/// voting negative.
pub fn reliability(assessments: &[RuleAssessment]) -> Result<Reliability, AggregationError> {
    if assessments.is_empty() {
        return Err(AggregationError::Empty);
    }
    let b = vote_breakdown(assessments);
    Ok(match (b.mean_prc_positive, b.mean_prc_negative) {
        (Some(p), Some(n)) => Reliability { value: (p - n).abs().clamp(0.0, 1.0), unanimous: false },
        (Some(m), None) | (None, Some(m)) => Reliability { value: (2.0 * m - 1.0).abs().clamp(0.0, 1.0), unanimous: true },
        (None, None) => unreachable!("non-empty assessments"),
    })
}

/// Everything needed to score one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub decision_set: DecisionSet,
    pub correctness_models: Vec<CorrectnessModel>,
    pub calibrators: Calibrators,
    #[serde(default)]
    pub weight_transform: WeightTransform,
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn assess(&self, instance: &[f64]) -> Result<Vec<RuleAssessment>, AggregationError> {
        if instance.len() != self.n_features() {
            return Err(AggregationError::Input(format!(
                "expected {} features, got {}",
                self.n_features(),
                instance.len()
            )));
        }
        if instance.iter().any(|v| !v.is_finite()) {
            return Err(AggregationError::Input("non-finite feature value".into()));
        }
        Ok(predict_prc(&self.correctness_models, &self.decision_set, &self.scaler, instance, self.weight_transform))
    }

    /// Raw scores under every scheme, in `Scheme::ALL` order, plus reliability.
    pub fn score_all(&self, instance: &[f64]) -> Result<([f64; 3], Reliability), AggregationError> {
        let assessments = self.assess(instance)?;
        let acc = self.decision_set.global_accuracies();
        let scores = [
            vote(Scheme::NonWeighted, &assessments, acc)?,
            vote(Scheme::Weighted, &assessments, acc)?,
            vote(Scheme::Personalized, &assessments, acc)?,
        ];
        Ok((scores, reliability(&assessments)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub text: String,
    pub output: u8,
    pub prc: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub rules: Vec<RuleReport>,
    pub raw_score: f64,
    pub probability: f64,
    pub reliability: f64,
    pub unanimous: bool,
    pub scheme: Scheme,
}

/// Builds a result from precomputed assessments.
pub fn assemble_result(
    model: &TrainedModel,
    assessments: &[RuleAssessment],
    scheme: Scheme,
) -> Result<PredictionResult, AggregationError> {
    let raw_score = vote(scheme, assessments, model.decision_set.global_accuracies())?;
    let rel = reliability(assessments)?;
    let rules = assessments
        .iter()
        .map(|a| RuleReport {
            text: model.decision_set.rules()[a.rule_index].render(&model.feature_names),
            output: a.rule_output,
            prc: a.prc,
            weight: a.weight,
        })
        .collect();
    Ok(PredictionResult {
        rules,
        raw_score,
        probability: model.calibrators.get(scheme).apply(raw_score),
        reliability: rel.value,
        unanimous: rel.unanimous,
        scheme,
    })
}

pub fn predict_patient(model: &TrainedModel, instance: &[f64], scheme: Scheme) -> Result<PredictionResult, AggregationError> {
    let assessments = model.assess(instance)?;
    assemble_result(model, &assessments, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::personalization::CorrectnessPredictor;
    use crate::rules::{Comparator, Condition, Rule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assessments(outputs: &[u8], prc: &[f64]) -> Vec<RuleAssessment> {
        outputs
            .iter()
            .zip(prc)
            .enumerate()
            .map(|(i, (&o, &p))| RuleAssessment { rule_index: i, rule_output: o, prc: p, weight: p })
            .collect()
    }

    fn worked_patient() -> Vec<RuleAssessment> {
        assessments(&[1, 0, 0, 1], &[0.66, 0.42, 0.54, 0.95])
    }

    #[test]
    fn non_weighted_examples() {
        assert_eq!(vote_non_weighted(&worked_patient()).unwrap(), 0.5);
        assert_eq!(vote_non_weighted(&assessments(&[1, 1, 1], &[0.2, 0.3, 0.4])).unwrap(), 1.0);
        assert_eq!(vote_non_weighted(&assessments(&[0], &[0.9])).unwrap(), 0.0);
        assert_eq!(vote_non_weighted(&[]), Err(AggregationError::Empty));
    }

    #[test]
    fn weighted_examples() {
        let a = assessments(&[1, 0], &[0.5, 0.5]);
        assert!((vote_weighted(&a, &[0.9, 0.6]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(vote_weighted(&a, &[1.8, 1.2]).unwrap(), vote_weighted(&a, &[0.9, 0.6]).unwrap());
        let t = worked_patient();
        assert_eq!(vote_weighted(&t, &[0.7; 4]).unwrap(), vote_non_weighted(&t).unwrap());
        assert_eq!(vote_weighted(&a, &[0.0, 0.0]), Err(AggregationError::DegenerateWeights));
        assert_eq!(vote_weighted(&a, &[-1.0, 2.0]), Err(AggregationError::DegenerateWeights));
    }

    #[test]
    fn personalized_worked_patient_score() {
        let s = vote_personalized(&worked_patient()).unwrap();
        assert!((s - 1.61 / 2.57).abs() < 1e-12, "{s}");
        assert!((s - 0.6265).abs() < 1e-4);
    }

    #[test]
    fn personalized_reduces_and_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let k = rng.random_range(1..12);
            let outputs: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
            let w = rng.random_range(0.01..1.0);
            let equal = assessments(&outputs, &vec![w; k]);
            assert_eq!(vote_personalized(&equal).unwrap(), vote_non_weighted(&equal).unwrap());
            let prc: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
            let a = assessments(&outputs, &prc);
            let scaled: Vec<RuleAssessment> = a.iter().map(|r| RuleAssessment { weight: r.weight * 4.0, ..*r }).collect();
            let s = vote_personalized(&a).unwrap();
            assert_eq!(s, vote_personalized(&scaled).unwrap());
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn reliability_worked_patient() {
        let r = reliability(&worked_patient()).unwrap();
        assert!((r.value - 0.325).abs() < 1e-12, "{}", r.value);
        assert!(!r.unanimous);
        let b = vote_breakdown(&worked_patient());
        assert_eq!(b.positive_rules, vec![0, 3]);
        assert_eq!(b.negative_rules, vec![1, 2]);
        assert!((b.mean_prc_positive.unwrap() - 0.805).abs() < 1e-12);
        assert!((b.mean_prc_negative.unwrap() - 0.48).abs() < 1e-12);
    }

    #[test]
    fn reliability_edge_cases() {
        assert_eq!(reliability(&assessments(&[1, 1, 0, 0], &[1.0, 1.0, 0.0, 0.0])).unwrap().value, 1.0);
        let u = reliability(&assessments(&[1, 1], &[0.5, 0.5])).unwrap();
        assert_eq!(u.value, 0.0);
        assert!(u.unanimous);
        let u = reliability(&assessments(&[0, 0, 0], &[0.9, 0.8, 0.7])).unwrap();
        assert!((u.value - 0.6).abs() < 1e-12);
        assert_eq!(reliability(&[]), Err(AggregationError::Empty));
    }

    #[test]
    fn reliability_is_class_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let k = rng.random_range(1..10);
            let outputs: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
            let prc: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let flipped: Vec<u8> = outputs.iter().map(|o| 1 - o).collect();
            let a = reliability(&assessments(&outputs, &prc)).unwrap();
            let b = reliability(&assessments(&flipped, &prc)).unwrap();
            assert_eq!(a, b);
            assert!((0.0..=1.0).contains(&a.value));
        }
    }

    #[test]
    fn calibrator_on_calibrated_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scores: Vec<f64> = (0..4000).map(|_| rng.random_range(0.05..0.95)).collect();
        let labels: Vec<u8> = scores.iter().map(|&p| u8::from(rng.random::<f64>() < p)).collect();
        let c = fit_calibrator(&scores, &labels).unwrap();
        assert!(c.slope > 0.0);
        let base = labels.iter().map(|&l| l as f64).sum::<f64>() / labels.len() as f64;
        let mean = scores.iter().map(|&s| c.apply(s)).sum::<f64>() / scores.len() as f64;
        assert!((mean - base).abs() < 0.02, "{mean} vs {base}");
        for w in [0.1, 0.3, 0.5, 0.7, 0.9] {
            assert!((c.apply(w) - w).abs() < 0.08, "{w} -> {}", c.apply(w));
        }
    }

    #[test]
    fn calibrator_preserves_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scores: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<u8> = scores.iter().map(|&p| u8::from(rng.random::<f64>() < p)).collect();
        let c = fit_calibrator(&scores, &labels).unwrap();
        for a in &scores {
            for b in &scores {
                assert_eq!(a.partial_cmp(b), c.apply(*a).partial_cmp(&c.apply(*b)));
            }
        }
    }

    #[test]
    fn calibrator_constant_scores_and_errors() {
        let labels = [1, 0, 0, 1, 0, 0, 0, 1];
        let c = fit_calibrator(&[0.4; 8], &labels).unwrap();
        for s in [0.0, 0.4, 1.0] {
            assert!((c.apply(s) - 3.0 / 8.0).abs() < 1e-9);
        }
        assert!(matches!(fit_calibrator(&[0.1, 0.2], &[1, 1]), Err(AggregationError::Calibration(_))));
        assert!(matches!(fit_calibrator(&[0.1], &[1, 0]), Err(AggregationError::Input(_))));
    }

    #[test]
    fn scheme_parsing() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert_eq!("non-weighted".parse::<Scheme>().unwrap(), Scheme::NonWeighted);
        assert!("majority".parse::<Scheme>().is_err());
    }

    fn worked_patient_model() -> TrainedModel {
        let rules = vec![
            Rule::new(vec![Condition::new(0, Comparator::Gt, 80.0)], 1, 0).unwrap(),
            Rule::new(vec![Condition::new(0, Comparator::Gt, 95.0)], 1, 0).unwrap(),
            Rule::new(vec![Condition::new(1, Comparator::Gt, 5.0)], 1, 0).unwrap(),
            Rule::new(vec![Condition::new(1, Comparator::Gt, 1.0)], 1, 0).unwrap(),
        ];
        let correctness_models = [0.66, 0.42, 0.54, 0.95]
            .iter()
            .enumerate()
            .map(|(i, &p)| CorrectnessModel {
                rule_index: i,
                predictor: CorrectnessPredictor::Constant { probability: p },
                train_correctness_rate: p,
            })
            .collect();
        TrainedModel {
            feature_names: vec!["age".into(), "nc".into()],
            scaler: Scaler { means: vec![0.0, 0.0], stds: vec![1.0, 1.0] },
            decision_set: DecisionSet::from_parts(rules, vec![0.7, 0.6, 0.65, 0.8]).unwrap(),
            correctness_models,
            calibrators: Calibrators {
                non_weighted: Calibrator::identity(),
                weighted: Calibrator::identity(),
                personalized: Calibrator::identity(),
            },
            weight_transform: WeightTransform::Identity,
        }
    }

    #[test]
    fn predict_patient_worked_patient() {
        let model = worked_patient_model();
        let p = predict_patient(&model, &[86.0, 2.0], Scheme::Personalized).unwrap();
        assert_eq!(p.rules.iter().map(|r| r.output).collect::<Vec<_>>(), vec![1, 0, 0, 1]);
        assert_eq!(p.rules[0].text, "IF age>80, THEN 1, ELSE 0");
        assert!((p.raw_score - 1.61 / 2.57).abs() < 1e-12);
        assert!((p.reliability - 0.325).abs() < 1e-12);
        assert!(!p.unanimous);
        let nw = predict_patient(&model, &[86.0, 2.0], Scheme::NonWeighted).unwrap();
        assert_eq!(nw.raw_score, 0.5);
        assert_eq!(nw.reliability, p.reliability);
        assert_eq!(p, predict_patient(&model, &[86.0, 2.0], Scheme::Personalized).unwrap());
        let json = serde_json::to_value(&p).unwrap();
        let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["probability", "raw_score", "reliability", "rules", "scheme", "unanimous"]);
        let mut rule_keys: Vec<&str> = json["rules"][0].as_object().unwrap().keys().map(String::as_str).collect();
        rule_keys.sort();
        assert_eq!(rule_keys, ["output", "prc", "text", "weight"]);
    }

    #[test]
    fn predict_patient_rejects_wrong_width() {
        let model = worked_patient_model();
        assert!(matches!(predict_patient(&model, &[86.0], Scheme::Weighted), Err(AggregationError::Input(_))));
        assert!(matches!(predict_patient(&model, &[f64::NAN, 1.0], Scheme::Weighted), Err(AggregationError::Input(_))));
    }
}
