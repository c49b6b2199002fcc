//! Metrics and the repeated cross-validation harness.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::Scheme;
use crate::dataset::{Dataset, FoldAssignment, SplitPlan};
use crate::pipeline::{train_model, PipelineConfig};
use crate::rng::{stream_rng, DOMAIN_FOLD};

pub const DEFAULT_BINS: usize = 10;
const Z_95: f64 = 1.96;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("{0} values but {1} labels")]
    Length(usize, usize),
    #[error("non-finite score")]
    NonFinite,
}

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("split plan does not match dataset: {0}")]
    Plan(String),
    #[error("every fold failed")]
    AllFoldsFailed,
    #[error("cannot write report to {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

/// Mann-Whitney AUC with ties counted one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// 1-based ranks with ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Mean of sensitivity and specificity.
pub fn balanced_accuracy(predicted: &[u8], labels: &[u8]) -> Result<f64, MetricError> {
    if predicted.len() != labels.len() {
        return Err(MetricError::Length(predicted.len(), labels.len()));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let tp = predicted.iter().zip(labels).filter(|(&p, &l)| p == 1 && l == 1).count();
    let tn = predicted.iter().zip(labels).filter(|(&p, &l)| p != 1 && l != 1).count();
    Ok((tp as f64 / n_pos as f64 + tn as f64 / n_neg as f64) / 2.0)
}

/// Spearman correlation with average ranks; `None` when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

/// One scored test instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRecord {
    pub repeat: usize,
    pub reliability: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
    /// Mean over repeats of the per-repeat misclassification rate; `None`
    /// for an empty bin.
    pub rate_mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub per_repeat_rates: Vec<Option<f64>>,
}

impl CurveBin {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Bin `(k/n, (k+1)/n]`, with 0 placed in the first bin.
pub fn bin_index(reliability: f64, n_bins: usize) -> usize {
    let k = (reliability * n_bins as f64).ceil() as isize - 1;
    k.clamp(0, n_bins as isize - 1) as usize
}

/// Misclassification rate per reliability bin: computed per repeat, then
/// mean and a normal-approximation 95% interval across repeats.
pub fn reliability_curve(records: &[ReliabilityRecord], n_bins: usize) -> Vec<CurveBin> {
    let n_bins = n_bins.max(1);
    let n_repeats = records.iter().map(|r| r.repeat + 1).max().unwrap_or(0);
    let mut totals = vec![vec![0usize; n_repeats]; n_bins];
    let mut errors = vec![vec![0usize; n_repeats]; n_bins];
    for r in records {
        let b = bin_index(r.reliability, n_bins);
        totals[b][r.repeat] += 1;
        errors[b][r.repeat] += usize::from(!r.correct);
    }
    (0..n_bins)
        .map(|b| {
            let per_repeat_rates: Vec<Option<f64>> = (0..n_repeats)
                .map(|rep| (totals[b][rep] > 0).then(|| errors[b][rep] as f64 / totals[b][rep] as f64))
                .collect();
            let rates: Vec<f64> = per_repeat_rates.iter().flatten().copied().collect();
            let stats = MeanStd::of(&rates);
            let half = stats.map(|s| Z_95 * s.std / (s.n as f64).sqrt());
            CurveBin {
                bin_low: b as f64 / n_bins as f64,
                bin_high: (b + 1) as f64 / n_bins as f64,
                count: totals[b].iter().sum(),
                rate_mean: stats.map(|s| s.mean),
                ci_low: stats.zip(half).map(|(s, h)| (s.mean - h).max(0.0)),
                ci_high: stats.zip(half).map(|(s, h)| (s.mean + h).min(1.0)),
                per_repeat_rates,
            }
        })
        .collect()
}

/// Spearman correlation of bin index against mean rate over nonempty bins.
pub fn curve_trend(curve: &[CurveBin]) -> Option<f64> {
    let (idx, rate): (Vec<f64>, Vec<f64>) =
        curve.iter().enumerate().filter_map(|(i, b)| b.rate_mean.map(|r| (i as f64, r))).unzip();
    spearman(&idx, &rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_rules: usize,
    pub auc: BTreeMap<Scheme, f64>,
    pub balanced_accuracy: BTreeMap<Scheme, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedFold {
    pub repeat: usize,
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset_name: String,
    pub seed: u64,
    pub repeats: usize,
    pub folds: usize,
    pub n_samples: usize,
    pub per_scheme_auc: BTreeMap<Scheme, MeanStd>,
    pub per_scheme_balanced_accuracy: BTreeMap<Scheme, MeanStd>,
    /// Balanced accuracy of the personalized scheme.
    pub balanced_accuracy: MeanStd,
    pub reliability_curve: Vec<CurveBin>,
    pub reliability_trend: Option<f64>,
    pub fold_results: Vec<FoldResult>,
    pub failed_folds: Vec<FailedFold>,
    pub config_snapshot: PipelineConfig,
}

impl ExperimentReport {
    pub fn auc(&self, scheme: Scheme) -> f64 {
        self.per_scheme_auc[&scheme].mean
    }
}

struct FoldOutcome {
    result: FoldResult,
    records: Vec<ReliabilityRecord>,
}

fn check_hygiene(assignment: &FoldAssignment, n: usize) -> Result<(), EvaluationError> {
    let mut seen = vec![0u8; n];
    for &i in &assignment.train {
        if i >= n {
            return Err(EvaluationError::Plan(format!("train index {i} out of range")));
        }
        seen[i] |= 1;
    }
    for &i in &assignment.test {
        if i >= n {
            return Err(EvaluationError::Plan(format!("test index {i} out of range")));
        }
        if seen[i] & 1 == 1 {
            return Err(EvaluationError::Plan(format!(
                "index {i} is in both train and test of repeat {} fold {}",
                assignment.repeat, assignment.fold
            )));
        }
        seen[i] |= 2;
    }
    Ok(())
}

fn run_fold(dataset: &Dataset, assignment: &FoldAssignment, config: &PipelineConfig) -> Result<FoldOutcome, String> {
    let train = dataset.subset(&assignment.train).map_err(|e| e.to_string())?;
    let test = dataset.subset(&assignment.test).map_err(|e| e.to_string())?;
    let trained = train_model(&train, config).map_err(|e| e.to_string())?;
    let model = &trained.model;
    let mut raw: [Vec<f64>; 3] = Default::default();
    let mut records = Vec::with_capacity(test.n_samples());
    let mut predicted: [Vec<u8>; 3] = Default::default();
    for (row, &label) in test.x().row_iter().zip(test.y()) {
        let (scores, rel) = model.score_all(row).map_err(|e| e.to_string())?;
        for (k, scheme) in Scheme::ALL.iter().enumerate() {
            raw[k].push(scores[k]);
            predicted[k].push(u8::from(model.calibrators.get(*scheme).apply(scores[k]) >= 0.5));
        }
        let personalized = predicted[2][predicted[2].len() - 1];
        records.push(ReliabilityRecord { repeat: assignment.repeat, reliability: rel.value, correct: personalized == label });
    }
    let mut auc = BTreeMap::new();
    let mut ba = BTreeMap::new();
    for (k, scheme) in Scheme::ALL.iter().enumerate() {
        auc.insert(*scheme, roc_auc(&raw[k], test.y()).map_err(|e| e.to_string())?);
        ba.insert(*scheme, balanced_accuracy(&predicted[k], test.y()).map_err(|e| e.to_string())?);
    }
    Ok(FoldOutcome {
        result: FoldResult {
            repeat: assignment.repeat,
            fold: assignment.fold,
            n_train: train.n_samples(),
            n_test: test.n_samples(),
            n_rules: model.decision_set.len(),
            auc,
            balanced_accuracy: ba,
        },
        records,
    })
}

/// Seed used for the fold at position `index` of the plan.
pub fn fold_seed(seed: u64, index: usize) -> u64 {
    stream_rng(seed, DOMAIN_FOLD, index as u64).random()
}

/// Cross-validates the full pipeline over `plan`. Each fold trains only on its
/// training indices; failed folds are reported and left out of the summary.
pub fn run_experiment(
    dataset_name: &str,
    dataset: &Dataset,
    plan: &SplitPlan,
    config: &PipelineConfig,
) -> Result<ExperimentReport, EvaluationError> {
    if plan.n_samples != dataset.n_samples() {
        return Err(EvaluationError::Plan(format!(
            "plan covers {} samples, dataset has {}",
            plan.n_samples,
            dataset.n_samples()
        )));
    }
    for a in &plan.assignments {
        check_hygiene(a, dataset.n_samples())?;
    }
    let outcomes: Vec<Result<FoldOutcome, String>> = plan
        .assignments
        .par_iter()
        .enumerate()
        .map(|(i, a)| run_fold(dataset, a, &config.clone().with_seed(fold_seed(plan.seed, i))))
        .collect();

    let mut fold_results = Vec::new();
    let mut failed_folds = Vec::new();
    let mut records = Vec::new();
    for (a, outcome) in plan.assignments.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                fold_results.push(o.result);
                records.extend(o.records);
            }
            Err(error) => failed_folds.push(FailedFold { repeat: a.repeat, fold: a.fold, error }),
        }
    }
    if fold_results.is_empty() {
        return Err(EvaluationError::AllFoldsFailed);
    }
    let summarize = |pick: &dyn Fn(&FoldResult) -> &BTreeMap<Scheme, f64>| -> BTreeMap<Scheme, MeanStd> {
        Scheme::ALL
            .iter()
            .map(|s| {
                let v: Vec<f64> = fold_results.iter().map(|f| pick(f)[s]).collect();
                (*s, MeanStd::of(&v).expect("at least one fold"))
            })
            .collect()
    };
    let per_scheme_auc = summarize(&|f| &f.auc);
    let per_scheme_balanced_accuracy = summarize(&|f| &f.balanced_accuracy);
    let reliability_curve = reliability_curve(&records, DEFAULT_BINS);
    Ok(ExperimentReport {
        dataset_name: dataset_name.to_string(),
        seed: plan.seed,
        repeats: plan.repeats,
        folds: plan.folds,
        n_samples: dataset.n_samples(),
        balanced_accuracy: per_scheme_balanced_accuracy[&Scheme::Personalized],
        per_scheme_auc,
        per_scheme_balanced_accuracy,
        reliability_trend: curve_trend(&reliability_curve),
        reliability_curve,
        fold_results,
        failed_folds,
        config_snapshot: config.clone(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn fold_csv(report: &ExperimentReport) -> Result<String, EvaluationError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "scheme", "repeat", "fold", "auc"])?;
    for f in &report.fold_results {
        for (scheme, auc) in &f.auc {
            w.write_record([
                report.dataset_name.clone(),
                scheme.to_string(),
                f.repeat.to_string(),
                f.fold.to_string(),
                auc.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv output is utf-8"))
}

pub fn curve_csv(report: &ExperimentReport) -> Result<String, EvaluationError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "bin_low", "bin_high", "rate_mean", "ci_low", "ci_high", "count"])?;
    for b in &report.reliability_curve {
        w.write_record([
            report.dataset_name.clone(),
            b.bin_low.to_string(),
            b.bin_high.to_string(),
            opt(b.rate_mean),
            opt(b.ci_low),
            opt(b.ci_high),
            b.count.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv output is utf-8"))
}

/// Writes `<name>_report.json`, `<name>_folds.csv` and `<name>_curve.csv`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, EvaluationError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvaluationError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = &report.dataset_name;
    let files = [
        (dir.join(format!("{name}_report.json")), serde_json::to_string_pretty(report)? + "\n"),
        (dir.join(format!("{name}_folds.csv")), fold_csv(report)?),
        (dir.join(format!("{name}_curve.csv")), curve_csv(report)?),
    ];
    let mut written = Vec::new();
    for (path, body) in files {
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// One-line summary: AUC per scheme, balanced accuracy, trend.
pub fn summary_line(report: &ExperimentReport) -> String {
    let s = |scheme| {
        let m = report.per_scheme_auc[&scheme];
        format!("{:.3} ± {:.3}", m.mean, m.std)
    };
    format!(
        "{:<8} non_weighted {}  weighted {}  personalized {}  BA {:.3}  trend {}  failed {}",
        report.dataset_name,
        s(Scheme::NonWeighted),
        s(Scheme::Weighted),
        s(Scheme::Personalized),
        report.balanced_accuracy.mean,
        report.reliability_trend.map(|t| format!("{t:.2}")).unwrap_or_else(|| "n/a".into()),
        report.failed_folds.len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_split_plan, BuiltinDataset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        let s = [0.3, 0.3, 0.7, 0.1, 0.7, 0.5];
        let y = [1, 0, 1, 0, 0, 1];
        assert!((roc_auc(&s, &y).unwrap() - pairwise_auc(&s, &y)).abs() < 1e-12);
        assert_eq!(roc_auc(&[0.5; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(MetricError::SingleClass));
    }

    #[test]
    fn auc_matches_pairwise_oracle_and_is_rank_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(4..120);
            let mut y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            y[0] = 0;
            y[1] = 1;
            let s: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64) / 7.0).collect();
            let auc = roc_auc(&s, &y).unwrap();
            assert!((auc - pairwise_auc(&s, &y)).abs() < 1e-12);
            let t: Vec<f64> = s.iter().map(|v| (v * 3.0).exp() - 2.0).collect();
            assert!((roc_auc(&t, &y).unwrap() - auc).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[1, 1, 1, 1], &[1, 0, 1, 0]).unwrap(), 0.5);
        let mut pred = vec![1; 8];
        pred.extend([0, 0]);
        pred.extend([0; 6]);
        pred.extend([1; 4]);
        let mut y = vec![1; 10];
        y.extend([0; 10]);
        assert!((balanced_accuracy(&pred, &y).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(balanced_accuracy(&[1], &[0]), Err(MetricError::SingleClass));
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 0.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[0.4, 0.3, 0.3, 0.1]).unwrap();
        assert!(r < -0.9);
    }

    #[test]
    fn bins_are_left_open() {
        assert_eq!(bin_index(0.0, 10), 0);
        assert_eq!(bin_index(0.1, 10), 0);
        assert_eq!(bin_index(0.10001, 10), 1);
        assert_eq!(bin_index(0.9, 10), 8);
        assert_eq!(bin_index(0.95, 10), 9);
        assert_eq!(bin_index(1.0, 10), 9);
    }

    #[test]
    fn curve_recovers_known_rates() {
        let rates = [0.5, 0.4, 0.3, 0.2, 0.1, 0.0];
        let mut records = Vec::new();
        for repeat in 0..5 {
            for (b, &rate) in rates.iter().enumerate() {
                let n = 20;
                let wrong = (rate * n as f64) as usize;
                for i in 0..n {
                    records.push(ReliabilityRecord {
                        repeat,
                        reliability: (b as f64 + 0.5) / 10.0,
                        correct: i >= wrong,
                    });
                }
            }
        }
        let curve = reliability_curve(&records, 10);
        assert_eq!(curve.len(), 10);
        assert_eq!(curve.iter().map(|b| b.count).sum::<usize>(), records.len());
        for (b, &rate) in rates.iter().enumerate() {
            assert!((curve[b].rate_mean.unwrap() - rate).abs() < 1e-12);
            assert_eq!(curve[b].ci_low, curve[b].rate_mean);
        }
        assert!(curve[6..].iter().all(|b| b.is_empty() && b.rate_mean.is_none()));
        assert_eq!(curve_trend(&curve), Some(-1.0));
    }

    #[test]
    fn curve_interval_uses_repeat_spread() {
        let mut records = Vec::new();
        for (repeat, wrong) in [(0, 1), (1, 3)] {
            for i in 0..4 {
                records.push(ReliabilityRecord { repeat, reliability: 0.55, correct: i >= wrong });
            }
        }
        let b = &reliability_curve(&records, 10)[5];
        assert!((b.rate_mean.unwrap() - 0.5).abs() < 1e-12);
        let sd = (2.0f64 * 0.25 * 0.25).sqrt();
        let half = 1.96 * sd / 2f64.sqrt();
        assert!((b.ci_high.unwrap() - (0.5 + half)).abs() < 1e-12);
        assert!((b.ci_low.unwrap() - (0.5 - half)).abs() < 1e-12);
    }

    #[test]
    fn all_correct_gives_zero_rates() {
        let records: Vec<ReliabilityRecord> =
            (0..100).map(|i| ReliabilityRecord { repeat: i % 3, reliability: i as f64 / 100.0, correct: true }).collect();
        for b in reliability_curve(&records, 10) {
            assert_eq!(b.rate_mean, Some(0.0));
        }
    }

    #[test]
    fn small_experiment_is_deterministic_and_consistent() {
        let d = BuiltinDataset::Heart.load();
        let plan = make_split_plan(&d, 1, 3, 4).unwrap();
        let config = PipelineConfig::default();
        let a = run_experiment("heart", &d, &plan, &config).unwrap();
        let b = run_experiment("heart", &d, &plan, &config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.fold_results.len(), 3);
        assert!(a.failed_folds.is_empty());
        assert_eq!(a.reliability_curve.iter().map(|b| b.count).sum::<usize>(), d.n_samples());
        assert!(a.auc(Scheme::Personalized) > 0.75);
        let csv = fold_csv(&a).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 3);
        assert!(csv.starts_with("dataset,scheme,repeat,fold,auc\n"));
        assert_eq!(curve_csv(&a).unwrap().lines().count(), 11);
    }

    #[test]
    fn overlapping_plan_is_rejected() {
        let d = BuiltinDataset::Heart.load();
        let mut plan = make_split_plan(&d, 1, 3, 4).unwrap();
        let leaked = plan.assignments[0].test[0];
        plan.assignments[0].train.push(leaked);
        assert!(matches!(run_experiment("heart", &d, &plan, &PipelineConfig::default()), Err(EvaluationError::Plan(_))));
    }
}
