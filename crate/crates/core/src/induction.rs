//! Decision-set induction: paths of a bagged ensemble of shallow Gini trees
//! become candidate two-way rules, and an L1-penalized logistic path over the
//! candidates' firing indicators picks a fixed number of them.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::learners::{FitError, FitOptions, LinearModel, LogisticProblem, Regularization};
use crate::matrix::Matrix;
use crate::rng::{self, DOMAIN_TREES};
use crate::rules::{canonicalize, Comparator, Condition, DecisionSet, Rule};

#[derive(Debug, Error)]
pub enum InductionError {
    #[error("no candidate rule survived extraction")]
    NoCandidates,
    #[error("invalid induction configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InductionConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Minimum support as a fraction of training samples.
    pub min_support_frac: f64,
    /// Absolute floor on minimum support.
    pub min_support_count: usize,
    pub k_target: usize,
    pub l_max: usize,
    pub n_penalties: usize,
    /// Smallest penalty of the sweep relative to the critical value.
    pub penalty_ratio: f64,
    pub seed: u64,
}

impl Default for InductionConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 2,
            min_support_frac: 0.05,
            min_support_count: 10,
            k_target: 10,
            l_max: crate::rules::DEFAULT_MAX_RULE_LENGTH,
            n_penalties: 50,
            penalty_ratio: 1e-3,
            seed: 0,
        }
    }
}

impl InductionConfig {
    pub fn validate(&self) -> Result<(), InductionError> {
        let bad = |m: &str| Err(InductionError::Config(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.k_target == 0 {
            return bad("k_target must be at least 1");
        }
        if self.l_max == 0 {
            return bad("l_max must be at least 1");
        }
        if self.n_penalties < 2 {
            return bad("n_penalties must be at least 2");
        }
        if !(self.penalty_ratio > 0.0 && self.penalty_ratio < 1.0) {
            return bad("penalty_ratio must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.min_support_frac) {
            return bad("min_support_frac must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn min_support(&self, n_samples: usize) -> usize {
        self.min_support_count.max((self.min_support_frac * n_samples as f64).ceil() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// `x[feature] <= threshold`
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Bootstrap-weighted counts of class 0 and class 1.
        class_counts: [u32; 2],
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            Self::Leaf { .. } => 0,
            Self::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Self::Leaf { .. } => 1,
            Self::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Majority class of the reached leaf (ties go to class 1).
    pub fn predict(&self, x: &[f64]) -> u8 {
        match self {
            Self::Leaf { class_counts } => u8::from(class_counts[1] >= class_counts[0]),
            Self::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    /// Root-to-leaf condition lists, left branches first.
    pub fn paths(&self) -> Vec<Vec<Condition>> {
        let mut out = Vec::new();
        self.collect_paths(&mut Vec::new(), &mut out);
        out
    }

    fn collect_paths(&self, prefix: &mut Vec<Condition>, out: &mut Vec<Vec<Condition>>) {
        match self {
            Self::Leaf { .. } => out.push(prefix.clone()),
            Self::Split { feature, threshold, left, right } => {
                prefix.push(Condition::new(*feature, Comparator::Le, *threshold));
                left.collect_paths(prefix, out);
                prefix.pop();
                prefix.push(Condition::new(*feature, Comparator::Gt, *threshold));
                right.collect_paths(prefix, out);
                prefix.pop();
            }
        }
    }
}

const GAIN_TIE_EPS: f64 = 1e-12;

fn gini(c0: f64, c1: f64) -> f64 {
    let n = c0 + c1;
    if n == 0.0 {
        0.0
    } else {
        1.0 - (c0 * c0 + c1 * c1) / (n * n)
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
    balance: f64,
}

fn best_split(x: &Matrix, y: &[u8], weights: &[u32], idx: &[usize], features: &[usize]) -> Option<SplitChoice> {
    let mut totals = [0.0f64; 2];
    for &i in idx {
        totals[y[i] as usize] += weights[i] as f64;
    }
    let n = totals[0] + totals[1];
    let parent = gini(totals[0], totals[1]);
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let mut left = [0.0f64; 2];
        for k in 0..order.len() - 1 {
            let i = order[k];
            left[y[i] as usize] += weights[i] as f64;
            let (lo, hi) = (x.get(i, f), x.get(order[k + 1], f));
            if lo == hi {
                continue;
            }
            let mut threshold = 0.5 * (lo + hi);
            if threshold >= hi {
                threshold = lo;
            }
            let nl = left[0] + left[1];
            let nr = n - nl;
            let child = (nl * gini(left[0], left[1]) + nr * gini(totals[0] - left[0], totals[1] - left[1])) / n;
            let gain = parent - child;
            let balance = nl.min(nr);
            let better = match &best {
                None => true,
                Some(b) => gain > b.gain + GAIN_TIE_EPS || (gain >= b.gain - GAIN_TIE_EPS && balance > b.balance),
            };
            if better {
                best = Some(SplitChoice { feature: f, threshold, gain, balance });
            }
        }
    }
    best
}

/// Greedy Gini tree on the rows with non-zero weight, restricted to `features`.
///
/// Impure nodes above `max_depth` always split when any split exists; among
/// equal-gain splits the most balanced one wins, then the earliest feature and
/// threshold.
pub fn build_tree(x: &Matrix, y: &[u8], weights: &[u32], features: &[usize], max_depth: usize) -> TreeNode {
    let idx: Vec<usize> = (0..y.len()).filter(|&i| weights[i] > 0).collect();
    build_node(x, y, weights, features, idx, 0, max_depth)
}

fn build_node(
    x: &Matrix,
    y: &[u8],
    weights: &[u32],
    features: &[usize],
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
) -> TreeNode {
    let mut counts = [0u32; 2];
    for &i in &idx {
        counts[y[i] as usize] += weights[i];
    }
    if depth >= max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 {
        return TreeNode::Leaf { class_counts: counts };
    }
    let Some(split) = best_split(x, y, weights, &idx, features) else {
        return TreeNode::Leaf { class_counts: counts };
    };
    let (left, right): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| x.get(i, split.feature) <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(build_node(x, y, weights, features, left, depth + 1, max_depth)),
        right: Box::new(build_node(x, y, weights, features, right, depth + 1, max_depth)),
    }
}

/// One bagged tree: a bootstrap resample plus a random subset of
/// `max_features` features, both drawn from `rng`.
pub fn grow_tree<R: Rng>(dataset: &Dataset, max_depth: usize, max_features: usize, rng: &mut R) -> TreeNode {
    let n = dataset.n_samples();
    let d = dataset.n_features();
    let mut weights = vec![0u32; n];
    for _ in 0..n {
        weights[rng.random_range(0..n as u64) as usize] += 1;
    }
    let mut features: Vec<usize> = (0..d).collect();
    rng::shuffle(&mut features, rng);
    features.truncate(max_features.clamp(1, d));
    features.sort_unstable();
    build_tree(dataset.x(), dataset.y(), &weights, &features, max_depth)
}

/// Ensemble of `n_trees` trees; tree `t` uses its own RNG stream.
pub fn grow_ensemble(dataset: &Dataset, config: &InductionConfig) -> Vec<TreeNode> {
    let max_features = (dataset.n_features() as f64).sqrt().ceil() as usize;
    (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream_rng(config.seed, DOMAIN_TREES, t as u64);
            grow_tree(dataset, config.max_depth, max_features, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRule {
    pub rule: Rule,
    /// Training instances satisfying the rule's condition.
    pub support: usize,
    /// `(tree index, path index)` of the first path producing this rule.
    pub source: (usize, usize),
}

/// Assigns THEN/ELSE classes by majority vote on each side of the condition.
/// Returns `None` when a side is empty, a side is tied, or both sides agree.
pub fn orient(conditions: &[Condition], dataset: &Dataset) -> Option<Rule> {
    if conditions.is_empty() {
        return None;
    }
    let mut inside = [0usize; 2];
    let mut outside = [0usize; 2];
    for (row, &y) in dataset.x().row_iter().zip(dataset.y()) {
        if conditions.iter().all(|c| c.holds(row)) {
            inside[y as usize] += 1;
        } else {
            outside[y as usize] += 1;
        }
    }
    let majority = |c: [usize; 2]| match c[1].cmp(&c[0]) {
        Ordering::Greater => Some(1u8),
        Ordering::Less => Some(0u8),
        Ordering::Equal => None,
    };
    if inside[0] + inside[1] == 0 || outside[0] + outside[1] == 0 {
        return None;
    }
    let then_class = majority(inside)?;
    let else_class = majority(outside)?;
    Rule::new(conditions.to_vec(), then_class, else_class).ok()
}

type RuleKey = Vec<(usize, Comparator, u64)>;

fn rule_key(conditions: &[Condition]) -> RuleKey {
    conditions.iter().map(|c| (c.feature, c.comparator, c.threshold.to_bits())).collect()
}

/// Every root-to-leaf path becomes a candidate two-way rule.
///
/// Paths are canonicalized, paths longer than `l_max` or with support below
/// the minimum are dropped, a lone `x<=t` condition is rewritten as `x>t` with
/// the classes exchanged (the same two-way rule), and duplicates keep their
/// first occurrence.
pub fn extract_candidates(ensemble: &[TreeNode], dataset: &Dataset, config: &InductionConfig) -> Vec<CandidateRule> {
    let min_support = config.min_support(dataset.n_samples());
    let mut seen: HashSet<RuleKey> = HashSet::new();
    let mut out = Vec::new();
    for (t, tree) in ensemble.iter().enumerate() {
        for (p, path) in tree.paths().into_iter().enumerate() {
            let mut conditions = canonicalize(&path);
            if conditions.is_empty() || conditions.len() > config.l_max {
                continue;
            }
            if let [only] = conditions.as_mut_slice() {
                if only.comparator == Comparator::Le {
                    only.comparator = Comparator::Gt;
                }
            }
            let key = rule_key(&conditions);
            if seen.contains(&key) {
                continue;
            }
            let support = dataset.x().row_iter().filter(|r| conditions.iter().all(|c| c.holds(r))).count();
            if support < min_support {
                continue;
            }
            seen.insert(key);
            if let Some(rule) = orient(&conditions, dataset) {
                out.push(CandidateRule { rule, support, source: (t, p) });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub n_active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub decision_set: DecisionSet,
    /// Chosen candidates, in selection order.
    pub selected: Vec<CandidateRule>,
    pub coefficients: Vec<f64>,
    /// Penalty at which the selection was taken.
    pub lambda: f64,
    pub trace: Vec<PathPoint>,
    /// Fewer than `k_target` candidates were ever active.
    pub short: bool,
    /// Indices of selected rules whose training accuracy is not above 0.5.
    pub weak_rules: Vec<usize>,
}

fn lexicographic(a: &[Condition], b: &[Condition]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.canonical_cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// Firing matrix: entry `(n, j)` is 1 when candidate `j`'s condition holds for instance `n`.
pub fn firing_matrix(candidates: &[CandidateRule], dataset: &Dataset) -> Matrix {
    let mut z = Matrix::zeros(dataset.n_samples(), candidates.len());
    for (n, row) in dataset.x().row_iter().enumerate() {
        for (j, c) in candidates.iter().enumerate() {
            if c.rule.condition_holds(row) {
                z.set(n, j, 1.0);
            }
        }
    }
    z
}

/// L1 subset selection over candidate rules.
///
/// Sweeps `n_penalties` log-spaced penalties from the critical value down to
/// `penalty_ratio` times it, warm-starting each fit, and stops at the first
/// penalty with at least `k_target` active candidates. The `k_target` largest
/// `|coefficient|` win; ties go to higher support, then shorter rules, then
/// lexicographic condition order.
pub fn select_rules(
    candidates: &[CandidateRule],
    dataset: &Dataset,
    config: &InductionConfig,
) -> Result<Selection, InductionError> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(InductionError::NoCandidates);
    }
    let z = firing_matrix(candidates, dataset);
    let targets: Vec<f64> = dataset.y().iter().map(|&v| v as f64).collect();
    let problem = LogisticProblem::new(&z, &targets)?;
    let lambda_max = problem.l1_critical_strength();
    let opts = FitOptions::default();
    let steps = config.n_penalties - 1;
    let mut trace = Vec::with_capacity(config.n_penalties);
    let mut warm: Option<LinearModel> = None;
    let mut chosen: Option<(f64, LinearModel)> = None;
    for k in 0..config.n_penalties {
        let lambda = lambda_max * config.penalty_ratio.powf(k as f64 / steps as f64);
        let model = problem.fit(Regularization::L1 { strength: lambda }, &opts, warm.as_ref())?.model;
        let n_active = model.active_set().len();
        trace.push(PathPoint { lambda, n_active });
        let done = n_active >= config.k_target;
        chosen = Some((lambda, model.clone()));
        warm = Some(model);
        if done {
            break;
        }
    }
    let (lambda, model) = chosen.expect("at least two penalties");
    let mut active = model.active_set();
    let short = active.len() < config.k_target;
    active.sort_by(|&a, &b| {
        model.weights[b]
            .abs()
            .total_cmp(&model.weights[a].abs())
            .then(candidates[b].support.cmp(&candidates[a].support))
            .then(candidates[a].rule.len().cmp(&candidates[b].rule.len()))
            .then(lexicographic(candidates[a].rule.conditions(), candidates[b].rule.conditions()))
            .then(a.cmp(&b))
    });
    active.truncate(config.k_target);
    let selected: Vec<CandidateRule> = active.iter().map(|&j| candidates[j].clone()).collect();
    let coefficients = active.iter().map(|&j| model.weights[j]).collect();
    let decision_set = DecisionSet::fit(selected.iter().map(|c| c.rule.clone()).collect(), dataset);
    let weak_rules = (0..decision_set.len()).filter(|&i| decision_set.global_accuracies()[i] <= 0.5).collect();
    Ok(Selection { decision_set, selected, coefficients, lambda, trace, short, weak_rules })
}

/// Grow, extract and select in one call.
pub fn induce(dataset: &Dataset, config: &InductionConfig) -> Result<Selection, InductionError> {
    config.validate()?;
    let ensemble = grow_ensemble(dataset, config);
    let candidates = extract_candidates(&ensemble, dataset, config);
    select_rules(&candidates, dataset, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BuiltinDataset, FeatureKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[Vec<f64>], y: Vec<u8>) -> Dataset {
        let d = rows[0].len();
        Dataset::new(
            Matrix::from_rows(rows),
            y,
            (0..d).map(|i| format!("x{i}")).collect(),
            vec![FeatureKind::Numeric; d],
        )
        .unwrap()
    }

    fn all_weights(n: usize) -> Vec<u32> {
        vec![1; n]
    }

    #[test]
    fn separable_one_d_splits_between_classes() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.5, 7.0, 9.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 5.0)).collect();
        let tree = build_tree(&Matrix::from_rows(&rows), &y, &all_weights(8), &[0], 3);
        match &tree {
            TreeNode::Split { threshold, left, right, .. } => {
                assert!(*threshold >= 5.0 && *threshold < 6.5);
                assert!(matches!(**left, TreeNode::Leaf { class_counts: [5, 0] }));
                assert!(matches!(**right, TreeNode::Leaf { class_counts: [0, 3] }));
            }
            leaf => panic!("expected split, got {leaf:?}"),
        }
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn single_class_is_one_leaf() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]);
        let tree = build_tree(&x, &[1, 1, 1], &all_weights(3), &[0], 2);
        assert_eq!(tree, TreeNode::Leaf { class_counts: [0, 3] });
    }

    /// Brute-force check that the greedy depth-2 tree classifies every XOR quadrant.
    #[test]
    fn xor_depth_two_is_exact() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for a in [1.0, 2.0, 3.0, 4.0] {
            for b in [1.0, 2.0, 3.0, 4.0] {
                rows.push(vec![a, b]);
                y.push(u8::from((a > 2.5) != (b > 2.5)));
            }
        }
        let x = Matrix::from_rows(&rows);
        // Independent oracle: no single axis split improves Gini, so every
        // root split ties at zero gain; only the central splits let depth 2 be exact.
        let tree = build_tree(&x, &y, &all_weights(16), &[0, 1], 2);
        let correct = rows.iter().zip(&y).filter(|(r, &t)| tree.predict(r) == t).count();
        assert_eq!(correct, 16);
        assert_eq!(tree.depth(), 2);
    }

    #[test]
    fn depth_one_tree_dedupes_to_one_rule() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let d = dataset(&rows, y);
        let tree = build_tree(d.x(), d.y(), &all_weights(40), &[0], 1);
        assert_eq!(tree.paths().len(), 2);
        let config = InductionConfig::default();
        let cands = extract_candidates(&[tree], &d, &config);
        assert_eq!(cands.len(), 1);
        let r = &cands[0].rule;
        assert_eq!(r.conditions()[0].comparator, Comparator::Gt);
        assert_eq!((r.then_class(), r.else_class()), (1, 0));
    }

    #[test]
    fn orientation_cases() {
        // satisfied only by positives, rest majority negative
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![0, 0, 0, 0, 1, 0, 0, 1, 1, 1];
        let d = dataset(&rows, y);
        let r = orient(&[Condition::new(0, Comparator::Gt, 6.5)], &d).unwrap();
        assert_eq!((r.then_class(), r.else_class()), (1, 0));
        // both sides majority positive
        let y2 = vec![1, 1, 1, 0, 1, 0, 1, 1, 1, 0];
        let d2 = dataset(&rows, y2);
        assert!(orient(&[Condition::new(0, Comparator::Gt, 4.5)], &d2).is_none());
        // 2 positives / 2 negatives satisfy the condition: tie rejects
        let y3 = vec![0, 0, 0, 0, 0, 0, 1, 0, 1, 0];
        let d3 = dataset(&rows, y3);
        assert!(orient(&[Condition::new(0, Comparator::Gt, 5.5)], &d3).is_none());
        // nothing satisfies
        assert!(orient(&[Condition::new(0, Comparator::Gt, 100.0)], &d).is_none());
    }

    #[test]
    fn extraction_respects_bounds_and_dedup() {
        let d = BuiltinDataset::Heart.load();
        let config = InductionConfig { seed: 5, ..Default::default() };
        let ensemble = grow_ensemble(&d, &config);
        assert_eq!(ensemble.len(), 200);
        assert!(ensemble.iter().all(|t| t.depth() <= 2));
        let path_count: usize = ensemble.iter().map(|t| t.paths().len()).sum();
        assert!(path_count <= 200 * 4);
        let cands = extract_candidates(&ensemble, &d, &config);
        assert!(cands.len() <= path_count);
        let min_support = config.min_support(d.n_samples());
        for c in &cands {
            assert!(c.support >= min_support);
            assert!(c.rule.len() <= config.l_max);
        }
        // brute-force pairwise duplicate check
        for i in 0..cands.len() {
            for j in i + 1..cands.len() {
                assert_ne!(cands[i].rule.conditions(), cands[j].rule.conditions());
            }
        }
        // same seed, same ensemble
        assert_eq!(ensemble, grow_ensemble(&d, &config));
    }

    #[test]
    fn selection_finds_the_predictive_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200;
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[2] > 0.5)).collect();
        let d = dataset(&rows, y);
        let make = |f: usize, t: f64| {
            let conds = [Condition::new(f, Comparator::Gt, t)];
            let rule = orient(&conds, &d).unwrap_or_else(|| Rule::new(conds.to_vec(), 1, 0).unwrap());
            CandidateRule { support: 0, rule, source: (0, f) }
        };
        let cands = vec![make(0, 0.5), make(1, 0.4), make(2, 0.5), make(3, 0.6)];
        // oracle: exhaustive single-rule accuracies
        let best = (0..cands.len())
            .max_by(|&a, &b| {
                crate::rules::rule_global_accuracy(&cands[a].rule, &d)
                    .total_cmp(&crate::rules::rule_global_accuracy(&cands[b].rule, &d))
            })
            .unwrap();
        let config = InductionConfig { k_target: 1, ..Default::default() };
        let sel = select_rules(&cands, &d, &config).unwrap();
        assert_eq!(sel.decision_set.len(), 1);
        assert_eq!(sel.selected[0].source, cands[best].source);
        assert_eq!(sel.decision_set.global_accuracies()[0], 1.0);
        // the sweep starts at the critical value with nothing active
        assert_eq!(sel.trace[0].n_active, 0);
        assert!(!sel.short);
    }

    #[test]
    fn too_few_candidates_sets_short_flag() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y: Vec<u8> = (0..60).map(|i| u8::from(i >= 30)).collect();
        let d = dataset(&rows, y);
        let conds = [Condition::new(0, Comparator::Gt, 29.5)];
        let cands = vec![CandidateRule { rule: orient(&conds, &d).unwrap(), support: 30, source: (0, 0) }];
        let config = InductionConfig { k_target: 3, ..Default::default() };
        let sel = select_rules(&cands, &d, &config).unwrap();
        assert!(sel.short);
        assert_eq!(sel.decision_set.len(), 1);
        assert!(matches!(select_rules(&[], &d, &config), Err(InductionError::NoCandidates)));
    }

    #[test]
    fn heart_yields_ten_short_rules() {
        let d = BuiltinDataset::Heart.load();
        let config = InductionConfig { seed: 1, ..Default::default() };
        let sel = induce(&d, &config).unwrap();
        assert_eq!(sel.decision_set.len(), 10);
        assert!(sel.decision_set.rules().iter().all(|r| r.len() <= 3));
        assert!(sel.weak_rules.is_empty());
        assert!(sel.trace.windows(2).all(|w| w[0].lambda > w[1].lambda && w[0].n_active <= w[1].n_active));
        let again = induce(&d, &config).unwrap();
        assert_eq!(sel, again);
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let c: InductionConfig = serde_json::from_str(r#"{"n_trees": 50, "k_target": 4, "seed": 9}"#).unwrap();
        assert_eq!(c.n_trees, 50);
        assert_eq!(c.max_depth, 2);
        assert!(serde_json::from_str::<InductionConfig>(r#"{"bogus": 1}"#).is_err());
        assert!(InductionConfig { k_target: 0, ..Default::default() }.validate().is_err());
        assert_eq!(InductionConfig::default().min_support(100), 10);
        assert_eq!(InductionConfig::default().min_support(569), 29);
    }
}
