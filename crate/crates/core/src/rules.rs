//! Two-way decision rules: `IF <conjunction>, THEN a, ELSE b`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;

/// Longest conjunction accepted by default.
pub const DEFAULT_MAX_RULE_LENGTH: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("rule has no conditions")]
    Empty,
    #[error("THEN and ELSE classes are both {0}")]
    Uninformative(u8),
    #[error("class labels must be 0 or 1, got {0}")]
    BadClass(u8),
    #[error("condition threshold must be finite")]
    NonFiniteThreshold,
    #[error("feature index {index} out of range for {n_features} features")]
    FeatureOutOfRange { index: usize, n_features: usize },
    #[error("rule has {len} conditions, maximum is {max}")]
    TooLong { len: usize, max: usize },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("cannot parse condition {0:?}")]
    BadCondition(String),
    #[error("{rules} rules but {accuracies} accuracies")]
    AccuracyCount { rules: usize, accuracies: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Gt => ">",
            Self::Le => "<=",
            Self::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub comparator: Comparator,
    /// Raw feature units.
    pub threshold: f64,
}

impl Condition {
    pub fn new(feature: usize, comparator: Comparator, threshold: f64) -> Self {
        Self { feature, comparator, threshold }
    }

    #[inline]
    pub fn holds(&self, instance: &[f64]) -> bool {
        let v = instance[self.feature];
        match self.comparator {
            Comparator::Gt => v > self.threshold,
            Comparator::Le => v <= self.threshold,
            Comparator::Eq => v == self.threshold,
        }
    }

    /// Total order used for canonical condition lists and tie-breaking.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.feature
            .cmp(&other.feature)
            .then(self.comparator.cmp(&other.comparator))
            .then(self.threshold.total_cmp(&other.threshold))
    }

    pub fn render(&self, names: &[String]) -> String {
        let name = names.get(self.feature).map_or_else(|| format!("x{}", self.feature), Clone::clone);
        format!("{name}{}{}", self.comparator.symbol(), self.threshold)
    }
}

/// Sorts conditions and merges redundant bounds on the same feature
/// (`x>2 AND x>5` becomes `x>5`).
pub fn canonicalize(conditions: &[Condition]) -> Vec<Condition> {
    let mut out: Vec<Condition> = Vec::with_capacity(conditions.len());
    let mut sorted = conditions.to_vec();
    sorted.sort_by(Condition::canonical_cmp);
    for c in sorted {
        match out.last_mut() {
            Some(last) if last.feature == c.feature && last.comparator == c.comparator => match c.comparator {
                Comparator::Gt => last.threshold = last.threshold.max(c.threshold),
                Comparator::Le => last.threshold = last.threshold.min(c.threshold),
                Comparator::Eq if last.threshold == c.threshold => {}
                Comparator::Eq => out.push(c),
            },
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    conditions: Vec<Condition>,
    then_class: u8,
    else_class: u8,
}

impl Rule {
    pub fn new(conditions: Vec<Condition>, then_class: u8, else_class: u8) -> Result<Self, RuleError> {
        if conditions.is_empty() {
            return Err(RuleError::Empty);
        }
        for class in [then_class, else_class] {
            if class > 1 {
                return Err(RuleError::BadClass(class));
            }
        }
        if then_class == else_class {
            return Err(RuleError::Uninformative(then_class));
        }
        if conditions.iter().any(|c| !c.threshold.is_finite()) {
            return Err(RuleError::NonFiniteThreshold);
        }
        Ok(Self { conditions, then_class, else_class })
    }

    /// Checks feature indices and length against a dataset shape.
    pub fn validate(&self, n_features: usize, max_length: usize) -> Result<(), RuleError> {
        if let Some(c) = self.conditions.iter().find(|c| c.feature >= n_features) {
            return Err(RuleError::FeatureOutOfRange { index: c.feature, n_features });
        }
        if self.len() > max_length {
            return Err(RuleError::TooLong { len: self.len(), max: max_length });
        }
        Ok(())
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn then_class(&self) -> u8 {
        self.then_class
    }

    pub fn else_class(&self) -> u8 {
        self.else_class
    }

    /// Number of conditions.
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    #[inline]
    pub fn condition_holds(&self, instance: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(instance))
    }

    #[inline]
    pub fn evaluate(&self, instance: &[f64]) -> u8 {
        if self.condition_holds(instance) {
            self.then_class
        } else {
            self.else_class
        }
    }

    /// Same condition with THEN and ELSE exchanged.
    pub fn swapped(&self) -> Self {
        Self { conditions: self.conditions.clone(), then_class: self.else_class, else_class: self.then_class }
    }

    /// `IF age>80 AND nc>1, THEN 1, ELSE 0`
    pub fn render(&self, names: &[String]) -> String {
        let cond: Vec<String> = self.conditions.iter().map(|c| c.render(names)).collect();
        format!("IF {}, THEN {}, ELSE {}", cond.join(" AND "), self.then_class, self.else_class)
    }

    /// Parses the text form produced by [`Rule::render`].
    pub fn parse(text: &str, names: &[String]) -> Result<Self, RuleError> {
        let bad = || RuleError::BadCondition(text.to_string());
        let body = text.trim().strip_prefix("IF ").ok_or_else(bad)?;
        let (cond, rest) = body.split_once(", THEN ").ok_or_else(bad)?;
        let (then_s, else_s) = rest.split_once(", ELSE ").ok_or_else(bad)?;
        let then_class: u8 = then_s.trim().parse().map_err(|_| bad())?;
        let else_class: u8 = else_s.trim().parse().map_err(|_| bad())?;
        let mut conditions = Vec::new();
        for atom in cond.split(" AND ") {
            let atom = atom.trim();
            let (pos, sym, comparator) = ["<=", "==", ">"]
                .iter()
                .zip([Comparator::Le, Comparator::Eq, Comparator::Gt])
                .find_map(|(sym, cmp)| atom.find(sym).map(|p| (p, *sym, cmp)))
                .ok_or_else(|| RuleError::BadCondition(atom.to_string()))?;
            let name = atom[..pos].trim();
            let threshold: f64 = atom[pos + sym.len()..]
                .trim()
                .parse()
                .map_err(|_| RuleError::BadCondition(atom.to_string()))?;
            let feature = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| RuleError::UnknownFeature(name.to_string()))?;
            conditions.push(Condition::new(feature, comparator, threshold));
        }
        Self::new(conditions, then_class, else_class)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&[]))
    }
}

pub fn evaluate_rule(rule: &Rule, instance: &[f64]) -> u8 {
    rule.evaluate(instance)
}

/// 1 where the rule's output matches the true label.
pub fn correctness_labels(rule: &Rule, dataset: &Dataset) -> Vec<u8> {
    dataset
        .x()
        .row_iter()
        .zip(dataset.y())
        .map(|(row, &y)| u8::from(rule.evaluate(row) == y))
        .collect()
}

pub fn rule_global_accuracy(rule: &Rule, dataset: &Dataset) -> f64 {
    let labels = correctness_labels(rule, dataset);
    labels.iter().map(|&c| c as f64).sum::<f64>() / labels.len() as f64
}

/// K rules with their training accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    rules: Vec<Rule>,
    global_accuracies: Vec<f64>,
}

impl DecisionSet {
    /// Builds a set, computing each rule's accuracy on `dataset`.
    pub fn fit(rules: Vec<Rule>, dataset: &Dataset) -> Self {
        let global_accuracies = rules.iter().map(|r| rule_global_accuracy(r, dataset)).collect();
        Self { rules, global_accuracies }
    }

    pub fn from_parts(rules: Vec<Rule>, global_accuracies: Vec<f64>) -> Result<Self, RuleError> {
        if rules.len() != global_accuracies.len() {
            return Err(RuleError::AccuracyCount { rules: rules.len(), accuracies: global_accuracies.len() });
        }
        Ok(Self { rules, global_accuracies })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn global_accuracies(&self) -> &[f64] {
        &self.global_accuracies
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn outputs(&self, instance: &[f64]) -> Vec<u8> {
        self.rules.iter().map(|r| r.evaluate(instance)).collect()
    }
}
