//! Tabular binary-classification data: schema-driven CSV loading, listwise
//! deletion of incomplete rows, train-only standardization and stratified
//! repeated k-fold split plans.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::rng::{self, DOMAIN_SPLIT};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    /// Integer-coded ordinal categories.
    #[serde(alias = "categorical-ordinal", alias = "categorical_ordinal")]
    Categorical,
}

fn default_missing() -> String {
    "?".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default = "default_missing")]
    pub missing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub name: String,
    /// Predicate on the raw label cell, e.g. `">0"`, `"==M"`, `"==1"`.
    pub positive_when: String,
}

/// Column description for a headerless CSV file.
///
/// When `columns` is absent the file holds the features in declaration order
/// followed by the label. Otherwise `columns` gives the file order, and every
/// column that is neither a feature nor the label must be listed in `ignore`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ignore: Vec<String>,
    pub features: Vec<FeatureDescriptor>,
    pub label: LabelSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Feature(usize),
    Label,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
struct LabelPredicate {
    op: CmpOp,
    operand: String,
}

impl LabelPredicate {
    fn parse(text: &str) -> Result<Self, DataError> {
        let text = text.trim();
        let table = [
            (">=", CmpOp::Ge),
            ("<=", CmpOp::Le),
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            (">", CmpOp::Gt),
            ("<", CmpOp::Lt),
        ];
        let (op, rest) = table
            .iter()
            .find_map(|(sym, op)| text.strip_prefix(sym).map(|rest| (*op, rest)))
            .unwrap_or((CmpOp::Eq, text));
        let operand = rest.trim().to_string();
        if operand.is_empty() {
            return Err(DataError::Schema(format!("empty operand in positive_when {text:?}")));
        }
        if !matches!(op, CmpOp::Eq | CmpOp::Ne) && operand.parse::<f64>().is_err() {
            return Err(DataError::Schema(format!(
                "ordering comparison needs a numeric operand in {text:?}"
            )));
        }
        Ok(Self { op, operand })
    }

    fn is_positive(&self, cell: &str) -> Result<bool, String> {
        let cell = cell.trim();
        let numeric = cell.parse::<f64>().ok().zip(self.operand.parse::<f64>().ok());
        let ordering = match numeric {
            Some((a, b)) => a.partial_cmp(&b).ok_or_else(|| format!("non-comparable label {cell:?}"))?,
            None => {
                return match self.op {
                    CmpOp::Eq => Ok(cell == self.operand),
                    CmpOp::Ne => Ok(cell != self.operand),
                    _ => Err(format!("label {cell:?} is not numeric")),
                }
            }
        };
        use std::cmp::Ordering::*;
        Ok(match self.op {
            CmpOp::Gt => ordering == Greater,
            CmpOp::Ge => ordering != Less,
            CmpOp::Lt => ordering == Less,
            CmpOp::Le => ordering != Greater,
            CmpOp::Eq => ordering == Equal,
            CmpOp::Ne => ordering != Equal,
        })
    }
}

impl Schema {
    pub fn from_json_str(text: &str) -> Result<Self, DataError> {
        let schema: Schema =
            serde_json::from_str(text).map_err(|e| DataError::Schema(format!("invalid schema JSON: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.features.is_empty() {
            return Err(DataError::Schema("schema declares no features".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if f.name.is_empty() {
                return Err(DataError::Schema("empty feature name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate feature {:?}", f.name)));
            }
        }
        if seen.contains(self.label.name.as_str()) {
            return Err(DataError::Schema(format!(
                "label column {:?} is also declared as a feature",
                self.label.name
            )));
        }
        LabelPredicate::parse(&self.label.positive_when)?;
        self.layout().map(|_| ())
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.features.iter().map(|f| f.kind).collect()
    }

    fn layout(&self) -> Result<Vec<Column>, DataError> {
        let Some(columns) = &self.columns else {
            let mut layout: Vec<Column> = (0..self.features.len()).map(Column::Feature).collect();
            layout.push(Column::Label);
            return Ok(layout);
        };
        let mut layout = Vec::with_capacity(columns.len());
        let mut used_features = vec![false; self.features.len()];
        let mut label_seen = false;
        for name in columns {
            if let Some(i) = self.features.iter().position(|f| &f.name == name) {
                if std::mem::replace(&mut used_features[i], true) {
                    return Err(DataError::Schema(format!("column {name:?} listed twice")));
                }
                layout.push(Column::Feature(i));
            } else if *name == self.label.name {
                if std::mem::replace(&mut label_seen, true) {
                    return Err(DataError::Schema(format!("column {name:?} listed twice")));
                }
                layout.push(Column::Label);
            } else if self.ignore.contains(name) {
                layout.push(Column::Ignored);
            } else {
                return Err(DataError::Schema(format!("unknown column {name:?}")));
            }
        }
        if let Some(i) = used_features.iter().position(|u| !u) {
            return Err(DataError::Schema(format!(
                "feature {:?} missing from column list",
                self.features[i].name
            )));
        }
        if !label_seen {
            return Err(DataError::Schema(format!(
                "label {:?} missing from column list",
                self.label.name
            )));
        }
        Ok(layout)
    }
}

/// One parsed CSV row before cleaning. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub values: Vec<Option<f64>>,
    pub label: Option<u8>,
}

/// Listwise deletion: rows with any missing feature, missing label or
/// non-finite value are dropped.
pub fn clean_rows(rows: Vec<RawRow>) -> Vec<RawRow> {
    rows.into_iter()
        .filter(|r| r.label.is_some() && r.values.iter().all(|v| v.is_some_and(f64::is_finite)))
        .collect()
}

/// Parses headerless CSV text into raw rows (no cleaning applied).
pub fn parse_csv(text: &str, schema: &Schema) -> Result<Vec<RawRow>, DataError> {
    schema.validate()?;
    let layout = schema.layout()?;
    let predicate = LabelPredicate::parse(&schema.label.positive_when)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if record.len() != layout.len() {
            return Err(DataError::Parse {
                line,
                message: format!("expected {} columns, found {}", layout.len(), record.len()),
            });
        }
        let mut values = vec![None; schema.features.len()];
        let mut label = None;
        for (cell, column) in record.iter().zip(&layout) {
            match *column {
                Column::Ignored => {}
                Column::Label => {
                    if cell.is_empty() || cell == "?" {
                        continue;
                    }
                    let positive = predicate
                        .is_positive(cell)
                        .map_err(|message| DataError::Parse { line, message })?;
                    label = Some(u8::from(positive));
                }
                Column::Feature(i) => {
                    let desc = &schema.features[i];
                    if cell == desc.missing {
                        continue;
                    }
                    let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                        line,
                        message: format!("feature {:?}: cannot parse {cell:?} as a number", desc.name),
                    })?;
                    if desc.kind == FeatureKind::Categorical && v.fract() != 0.0 {
                        return Err(DataError::Parse {
                            line,
                            message: format!("categorical feature {:?} has non-integer code {cell:?}", desc.name),
                        });
                    }
                    values[i] = Some(v);
                }
            }
        }
        rows.push(RawRow { values, label });
    }
    Ok(rows)
}

/// Parses, cleans and validates CSV text.
pub fn dataset_from_csv_str(text: &str, schema: &Schema) -> Result<Dataset, DataError> {
    let rows = clean_rows(parse_csv(text, schema)?);
    if rows.is_empty() {
        return Err(DataError::Data("no complete rows left after removing missing values".into()));
    }
    Dataset::from_raw_rows(&rows, schema.feature_names(), schema.feature_kinds())
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    dataset_from_csv_str(&text, schema)
}

/// Clean binary-classification data: finite features and labels in {0, 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Vec<u8>,
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        y: Vec<u8>,
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
    ) -> Result<Self, DataError> {
        if x.rows() != y.len() {
            return Err(DataError::Data(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        if x.cols() != feature_names.len() || feature_kinds.len() != feature_names.len() {
            return Err(DataError::Data("feature metadata does not match column count".into()));
        }
        if y.is_empty() {
            return Err(DataError::Data("dataset is empty".into()));
        }
        if !x.is_finite() {
            return Err(DataError::Data("non-finite feature value".into()));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(DataError::Data("labels must be 0 or 1".into()));
        }
        let positives = y.iter().filter(|&&v| v == 1).count();
        if positives == 0 || positives == y.len() {
            return Err(DataError::Data("both classes must be present".into()));
        }
        Ok(Self { x, y, feature_names, feature_kinds })
    }

    fn from_raw_rows(
        rows: &[RawRow],
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
    ) -> Result<Self, DataError> {
        let d = feature_names.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        let mut y = Vec::with_capacity(rows.len());
        for r in rows {
            data.extend(r.values.iter().map(|v| v.expect("cleaned row")));
            y.push(r.label.expect("cleaned row"));
        }
        Self::new(Matrix::new(rows.len(), d, data), y, feature_names, feature_kinds)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_positive(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        Self::new(
            self.x.select_rows(indices),
            indices.iter().map(|&i| self.y[i]).collect(),
            self.feature_names.clone(),
            self.feature_kinds.clone(),
        )
    }

    /// Same samples with the features replaced (used after standardization).
    pub fn with_features(&self, x: Matrix) -> Self {
        assert_eq!((x.rows(), x.cols()), (self.x.rows(), self.x.cols()));
        Self { x, ..self.clone() }
    }

    /// SHA-256 over names, shape, feature bits and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        h.update((self.n_samples() as u64).to_le_bytes());
        h.update((self.n_features() as u64).to_le_bytes());
        for v in self.x.as_slice() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(&self.y);
        hex::encode(h.finalize())
    }

    /// Observed range per feature, plus the observed codes of categorical ones.
    pub fn feature_summary(&self) -> Vec<FeatureSummary> {
        (0..self.n_features())
            .map(|j| {
                let col = self.x.column(j);
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let levels = (self.feature_kinds[j] == FeatureKind::Categorical).then(|| {
                    let mut v = col.clone();
                    v.sort_by(f64::total_cmp);
                    v.dedup();
                    v
                });
                FeatureSummary {
                    name: self.feature_names[j].clone(),
                    kind: self.feature_kinds[j],
                    min,
                    max,
                    levels,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub kind: FeatureKind,
    pub min: f64,
    pub max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

/// Per-feature affine standardization fit on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    /// Population standard deviations. Zero marks a pass-through column.
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let mut means = vec![0.0; x.cols()];
        let mut stds = vec![0.0; x.cols()];
        for j in 0..x.cols() {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            means[j] = mean;
            stds[j] = var.sqrt();
        }
        Self { means, stds }
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| if s > 0.0 { (v - m) / s } else { v })
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut data = Vec::with_capacity(x.rows() * x.cols());
        for row in x.row_iter() {
            data.extend(self.transform_row(row));
        }
        Matrix::new(x.rows(), x.cols(), data)
    }
}

pub fn standardize(train: &Dataset) -> (Scaler, Dataset) {
    let scaler = Scaler::fit(train.x());
    let transformed = train.with_features(scaler.transform(train.x()));
    (scaler, transformed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub repeat: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    pub n_samples: usize,
    /// Ordered by `(repeat, fold)`.
    pub assignments: Vec<FoldAssignment>,
}

pub fn make_split_plan(dataset: &Dataset, repeats: usize, folds: usize, seed: u64) -> Result<SplitPlan, DataError> {
    split_labels(dataset.y(), repeats, folds, seed)
}

/// Stratified repeated k-fold over a label vector.
///
/// Each class is shuffled independently, positives are dealt round-robin
/// across folds, then negatives continue the deal where positives stopped so
/// fold sizes differ by at most one.
pub fn split_labels(y: &[u8], repeats: usize, folds: usize, seed: u64) -> Result<SplitPlan, DataError> {
    if folds < 2 {
        return Err(DataError::Config(format!("need at least 2 folds, got {folds}")));
    }
    if repeats == 0 {
        return Err(DataError::Config("need at least 1 repeat".into()));
    }
    let positives: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let negatives: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 1).collect();
    let smallest = positives.len().min(negatives.len());
    if smallest < folds {
        return Err(DataError::Config(format!(
            "smallest class has {smallest} samples, cannot stratify into {folds} folds"
        )));
    }
    let mut assignments = Vec::with_capacity(repeats * folds);
    for repeat in 0..repeats {
        let mut rng = rng::stream_rng(seed, DOMAIN_SPLIT, repeat as u64);
        let mut pos = positives.clone();
        let mut neg = negatives.clone();
        rng::shuffle(&mut pos, &mut rng);
        rng::shuffle(&mut neg, &mut rng);
        let mut fold_of = vec![0usize; y.len()];
        for (k, &i) in pos.iter().chain(&neg).enumerate() {
            fold_of[i] = k % folds;
        }
        for fold in 0..folds {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold_of[i] == fold);
            assignments.push(FoldAssignment { repeat, fold, train, test });
        }
    }
    Ok(SplitPlan { repeats, folds, seed, n_samples: y.len(), assignments })
}

/// The three clinical datasets shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinDataset {
    Heart,
    Breast,
    Mammo,
}

impl BuiltinDataset {
    pub const ALL: [BuiltinDataset; 3] = [Self::Heart, Self::Breast, Self::Mammo];

    pub fn name(self) -> &'static str {
        match self {
            Self::Heart => "heart",
            Self::Breast => "breast",
            Self::Mammo => "mammo",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Heart => "processed.cleveland.data",
            Self::Breast => "wdbc.data",
            Self::Mammo => "mammographic_masses.data",
        }
    }

    fn sources(self) -> (&'static str, &'static str) {
        match self {
            Self::Heart => (
                include_str!("../data/processed.cleveland.data"),
                include_str!("../data/processed.cleveland.schema.json"),
            ),
            Self::Breast => (include_str!("../data/wdbc.data"), include_str!("../data/wdbc.schema.json")),
            Self::Mammo => (
                include_str!("../data/mammographic_masses.data"),
                include_str!("../data/mammographic_masses.schema.json"),
            ),
        }
    }

    pub fn schema(self) -> Schema {
        Schema::from_json_str(self.sources().1).expect("bundled schema is valid")
    }

    pub fn raw_csv(self) -> &'static str {
        self.sources().0
    }

    pub fn load(self) -> Dataset {
        dataset_from_csv_str(self.raw_csv(), &self.schema()).expect("bundled dataset is valid")
    }
}

impl fmt::Display for BuiltinDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinDataset {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "heart" | "cleveland" => Ok(Self::Heart),
            "breast" | "wdbc" => Ok(Self::Breast),
            "mammo" | "mammographic" => Ok(Self::Mammo),
            other => Err(DataError::Config(format!("unknown dataset {other:?}"))),
        }
    }
}
