//! Train/test splitting, confusion-matrix metrics, first-layer weight
//! contributions and the JSON report.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{History, ModelBundle, ModelParams};
use crate::topo::FEATURE_NAMES;

pub const REPORT_SCHEMA_VERSION: &str = "report.v1";
pub const CONTRIBUTION_METHOD: &str = "column-wise L1 norm of the first weight layer (sum over hidden units of |w|)";

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("class {label} has {count} samples; splitting needs at least 2 per class")]
    SmallClass { label: u8, count: usize },
    #[error("test_fraction must lie in (0, 1), got {0}")]
    Fraction(f64),
    #[error("threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} predictions vs {1} labels")]
    Length(usize, usize),
    #[error("weight contributions are defined for MLP models only")]
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class seeded shuffle; each class puts `round(count · test_fraction)`
/// (at least 1, at most `count − 1`) samples into the test set. Returned
/// indices are positions in `labels`, sorted.
pub fn stratified_split(labels: &[u8], test_fraction: f64, seed: u64) -> Result<Split, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::Fraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.len() < 2 {
            return Err(EvalError::SmallClass { label, count: members.len() });
        }
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `prob ≥ threshold` counts as a positive prediction.
pub fn confusion(probs: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix, EvalError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(EvalError::Threshold(threshold));
    }
    if probs.len() != labels.len() {
        return Err(EvalError::Length(probs.len(), labels.len()));
    }
    if probs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 as the harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Zero denominators give 0.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    Metrics { accuracy: ratio(cm.tp + cm.tn, cm.total()), precision, recall, f1: f1_score(precision, recall) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    pub value: f64,
}

/// Per-input L1 mass of the first weight layer of an MLP.
pub fn weight_contributions(bundle: &ModelBundle) -> Result<Vec<Contribution>, EvalError> {
    let ModelParams::Mlp(p) = &bundle.params else {
        return Err(EvalError::Unsupported);
    };
    let first = &p.layers[0].w;
    Ok((0..first.rows())
        .map(|j| Contribution {
            feature: FEATURE_NAMES.get(j).map(|s| s.to_string()).unwrap_or_else(|| format!("f{j}")),
            value: first.row(j).iter().map(|w| w.abs()).sum(),
        })
        .collect())
}

/// One evaluated model for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub history: History,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contributions: Option<Vec<Contribution>>,
}

impl ModelReport {
    pub fn evaluate(bundle: &ModelBundle, probs: &[f64], labels: &[u8], threshold: f64) -> Result<Self, EvalError> {
        let cm = confusion(probs, labels, threshold)?;
        let contributions = match bundle.params {
            ModelParams::Mlp(_) => Some(weight_contributions(bundle)?),
            ModelParams::Gcn(_) => None,
        };
        Ok(Self {
            model: bundle.params.kind().to_string(),
            test_size: labels.len(),
            confusion: cm,
            metrics: metrics(&cm),
            history: bundle.history.clone(),
            contributions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub threshold: f64,
    pub contribution_method: String,
    pub models: Vec<ModelReport>,
    /// Echo of the effective configuration, seeds included.
    pub config: serde_json::Value,
    #[serde(default)]
    pub dataset: serde_json::Value,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn model(&self, kind: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == kind)
    }

    /// `model,accuracy,precision,recall,f1,tp,fp,fn,tn`
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("model,accuracy,precision,recall,f1,tp,fp,fn,tn\n");
        for m in &self.models {
            let (x, c) = (&m.metrics, &m.confusion);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                m.model, x.accuracy, x.precision, x.recall, x.f1, c.tp, c.fp, c.fn_, c.tn
            ));
        }
        out
    }
}

fn model_rank(kind: &str) -> u8 {
    match kind {
        "mlp" => 0,
        "gcn" => 1,
        _ => 2,
    }
}

/// Assembles the report with models ordered MLP then GCN.
pub fn emit_report(
    mut models: Vec<ModelReport>,
    threshold: f64,
    config: serde_json::Value,
    dataset: serde_json::Value,
) -> Report {
    models.sort_by_key(|m| model_rank(&m.model));
    Report {
        schema_version: REPORT_SCHEMA_VERSION.to_string(),
        threshold,
        contribution_method: CONTRIBUTION_METHOD.to_string(),
        models,
        config,
        dataset,
    }
}
