//! Stage orchestration over an output directory.
//!
//! Every stage reads its inputs, writes its artifact next to a
//! `<stage>.manifest.json`, and refuses upstream artifacts whose manifest
//! was produced under a different configuration or whose bytes no longer
//! match the recorded hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::balance::{smote_enn, BalanceError, LabeledSamples, Provenance, ResampleReport, SamplerParams, SmoteParams};
use crate::contractize::{build_contract_dataset, ContractDataset, ContractError};
use crate::eval::{emit_report, stratified_split, EvalError, ModelReport, Report};
use crate::ingest::{
    build_graph, load_kinds, load_labels, parse_transactions, prune_low_degree, Address, IngestError, NodeKind, TxGraph,
};
use crate::matrix::Matrix;
use crate::nn::{
    predict, predict_rows, train_gcn, train_mlp, FeatureMeta, ModelBundle, ModelParams, NnError, TrainConfig,
};
use crate::synth::{generate, SynthConfig, SynthError};
use crate::topo::{
    fit_normalize, FeatureMatrix, FeatureSidecar, HitsParams, NormStat, PageRankParams, TopoError, Topology,
};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const GRAPH_FILE: &str = "graph.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const FEATURES_META_FILE: &str = "features.meta.json";
pub const CONTRACTS_FILE: &str = "contracts.json";
pub const SPLIT_FILE: &str = "split.json";
pub const RESAMPLED_FILE: &str = "resampled.json";
pub const REPORT_FILE: &str = "report.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {}", join_violations(.0))]
    Config(Vec<Violation>),
    #[error("{0}")]
    Usage(String),
    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {message}", .artifact.display())]
    Stale { artifact: PathBuf, message: String },
    #[error("{}{}: {message}", .path.display(), .line.map(|l| format!(":{l}")).unwrap_or_default())]
    Data { path: PathBuf, line: Option<u64>, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(Violation::to_string).collect::<Vec<_>>().join("; ")
}

impl PipelineError {
    /// 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Data { .. } => 2,
            PipelineError::Numeric(_) => 3,
            _ => 1,
        }
    }

    fn data(path: &Path, message: impl ToString) -> Self {
        PipelineError::Data { path: path.to_path_buf(), line: None, message: message.to_string() }
    }

    fn ingest(path: &Path, e: IngestError) -> Self {
        let message = match &e {
            IngestError::Row { message, .. } => message.clone(),
            IngestError::Overflow { value, .. } => format!("value {value} does not fit in 128 bits"),
            e => e.to_string(),
        };
        PipelineError::Data { path: path.to_path_buf(), line: e.line(), message }
    }

    fn nn(path: &Path, e: NnError) -> Self {
        match e {
            NnError::Divergence { .. } | NnError::NonFiniteGradient { .. } => PipelineError::Numeric(e.to_string()),
            NnError::Config(m) => PipelineError::Usage(m),
            NnError::VersionMismatch { .. } | NnError::NormMismatch => {
                PipelineError::Stale { artifact: path.to_path_buf(), message: e.to_string() }
            }
            e => PipelineError::data(path, e),
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub transactions: PathBuf,
    pub kinds: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneConfig {
    pub min_total_degree: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleScope {
    /// Split first, resample the training rows only.
    TrainOnly,
    /// Resample all labeled rows, then split the result.
    PreSplit,
}

impl std::str::FromStr for ResampleScope {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train-only" => Ok(ResampleScope::TrainOnly),
            "pre-split" => Ok(ResampleScope::PreSplit),
            _ => Err(format!("unknown resample scope {s:?} (expected train-only or pre-split)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResampleConfig {
    pub smote_k: usize,
    pub enn_k: usize,
    pub target_ratio: f64,
    pub scope: ResampleScope,
}

/// Training hyperparameters; the seed comes from the pipeline seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub layers: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub eval_every: usize,
}

impl ModelConfig {
    fn from_train(t: TrainConfig) -> Self {
        Self {
            hidden_dim: t.hidden_dim,
            layers: t.layers,
            dropout: t.dropout,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            epochs: t.epochs,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            eval_every: t.eval_every,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden_dim: self.hidden_dim,
            layers: self.layers,
            dropout: self.dropout,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            eval_every: self.eval_every,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub minority_fraction: f64,
    pub radius: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_eoa: usize,
    pub n_contract: usize,
    pub n_scam: usize,
    pub background_tx_per_eoa: f64,
    pub scam_fan_in: usize,
    pub value_log10_mean: f64,
    pub value_log10_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataPaths,
    pub prune: PruneConfig,
    pub pagerank: PageRankParams,
    pub hits: HitsParams,
    pub split: SplitConfig,
    pub resample: ResampleConfig,
    pub mlp: ModelConfig,
    pub gcn: ModelConfig,
    pub sampler: SamplerConfig,
    pub threshold: f64,
    pub seed: u64,
    pub synth: SynthSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let s = SynthConfig::default();
        let sp = SamplerParams::default();
        Self {
            data: DataPaths {
                transactions: "data/transactions.csv".into(),
                kinds: "data/kinds.csv".into(),
                labels: "data/labels.csv".into(),
            },
            prune: PruneConfig { min_total_degree: 2 },
            pagerank: PageRankParams::default(),
            hits: HitsParams::default(),
            split: SplitConfig { test_fraction: 0.2 },
            resample: ResampleConfig { smote_k: 5, enn_k: 3, target_ratio: 1.0, scope: ResampleScope::TrainOnly },
            mlp: ModelConfig::from_train(TrainConfig::mlp_default()),
            gcn: ModelConfig::from_train(TrainConfig::gcn_default()),
            sampler: SamplerConfig {
                batch_size: sp.batch_size,
                minority_fraction: sp.minority_fraction,
                radius: sp.radius,
            },
            threshold: 0.5,
            seed: 0,
            synth: SynthSection {
                n_eoa: s.n_eoa,
                n_contract: s.n_contract,
                n_scam: s.n_scam,
                background_tx_per_eoa: s.background_tx_per_eoa,
                scam_fan_in: s.scam_fan_in,
                value_log10_mean: s.value_log10_mean,
                value_log10_std: s.value_log10_std,
            },
        }
    }
}

/// Per-stage seeds derived from the pipeline seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub synth: u64,
    pub split: u64,
    pub smote: u64,
    pub mlp: u64,
    pub gcn: u64,
    pub sampler: u64,
}

pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

impl PipelineConfig {
    pub fn seeds(&self) -> StageSeeds {
        StageSeeds {
            synth: derive_seed(self.seed, "synth"),
            split: derive_seed(self.seed, "split"),
            smote: derive_seed(self.seed, "smote"),
            mlp: derive_seed(self.seed, "mlp"),
            gcn: derive_seed(self.seed, "gcn"),
            sampler: derive_seed(self.seed, "sampler"),
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            n_eoa: s.n_eoa,
            n_contract: s.n_contract,
            n_scam: s.n_scam,
            background_tx_per_eoa: s.background_tx_per_eoa,
            scam_fan_in: s.scam_fan_in,
            value_log10_mean: s.value_log10_mean,
            value_log10_std: s.value_log10_std,
            seed: self.seeds().synth,
        }
    }

    pub fn sampler_params(&self) -> SamplerParams {
        SamplerParams {
            batch_size: self.sampler.batch_size,
            minority_fraction: self.sampler.minority_fraction,
            radius: self.sampler.radius,
            seed: self.seeds().sampler,
        }
    }

    /// Parses a (possibly partial) config document layered over the
    /// defaults, rejecting it if any field breaks its rule.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let merged = merge_over_defaults(text).map_err(|v| PipelineError::Config(vec![v]))?;
        let violations = validate_value(&merged);
        if !violations.is_empty() {
            return Err(PipelineError::Config(violations));
        }
        serde_json::from_value(merged)
            .map_err(|e| PipelineError::Config(vec![Violation { field: "<document>".into(), rule: e.to_string() }]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(PipelineError::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let v = validate_value(&serde_json::to_value(self).expect("config serializes"));
        if v.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(v))
        }
    }

    /// Sections that determine the output of `stage` and of everything it
    /// consumes, as canonical JSON.
    fn stage_inputs(&self, stage: Stage) -> Value {
        let c = serde_json::to_value(self).expect("config serializes");
        let pick =
            |keys: &[&str]| -> Value { Value::Object(keys.iter().map(|k| (k.to_string(), c[*k].clone())).collect()) };
        let keys: &[&str] = match stage {
            Stage::Synth => &["data", "synth", "seed"],
            Stage::Ingest => &["data", "prune"],
            Stage::Featurize | Stage::Contractize => &["data", "prune", "pagerank", "hits"],
            Stage::Resample => &["data", "prune", "pagerank", "hits", "split", "resample", "seed"],
            Stage::TrainMlp => &["data", "prune", "pagerank", "hits", "split", "resample", "seed", "mlp"],
            Stage::TrainGcn => &["data", "prune", "pagerank", "hits", "split", "resample", "seed", "gcn", "sampler"],
            Stage::Evaluate => &[
                "data",
                "prune",
                "pagerank",
                "hits",
                "split",
                "resample",
                "seed",
                "mlp",
                "gcn",
                "sampler",
                "threshold",
            ],
        };
        pick(keys)
    }

    pub fn stage_hash(&self, stage: Stage) -> String {
        sha256_hex(serde_json::to_string(&self.stage_inputs(stage)).expect("json").as_bytes())
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn merge_over_defaults(text: &str) -> std::result::Result<Value, Violation> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Violation { field: "<document>".into(), rule: format!("must be valid JSON ({e})") })?;
    if !doc.is_object() {
        return Err(Violation { field: "<document>".into(), rule: "must be a JSON object".into() });
    }
    let mut base = serde_json::to_value(PipelineConfig::default()).expect("defaults serialize");
    merge(&mut base, doc);
    Ok(base)
}

/// Every rule violated by the document, layered over the defaults. An
/// unparseable document yields a single `<document>` violation.
pub fn validate_config(text: &str) -> Vec<Violation> {
    match merge_over_defaults(text) {
        Ok(v) => {
            let mut out = validate_value(&v);
            if out.is_empty() {
                if let Err(e) = serde_json::from_value::<PipelineConfig>(v) {
                    out.push(Violation { field: "<document>".into(), rule: e.to_string() });
                }
            }
            out
        }
        Err(v) => vec![v],
    }
}

enum Rule {
    /// Integer `>= min`.
    Int(u64),
    /// Real in the interval, with open/closed ends.
    Real {
        lo: f64,
        lo_open: bool,
        hi: f64,
        hi_open: bool,
    },
    Str,
    OneOf(&'static [&'static str]),
}

impl Rule {
    fn describe(&self, field: &str) -> String {
        let name = field.rsplit('.').next().unwrap_or(field);
        match self {
            Rule::Int(min) => format!("{name} must be an integer >= {min}"),
            Rule::Real { lo, lo_open, hi, hi_open } => {
                let l = if *lo_open { '(' } else { '[' };
                let r = if *hi_open { ')' } else { ']' };
                let hi = if hi.is_infinite() { "inf".to_string() } else { hi.to_string() };
                format!("{name} ∈ {l}{lo},{hi}{r}")
            }
            Rule::Str => format!("{name} must be a string"),
            Rule::OneOf(opts) => format!("{name} must be one of {}", opts.join(", ")),
        }
    }

    fn holds(&self, v: &Value) -> bool {
        match self {
            Rule::Int(min) => v.as_u64().is_some_and(|x| x >= *min),
            Rule::Real { lo, lo_open, hi, hi_open } => v.as_f64().is_some_and(|x| {
                let above = if *lo_open { x > *lo } else { x >= *lo };
                let below = if *hi_open { x < *hi } else { x <= *hi };
                x.is_finite() && above && below
            }),
            Rule::Str => v.is_string(),
            Rule::OneOf(opts) => v.as_str().is_some_and(|s| opts.contains(&s)),
        }
    }
}

const fn real(lo: f64, lo_open: bool, hi: f64, hi_open: bool) -> Rule {
    Rule::Real { lo, lo_open, hi, hi_open }
}

const INF: f64 = f64::INFINITY;

fn rules() -> Vec<(String, Rule)> {
    let mut r: Vec<(String, Rule)> = vec![
        ("data.transactions".into(), Rule::Str),
        ("data.kinds".into(), Rule::Str),
        ("data.labels".into(), Rule::Str),
        ("prune.min_total_degree".into(), Rule::Int(0)),
        ("pagerank.damping".into(), real(0.0, true, 1.0, true)),
        ("pagerank.tol".into(), real(0.0, true, INF, true)),
        ("pagerank.max_iter".into(), Rule::Int(1)),
        ("hits.tol".into(), real(0.0, true, INF, true)),
        ("hits.max_iter".into(), Rule::Int(1)),
        ("split.test_fraction".into(), real(0.0, true, 1.0, true)),
        ("resample.smote_k".into(), Rule::Int(1)),
        ("resample.enn_k".into(), Rule::Int(1)),
        ("resample.target_ratio".into(), real(0.0, true, 1.0, false)),
        ("resample.scope".into(), Rule::OneOf(&["train-only", "pre-split"])),
        ("sampler.batch_size".into(), Rule::Int(1)),
        ("sampler.minority_fraction".into(), real(0.0, false, 1.0, false)),
        ("sampler.radius".into(), Rule::Int(0)),
        ("threshold".into(), real(0.0, true, 1.0, true)),
        ("seed".into(), Rule::Int(0)),
        ("synth.n_eoa".into(), Rule::Int(2)),
        ("synth.n_contract".into(), Rule::Int(2)),
        ("synth.n_scam".into(), Rule::Int(1)),
        ("synth.background_tx_per_eoa".into(), real(0.0, true, INF, true)),
        ("synth.scam_fan_in".into(), Rule::Int(1)),
        ("synth.value_log10_mean".into(), real(0.0, false, 37.0, false)),
        ("synth.value_log10_std".into(), real(0.0, false, INF, true)),
    ];
    for model in ["mlp", "gcn"] {
        r.extend([
            (format!("{model}.hidden_dim"), Rule::Int(1)),
            (format!("{model}.layers"), Rule::Int(1)),
            (format!("{model}.dropout"), real(0.0, false, 1.0, true)),
            (format!("{model}.learning_rate"), real(0.0, true, INF, true)),
            (format!("{model}.weight_decay"), real(0.0, false, INF, true)),
            (format!("{model}.epochs"), Rule::Int(1)),
            (format!("{model}.beta1"), real(0.0, false, 1.0, true)),
            (format!("{model}.beta2"), real(0.0, false, 1.0, true)),
            (format!("{model}.eps"), real(0.0, true, INF, true)),
            (format!("{model}.eval_every"), Rule::Int(0)),
        ]);
    }
    r
}

fn lookup<'a>(v: &'a Value, dotted: &str) -> Option<&'a Value> {
    dotted.split('.').try_fold(v, |cur, k| cur.get(k))
}

fn validate_value(v: &Value) -> Vec<Violation> {
    let rules = rules();
    let mut out = Vec::new();
    // Unknown keys, one level of nesting.
    let defaults = serde_json::to_value(PipelineConfig::default()).expect("defaults serialize");
    if let (Some(obj), Some(def)) = (v.as_object(), defaults.as_object()) {
        for (k, val) in obj {
            match def.get(k) {
                None => out.push(Violation { field: k.clone(), rule: "unknown field".into() }),
                Some(d) if d.is_object() => match val.as_object() {
                    Some(inner) => {
                        for ik in inner.keys().filter(|ik| d.get(ik.as_str()).is_none()) {
                            out.push(Violation { field: format!("{k}.{ik}"), rule: "unknown field".into() });
                        }
                    }
                    None => out.push(Violation { field: k.clone(), rule: "must be an object".into() }),
                },
                Some(_) => {}
            }
        }
    }
    for (field, rule) in &rules {
        match lookup(v, field) {
            Some(x) if rule.holds(x) => {}
            _ => out.push(Violation { rule: rule.describe(field), field: field.clone() }),
        }
    }
    let n_scam = lookup(v, "synth.n_scam").and_then(Value::as_u64);
    let n_contract = lookup(v, "synth.n_contract").and_then(Value::as_u64);
    if let (Some(s), Some(c)) = (n_scam, n_contract) {
        if s >= c {
            out.push(Violation { field: "synth.n_scam".into(), rule: "n_scam < n_contract".into() });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Ingest,
    Featurize,
    Contractize,
    Resample,
    TrainMlp,
    TrainGcn,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Featurize => "featurize",
            Stage::Contractize => "contractize",
            Stage::Resample => "resample",
            Stage::TrainMlp => "train-mlp",
            Stage::TrainGcn => "train-gcn",
            Stage::Evaluate => "evaluate",
        }
    }

    pub fn manifest_file(self) -> String {
        format!("{}.manifest.json", self.name())
    }
}

/// Provenance record written beside each stage's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_order_version: Option<String>,
    /// Input path (data files) or artifact name → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output artifact name → sha256.
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub stats: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Resampled rows in the contract-dataset layout plus per-row provenance.
/// Synthetic rows have a null contract address.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampledFile {
    pub scope: ResampleScope,
    pub contracts: Vec<Option<Address>>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub provenance: Vec<Provenance>,
    /// `true` for rows held out for testing (pre-split scope only).
    pub test: Vec<bool>,
    pub edges: Vec<Value>,
    pub feature_order_version: String,
    pub norm_stats: Option<Vec<NormStat>>,
    pub report: ResampleReport,
}

impl ResampledFile {
    fn rows(&self, test: bool) -> (Matrix, Vec<u8>) {
        let idx: Vec<usize> = (0..self.labels.len()).filter(|&i| self.test[i] == test).collect();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| self.features[i].clone()).collect();
        let cols = self.features.first().map_or(0, Vec::len);
        let m = if rows.is_empty() { Matrix::zeros(0, cols) } else { Matrix::from_rows(&rows) };
        (m, idx.iter().map(|&i| self.labels[i]).collect())
    }

    fn meta(&self) -> FeatureMeta {
        FeatureMeta { norm_stats: self.norm_stats.clone(), feature_order_version: self.feature_order_version.clone() }
    }
}

/// Train/test partition of the contract dataset, in dataset row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    Gcn,
}

impl ModelKind {
    pub fn file_name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "model_mlp.json",
            ModelKind::Gcn => "model_gcn.json",
        }
    }

    fn stage(self) -> Stage {
        match self {
            ModelKind::Mlp => Stage::TrainMlp,
            ModelKind::Gcn => Stage::TrainGcn,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "gcn" => Ok(ModelKind::Gcn),
            _ => Err(format!("unknown model {s:?} (expected mlp or gcn)")),
        }
    }
}

/// A configuration bound to an output directory.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub out: PathBuf,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(PipelineError::MissingFile(path.to_path_buf()));
    }
    fs::read(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn utf8(path: &Path, bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| PipelineError::data(path, e))
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

impl Pipeline {
    pub fn new(config: PipelineConfig, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, out: out.into() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<String> {
        fs::create_dir_all(&self.out).map_err(|source| PipelineError::Io { path: self.out.clone(), source })?;
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|source| PipelineError::Io { path, source })?;
        Ok(sha256_hex(bytes))
    }

    fn write_manifest(
        &self,
        stage: Stage,
        inputs: BTreeMap<String, String>,
        outputs: BTreeMap<String, String>,
        feature_order_version: Option<String>,
        stats: Value,
    ) -> Result<()> {
        let m = Manifest {
            stage: stage.name().to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: self.config.stage_hash(stage),
            seed: self.config.seed,
            feature_order_version,
            inputs,
            outputs,
            stats,
        };
        let text = with_newline(serde_json::to_string_pretty(&m).expect("manifest serializes"));
        self.write(&stage.manifest_file(), text.as_bytes())?;
        Ok(())
    }

    pub fn manifest(&self, stage: Stage) -> Result<Manifest> {
        let path = self.path(&stage.manifest_file());
        if !path.exists() {
            return Err(PipelineError::Stale {
                artifact: path,
                message: format!("no manifest; run the `{}` stage first", stage.name()),
            });
        }
        let text = utf8(&path, read_bytes(&path)?)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::data(&path, e))
    }

    /// Reads an artifact of `stage`, checking that the stage ran under the
    /// current configuration and that the file is the one it wrote.
    fn upstream(&self, stage: Stage, name: &str) -> Result<(Vec<u8>, String)> {
        let m = self.manifest(stage)?;
        let path = self.path(name);
        let stale = |message: String| PipelineError::Stale { artifact: path.clone(), message };
        if m.config_hash != self.config.stage_hash(stage) {
            return Err(stale(format!(
                "produced by `{}` under a different configuration; rerun that stage",
                stage.name()
            )));
        }
        let bytes = read_bytes(&path)?;
        let hash = sha256_hex(&bytes);
        if m.outputs.get(name) != Some(&hash) {
            return Err(stale(format!("contents differ from the `{}` manifest", stage.name())));
        }
        // The producer's own artifact inputs must still be current.
        for (input, recorded) in &m.inputs {
            let p = self.path(input);
            if !input.contains('/') && p.exists() && sha256_hex(&read_bytes(&p)?) != *recorded {
                return Err(stale(format!("`{}` was built from an older {input}", stage.name())));
            }
        }
        Ok((bytes, hash))
    }

    pub fn synth(&self) -> Result<()> {
        let cfg = self.config.synth_config();
        let world = generate(&cfg).map_err(|e| match e {
            SynthError::Config(m) => PipelineError::Usage(m),
            e => PipelineError::Usage(e.to_string()),
        })?;
        let d = &self.config.data;
        let mut outputs = BTreeMap::new();
        let mut put =
            |path: &Path, write: &dyn Fn(&mut Vec<u8>) -> std::result::Result<(), IngestError>| -> Result<()> {
                let mut buf = Vec::new();
                write(&mut buf).map_err(|e| PipelineError::Usage(e.to_string()))?;
                if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })?;
                }
                fs::write(path, &buf).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
                outputs.insert(path.display().to_string(), sha256_hex(&buf));
                Ok(())
            };
        put(&d.transactions, &|b| crate::ingest::write_transactions(&world.transactions, b))?;
        put(&d.kinds, &|b| crate::ingest::write_kinds(&world.kinds, b))?;
        put(&d.labels, &|b| crate::ingest::write_labels(&world.labels, b))?;
        let stats = json!({
            "transactions": world.transactions.len(),
            "labeled_contracts": world.labels.len(),
            "scams": world.labels.values().filter(|&&l| l == 1).count(),
            "synth_seed": cfg.seed,
        });
        self.write_manifest(Stage::Synth, BTreeMap::new(), outputs, None, stats)
    }

    pub fn ingest(&self) -> Result<TxGraph> {
        let d = &self.config.data;
        let tx_bytes = read_bytes(&d.transactions)?;
        let kind_bytes = read_bytes(&d.kinds)?;
        let label_bytes = read_bytes(&d.labels)?;
        let records = parse_transactions(tx_bytes.as_slice()).map_err(|e| PipelineError::ingest(&d.transactions, e))?;
        let mut kinds = load_kinds(kind_bytes.as_slice()).map_err(|e| PipelineError::ingest(&d.kinds, e))?;
        let labels = load_labels(label_bytes.as_slice()).map_err(|e| PipelineError::ingest(&d.labels, e))?;
        // Labeled addresses are contracts even when the kinds file omits them.
        let mut promoted = 0usize;
        for a in labels.keys() {
            if !kinds.contains_key(a) {
                kinds.insert(*a, NodeKind::Contract);
                promoted += 1;
            }
        }
        let raw = build_graph(&records, &kinds);
        let g = prune_low_degree(&raw, self.config.prune.min_total_degree);
        if g.is_empty() {
            return Err(PipelineError::data(&d.transactions, "graph is empty after pruning"));
        }
        let stats = json!({
            "records": records.len(),
            "raw_nodes": raw.node_count(),
            "raw_edges": raw.edge_count(),
            "nodes": g.node_count(),
            "edges": g.edge_count(),
            "contracts": g.contracts().count(),
            "promoted_labeled_addresses": promoted,
        });
        let hash = self.write(GRAPH_FILE, with_newline(g.to_json()).as_bytes())?;
        let inputs = BTreeMap::from([
            (d.transactions.display().to_string(), sha256_hex(&tx_bytes)),
            (d.kinds.display().to_string(), sha256_hex(&kind_bytes)),
            (d.labels.display().to_string(), sha256_hex(&label_bytes)),
        ]);
        self.write_manifest(Stage::Ingest, inputs, BTreeMap::from([(GRAPH_FILE.to_string(), hash)]), None, stats)?;
        log::info!("ingest: {} nodes, {} edges after pruning", g.node_count(), g.edge_count());
        Ok(g)
    }

    fn load_graph(&self) -> Result<(TxGraph, String)> {
        let (bytes, hash) = self.upstream(Stage::Ingest, GRAPH_FILE)?;
        let path = self.path(GRAPH_FILE);
        let g = TxGraph::from_json(&utf8(&path, bytes)?).map_err(|e| PipelineError::ingest(&path, e))?;
        Ok((g, hash))
    }

    pub fn featurize(&self) -> Result<FeatureMatrix> {
        let (g, graph_hash) = self.load_graph()?;
        let topo_err = |e: TopoError| PipelineError::data(&self.path(GRAPH_FILE), e);
        let raw = Topology::new(&g).assemble(&self.config.pagerank, &self.config.hits).map_err(topo_err)?;
        if !raw.rows.is_finite() {
            return Err(PipelineError::Numeric("non-finite node feature".into()));
        }
        let m = fit_normalize(&raw).map_err(topo_err)?;
        let mut csv = Vec::new();
        m.write_csv(&mut csv).map_err(topo_err)?;
        let meta = with_newline(serde_json::to_string_pretty(&m.sidecar()).expect("sidecar serializes"));
        let outputs = BTreeMap::from([
            (FEATURES_FILE.to_string(), self.write(FEATURES_FILE, &csv)?),
            (FEATURES_META_FILE.to_string(), self.write(FEATURES_META_FILE, meta.as_bytes())?),
        ]);
        let stats = json!({ "rows": m.len() });
        self.write_manifest(
            Stage::Featurize,
            BTreeMap::from([(GRAPH_FILE.to_string(), graph_hash)]),
            outputs,
            Some(m.feature_order_version.clone()),
            stats,
        )?;
        Ok(m)
    }

    fn load_features(&self) -> Result<(FeatureMatrix, BTreeMap<String, String>)> {
        let (csv, csv_hash) = self.upstream(Stage::Featurize, FEATURES_FILE)?;
        let (meta, meta_hash) = self.upstream(Stage::Featurize, FEATURES_META_FILE)?;
        let meta_path = self.path(FEATURES_META_FILE);
        let sidecar: FeatureSidecar = serde_json::from_slice(&meta).map_err(|e| PipelineError::data(&meta_path, e))?;
        let m = FeatureMatrix::read_csv(csv.as_slice(), &sidecar)
            .map_err(|e| PipelineError::data(&self.path(FEATURES_FILE), e))?;
        let hashes =
            BTreeMap::from([(FEATURES_FILE.to_string(), csv_hash), (FEATURES_META_FILE.to_string(), meta_hash)]);
        Ok((m, hashes))
    }

    pub fn contractize(&self) -> Result<ContractDataset> {
        let (g, graph_hash) = self.load_graph()?;
        let (m, mut inputs) = self.load_features()?;
        let labels_path = &self.config.data.labels;
        let label_bytes = read_bytes(labels_path)?;
        let labels = load_labels(label_bytes.as_slice()).map_err(|e| PipelineError::ingest(labels_path, e))?;
        let ds = build_contract_dataset(&g, &m, &labels).map_err(|e| match e {
            ContractError::LabelOnEoa(_) => PipelineError::data(labels_path, e),
            e => PipelineError::data(&self.path(GRAPH_FILE), e),
        })?;
        let labeled = ds.labeled_indices();
        let positives = labeled.iter().filter(|&&i| ds.labels[i] == Some(1)).count();
        let stats = json!({
            "contracts": ds.len(),
            "labeled": labeled.len(),
            "positives": positives,
            "labels_dropped_by_pruning": labels.keys().filter(|a| !g.contains(a)).count(),
            "edges": ds.edges.len(),
        });
        let hash = self.write(CONTRACTS_FILE, with_newline(ds.to_json()).as_bytes())?;
        inputs.insert(GRAPH_FILE.to_string(), graph_hash);
        inputs.insert(labels_path.display().to_string(), sha256_hex(&label_bytes));
        self.write_manifest(
            Stage::Contractize,
            inputs,
            BTreeMap::from([(CONTRACTS_FILE.to_string(), hash)]),
            Some(ds.feature_order_version.clone()),
            stats,
        )?;
        Ok(ds)
    }

    fn load_contracts(&self) -> Result<(ContractDataset, String)> {
        let (bytes, hash) = self.upstream(Stage::Contractize, CONTRACTS_FILE)?;
        let path = self.path(CONTRACTS_FILE);
        let ds = ContractDataset::from_json(&utf8(&path, bytes)?).map_err(|e| PipelineError::data(&path, e))?;
        Ok((ds, hash))
    }

    pub fn resample(&self) -> Result<(SplitFile, ResampledFile)> {
        let (ds, contracts_hash) = self.load_contracts()?;
        let cpath = self.path(CONTRACTS_FILE);
        let seeds = self.config.seeds();
        let rc = &self.config.resample;
        let labeled = ds.labeled_indices();
        let labels: Vec<u8> = labeled.iter().map(|&i| ds.labels[i].expect("labeled")).collect();
        let eval_err = |e: EvalError| PipelineError::data(&cpath, e);
        let bal_err = |e: BalanceError| PipelineError::data(&cpath, e);
        let part = stratified_split(&labels, self.config.split.test_fraction, seeds.split).map_err(eval_err)?;
        let split = SplitFile {
            seed: seeds.split,
            train: part.train.iter().map(|&p| labeled[p]).collect(),
            test: part.test.iter().map(|&p| labeled[p]).collect(),
        };
        let smote = SmoteParams { k: rc.smote_k, target_ratio: rc.target_ratio, seed: seeds.smote };
        let pool: &[usize] = match rc.scope {
            ResampleScope::TrainOnly => &split.train,
            ResampleScope::PreSplit => &labeled,
        };
        let pool_labels: Vec<u8> = pool.iter().map(|&i| ds.labels[i].expect("labeled")).collect();
        let samples = LabeledSamples::new(ds.features.select_rows(pool), pool_labels).map_err(bal_err)?;
        let (res, report) = smote_enn(&samples, &smote, rc.enn_k).map_err(bal_err)?;
        let test = match rc.scope {
            ResampleScope::TrainOnly => vec![false; res.len()],
            ResampleScope::PreSplit => {
                let s =
                    stratified_split(&res.labels, self.config.split.test_fraction, seeds.split).map_err(eval_err)?;
                let mut t = vec![false; res.len()];
                for i in s.test {
                    t[i] = true;
                }
                t
            }
        };
        let file = ResampledFile {
            scope: rc.scope,
            contracts: res.source.iter().map(|s| s.map(|p| ds.contracts[pool[p]])).collect(),
            features: (0..res.len()).map(|r| res.features.row(r).to_vec()).collect(),
            labels: res.labels.clone(),
            provenance: res.provenance.clone(),
            test,
            edges: Vec::new(),
            feature_order_version: ds.feature_order_version.clone(),
            norm_stats: ds.norm_stats.clone(),
            report,
        };
        let split_text = with_newline(serde_json::to_string_pretty(&split).expect("split serializes"));
        let res_text = with_newline(serde_json::to_string_pretty(&file).expect("resampled serializes"));
        let outputs = BTreeMap::from([
            (SPLIT_FILE.to_string(), self.write(SPLIT_FILE, split_text.as_bytes())?),
            (RESAMPLED_FILE.to_string(), self.write(RESAMPLED_FILE, res_text.as_bytes())?),
        ]);
        let stats = json!({
            "train": split.train.len(),
            "test": split.test.len(),
            "resampled_rows": file.labels.len(),
            "report": report,
        });
        self.write_manifest(
            Stage::Resample,
            BTreeMap::from([(CONTRACTS_FILE.to_string(), contracts_hash)]),
            outputs,
            Some(file.feature_order_version.clone()),
            stats,
        )?;
        Ok((split, file))
    }

    fn load_resampled(&self) -> Result<(SplitFile, ResampledFile, BTreeMap<String, String>)> {
        let (sb, sh) = self.upstream(Stage::Resample, SPLIT_FILE)?;
        let (rb, rh) = self.upstream(Stage::Resample, RESAMPLED_FILE)?;
        let split: SplitFile =
            serde_json::from_slice(&sb).map_err(|e| PipelineError::data(&self.path(SPLIT_FILE), e))?;
        let res: ResampledFile =
            serde_json::from_slice(&rb).map_err(|e| PipelineError::data(&self.path(RESAMPLED_FILE), e))?;
        let n = res.labels.len();
        if res.features.len() != n || res.provenance.len() != n || res.test.len() != n || res.contracts.len() != n {
            return Err(PipelineError::data(&self.path(RESAMPLED_FILE), "per-row arrays differ in length"));
        }
        Ok((split, res, BTreeMap::from([(SPLIT_FILE.to_string(), sh), (RESAMPLED_FILE.to_string(), rh)])))
    }

    pub fn train(&self, kind: ModelKind) -> Result<ModelBundle> {
        let (ds, contracts_hash) = self.load_contracts()?;
        let (split, res, mut inputs) = self.load_resampled()?;
        inputs.insert(CONTRACTS_FILE.to_string(), contracts_hash);
        let seeds = self.config.seeds();
        let rpath = self.path(RESAMPLED_FILE);
        let bundle = match kind {
            ModelKind::Mlp => {
                let (x, y) = res.rows(false);
                let samples = LabeledSamples::new(x, y).map_err(|e| PipelineError::data(&rpath, e))?;
                let (hx, hy) = match res.scope {
                    ResampleScope::TrainOnly => (ds.features.select_rows(&split.test), test_labels(&ds, &split)),
                    ResampleScope::PreSplit => res.rows(true),
                };
                let heldout = (!hy.is_empty()).then_some((&hx, hy.as_slice()));
                let cfg = self.config.mlp.train_config(seeds.mlp);
                train_mlp(&samples, &cfg, &res.meta(), heldout).map_err(|e| PipelineError::nn(&rpath, e))?
            }
            ModelKind::Gcn => {
                let cfg = self.config.gcn.train_config(seeds.gcn);
                train_gcn(&ds, &split.train, &self.config.sampler_params(), &cfg, Some(&split.test))
                    .map_err(|e| PipelineError::nn(&self.path(CONTRACTS_FILE), e))?
            }
        };
        let name = kind.file_name();
        let hash = self.write(name, with_newline(bundle.to_json()).as_bytes())?;
        let stats = json!({
            "epochs": bundle.history.loss.len(),
            "final_loss": bundle.history.loss.last(),
        });
        self.write_manifest(
            kind.stage(),
            inputs,
            BTreeMap::from([(name.to_string(), hash)]),
            Some(bundle.feature_order_version.clone()),
            stats,
        )?;
        Ok(bundle)
    }

    fn load_model(&self, kind: ModelKind) -> Result<Option<ModelBundle>> {
        if !self.path(&kind.stage().manifest_file()).exists() {
            return Ok(None);
        }
        let (bytes, _) = self.upstream(kind.stage(), kind.file_name())?;
        let path = self.path(kind.file_name());
        let bundle = ModelBundle::from_json(&utf8(&path, bytes)?).map_err(|e| PipelineError::nn(&path, e))?;
        Ok(Some(bundle))
    }

    /// Scores every trained model on the held-out rows and writes the report.
    pub fn evaluate(&self) -> Result<Report> {
        let (ds, contracts_hash) = self.load_contracts()?;
        let (split, res, mut inputs) = self.load_resampled()?;
        inputs.insert(CONTRACTS_FILE.to_string(), contracts_hash);
        let threshold = self.config.threshold;
        let mut models = Vec::new();
        for kind in [ModelKind::Mlp, ModelKind::Gcn] {
            let Some(bundle) = self.load_model(kind)? else { continue };
            let mpath = self.path(kind.file_name());
            inputs.insert(kind.file_name().to_string(), sha256_hex(bundle.to_json().as_bytes()));
            let (probs, labels) = match (&bundle.params, res.scope) {
                (ModelParams::Mlp(_), ResampleScope::PreSplit) => {
                    let (x, y) = res.rows(true);
                    (predict_rows(&bundle, &res.meta(), &x).map_err(|e| PipelineError::nn(&mpath, e))?, y)
                }
                (ModelParams::Mlp(_), ResampleScope::TrainOnly) => {
                    let x = ds.features.select_rows(&split.test);
                    let meta = FeatureMeta::of(&ds);
                    (
                        predict_rows(&bundle, &meta, &x).map_err(|e| PipelineError::nn(&mpath, e))?,
                        test_labels(&ds, &split),
                    )
                }
                (ModelParams::Gcn(_), _) => {
                    let all = predict(&bundle, &ds).map_err(|e| PipelineError::nn(&mpath, e))?;
                    (split.test.iter().map(|&i| all[i]).collect(), test_labels(&ds, &split))
                }
            };
            if probs.iter().any(|p| !p.is_finite()) {
                return Err(PipelineError::Numeric(format!("{} produced non-finite probabilities", kind.file_name())));
            }
            let report = ModelReport::evaluate(&bundle, &probs, &labels, threshold).map_err(|e| match e {
                EvalError::Threshold(_) => PipelineError::Usage(e.to_string()),
                e => PipelineError::data(&mpath, e),
            })?;
            models.push(report);
        }
        if models.is_empty() {
            return Err(PipelineError::Usage("no trained model found; run `train mlp` or `train gcn` first".into()));
        }
        let dataset = json!({
            "ingest": self.manifest(Stage::Ingest)?.stats,
            "contractize": self.manifest(Stage::Contractize)?.stats,
            "resample": self.manifest(Stage::Resample)?.stats,
        });
        let config = json!({ "pipeline": self.config, "seeds": self.config.seeds(), "tool_version": TOOL_VERSION });
        let report = emit_report(models, threshold, config, dataset);
        let outputs = BTreeMap::from([
            (REPORT_FILE.to_string(), self.write(REPORT_FILE, report.to_json().as_bytes())?),
            (METRICS_FILE.to_string(), self.write(METRICS_FILE, report.metrics_csv().as_bytes())?),
        ]);
        self.write_manifest(Stage::Evaluate, inputs, outputs, None, Value::Null)?;
        Ok(report)
    }

    /// Scores contracts of `input` (default: this run's `contracts.json`)
    /// with the bundle at `model`, writing `address,probability,label`.
    pub fn predict(&self, model: &Path, input: Option<&Path>) -> Result<PathBuf> {
        let text = utf8(model, read_bytes(model)?)?;
        let bundle = ModelBundle::from_json(&text).map_err(|e| PipelineError::nn(model, e))?;
        let input = input.map(Path::to_path_buf).unwrap_or_else(|| self.path(CONTRACTS_FILE));
        let ds = ContractDataset::from_json(&utf8(&input, read_bytes(&input)?)?)
            .map_err(|e| PipelineError::data(&input, e))?;
        let probs = predict(&bundle, &ds).map_err(|e| PipelineError::nn(&input, e))?;
        let mut out = String::from("address,probability,label\n");
        for (a, p) in ds.contracts.iter().zip(&probs) {
            out.push_str(&format!("{a},{p},{}\n", u8::from(*p >= self.config.threshold)));
        }
        self.write(PREDICTIONS_FILE, out.as_bytes())?;
        Ok(self.path(PREDICTIONS_FILE))
    }

    /// Every stage from ingest through evaluation, training both models.
    pub fn run_all(&self) -> Result<Report> {
        self.ingest()?;
        self.featurize()?;
        self.contractize()?;
        self.resample()?;
        self.train(ModelKind::Mlp)?;
        self.train(ModelKind::Gcn)?;
        self.evaluate()
    }
}

fn test_labels(ds: &ContractDataset, split: &SplitFile) -> Vec<u8> {
    split.test.iter().map(|&i| ds.labels[i].unwrap_or(0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(validate_config("{}").is_empty());
        assert!(PipelineConfig::default().validate().is_ok());
    }

    #[test]
    fn dropout_of_one_is_rejected() {
        let v = validate_config(r#"{"mlp": {"dropout": 1.0}}"#);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "mlp.dropout");
        assert_eq!(v[0].rule, "dropout ∈ [0,1)");
    }

    #[test]
    fn negative_epochs_are_rejected() {
        let v = validate_config(r#"{"gcn": {"epochs": -5}}"#);
        assert_eq!(v, vec![Violation { field: "gcn.epochs".into(), rule: "epochs must be an integer >= 1".into() }]);
    }

    #[test]
    fn unparseable_document_is_one_violation() {
        let v = validate_config("{not json");
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "<document>");
    }

    #[test]
    fn unknown_fields_are_reported() {
        let v = validate_config(r#"{"mlp": {"dropuot": 0.1}, "extra": 1}"#);
        let fields: Vec<&str> = v.iter().map(|x| x.field.as_str()).collect();
        assert_eq!(fields, ["extra", "mlp.dropuot"]);
    }

    #[test]
    fn partial_document_overrides_defaults() {
        let c = PipelineConfig::from_json_str(r#"{"seed": 7, "resample": {"scope": "pre-split"}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.resample.scope, ResampleScope::PreSplit);
        assert_eq!(c.resample.smote_k, 5);
        assert_eq!(c.mlp.epochs, 5000);
    }

    #[test]
    fn stage_hash_tracks_relevant_sections() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { threshold: 0.7, ..a.clone() };
        assert_eq!(a.stage_hash(Stage::TrainMlp), b.stage_hash(Stage::TrainMlp));
        assert_ne!(a.stage_hash(Stage::Evaluate), b.stage_hash(Stage::Evaluate));
        let c = PipelineConfig { seed: 1, ..a.clone() };
        assert_eq!(a.stage_hash(Stage::Featurize), c.stage_hash(Stage::Featurize));
        assert_ne!(a.stage_hash(Stage::Resample), c.stage_hash(Stage::Resample));
    }

    #[test]
    fn seeds_differ_per_stage() {
        let s = PipelineConfig::default().seeds();
        let all = [s.synth, s.split, s.smote, s.mlp, s.gcn, s.sampler];
        let set: std::collections::BTreeSet<u64> = all.iter().copied().collect();
        assert_eq!(set.len(), all.len());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::MissingFile("x".into()).exit_code(), 1);
        assert_eq!(PipelineError::Data { path: "x".into(), line: Some(3), message: "m".into() }.exit_code(), 2);
        assert_eq!(PipelineError::Numeric("nan".into()).exit_code(), 3);
        let e = PipelineError::Data { path: "t.csv".into(), line: Some(3), message: "bad".into() };
        assert_eq!(e.to_string(), "t.csv:3: bad");
    }
}
