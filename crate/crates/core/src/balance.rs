//! Class-imbalance handling: SMOTE oversampling, ENN cleaning and
//! minority-centered ego-subgraph sampling for GCN training.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contractize::ContractDataset;
use crate::matrix::{sq_dist, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("cannot oversample: minority class has {0} rows, need at least 2")]
    CannotOversample(usize),
    #[error("ENN needs more rows than neighbors (rows {rows}, k {k})")]
    TooFewRows { rows: usize, k: usize },
    #[error("ENN removed every row")]
    Degenerate,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("sampling needs both classes among the candidates (negatives {negatives}, positives {positives})")]
    MissingClass { negatives: usize, positives: usize },
    #[error("center {0} is out of range")]
    BadCenter(usize),
    #[error("inconsistent samples: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    Original,
    Synthetic,
}

/// Feature rows with binary labels. `source[i]` is the row's index in the
/// data it was first built from (`None` for synthetic rows).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSamples {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub provenance: Vec<Provenance>,
    pub source: Vec<Option<usize>>,
}

impl LabeledSamples {
    pub fn new(features: Matrix, labels: Vec<u8>) -> Result<Self, BalanceError> {
        if features.rows() != labels.len() {
            return Err(BalanceError::Shape(format!("{} feature rows vs {} labels", features.rows(), labels.len())));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(BalanceError::Shape("labels must be 0 or 1".into()));
        }
        let n = labels.len();
        Ok(Self { features, labels, provenance: vec![Provenance::Original; n], source: (0..n).map(Some).collect() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(negatives, positives)`
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.len() - pos, pos)
    }

    fn keep(&self, keep: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            provenance: keep.iter().map(|&i| self.provenance[i]).collect(),
            source: keep.iter().map(|&i| self.source[i]).collect(),
        }
    }
}

/// Indices of the `k` rows nearest to row `i` among `candidates`
/// (excluding `i`), ordered by distance then by index.
pub fn nearest_neighbors(features: &Matrix, i: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let x = features.row(i);
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for &j in candidates {
        if j == i {
            continue;
        }
        let d = sq_dist(x, features.row(j));
        if best.len() == k {
            let (wd, wj) = best[k - 1];
            if d > wd || (d == wd && j > wj) {
                continue;
            }
        }
        let pos = best.partition_point(|&(bd, bj)| bd < d || (bd == d && bj < j));
        best.insert(pos, (d, j));
        best.truncate(k);
    }
    best.into_iter().map(|(_, j)| j).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteParams {
    pub k: usize,
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self { k: 5, target_ratio: 1.0, seed: 0 }
    }
}

/// Number of synthetic rows needed to bring `minority` up to
/// `target_ratio · majority`.
pub fn smote_deficit(majority: usize, minority: usize, target_ratio: f64) -> usize {
    let need = (target_ratio * majority as f64 - minority as f64).ceil();
    if need > 0.0 {
        need as usize
    } else {
        0
    }
}

/// Appends synthetic minority rows `x + λ(x_nn − x)`. Seed rows are taken
/// round-robin over the minority rows; `x_nn` is uniform among the seed's
/// `k` nearest minority neighbors and `λ ~ U[0, 1)`.
pub fn smote(s: &LabeledSamples, params: &SmoteParams) -> Result<LabeledSamples, BalanceError> {
    if params.k == 0 {
        return Err(BalanceError::ZeroK);
    }
    let (neg, pos) = s.class_counts();
    let (minority_label, minority_count, majority_count) = if pos <= neg { (1u8, pos, neg) } else { (0u8, neg, pos) };
    let needed = smote_deficit(majority_count, minority_count, params.target_ratio);
    if needed == 0 {
        return Ok(s.clone());
    }
    if minority_count < 2 {
        return Err(BalanceError::CannotOversample(minority_count));
    }
    let minority: Vec<usize> = (0..s.len()).filter(|&i| s.labels[i] == minority_label).collect();
    let k = params.k.min(minority_count - 1);
    let neighbors: Vec<Vec<usize>> =
        minority.par_iter().map(|&i| nearest_neighbors(&s.features, i, &minority, k)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let dim = s.features.cols();
    let mut data = s.features.data().to_vec();
    data.reserve(needed * dim);
    for n in 0..needed {
        let slot = n % minority.len();
        let x = s.features.row(minority[slot]);
        let nn = neighbors[slot][rng.gen_range(0..k)];
        let y = s.features.row(nn);
        let lambda: f64 = rng.gen();
        data.extend(x.iter().zip(y).map(|(a, b)| a + lambda * (b - a)));
    }
    let mut out = s.clone();
    out.features = Matrix::from_vec(s.len() + needed, dim, data);
    out.labels.extend(std::iter::repeat_n(minority_label, needed));
    out.provenance.extend(std::iter::repeat_n(Provenance::Synthetic, needed));
    out.source.extend(std::iter::repeat_n(None, needed));
    Ok(out)
}

/// Rows whose `k` nearest neighbors vote (strict majority) for the other
/// label. All decisions are made against the unmodified input.
pub fn enn_marks(s: &LabeledSamples, k: usize) -> Result<Vec<bool>, BalanceError> {
    if k == 0 {
        return Err(BalanceError::ZeroK);
    }
    if s.len() <= k {
        return Err(BalanceError::TooFewRows { rows: s.len(), k });
    }
    let all: Vec<usize> = (0..s.len()).collect();
    Ok((0..s.len())
        .into_par_iter()
        .map(|i| {
            let nn = nearest_neighbors(&s.features, i, &all, k);
            let ones = nn.iter().filter(|&&j| s.labels[j] == 1).count();
            let zeros = nn.len() - ones;
            let vote = match ones.cmp(&zeros) {
                std::cmp::Ordering::Greater => Some(1u8),
                std::cmp::Ordering::Less => Some(0u8),
                std::cmp::Ordering::Equal => None,
            };
            matches!(vote, Some(v) if v != s.labels[i])
        })
        .collect())
}

/// Edited nearest neighbors over both classes, removing every marked row at once.
pub fn enn(s: &LabeledSamples, k: usize) -> Result<LabeledSamples, BalanceError> {
    let marks = enn_marks(s, k)?;
    let keep: Vec<usize> = (0..s.len()).filter(|&i| !marks[i]).collect();
    if keep.is_empty() {
        return Err(BalanceError::Degenerate);
    }
    Ok(s.keep(&keep))
}

/// Class counts `(negatives, positives)` around each resampling step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub before: (usize, usize),
    pub after_smote: (usize, usize),
    pub after_enn: (usize, usize),
}

pub fn smote_enn(
    s: &LabeledSamples,
    smote_params: &SmoteParams,
    k_enn: usize,
) -> Result<(LabeledSamples, ResampleReport), BalanceError> {
    let before = s.class_counts();
    let over = smote(s, smote_params)?;
    let after_smote = over.class_counts();
    let cleaned = enn(&over, k_enn)?;
    let report = ResampleReport { before, after_smote, after_enn: cleaned.class_counts() };
    log::info!("smote-enn class counts (neg, pos): {:?} -> {:?} -> {:?}", before, after_smote, report.after_enn);
    Ok((cleaned, report))
}

/// Induced subgraph around `center` on the undirected contract graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EgoBatch {
    pub center: usize,
    /// Sorted; contains `center`.
    pub node_indices: Vec<usize>,
    /// Induced undirected edges `(a, b)`, `a < b`, in dataset indices.
    pub adjacency: Vec<(usize, usize)>,
    pub center_label: Option<u8>,
}

fn ego_from_adjacency(adj: &[Vec<usize>], labels: &[Option<u8>], center: usize, radius: usize) -> EgoBatch {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([center]);
    dist[center] = 0;
    let mut members = BTreeSet::from([center]);
    while let Some(u) = queue.pop_front() {
        if dist[u] == radius {
            continue;
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                members.insert(v);
                queue.push_back(v);
            }
        }
    }
    let mut adjacency = Vec::new();
    for &u in &members {
        for &v in &adj[u] {
            if u < v && members.contains(&v) {
                adjacency.push((u, v));
            }
        }
    }
    EgoBatch { center, node_indices: members.into_iter().collect(), adjacency, center_label: labels[center] }
}

pub fn ego_subgraph(ds: &ContractDataset, center: usize, radius: usize) -> Result<EgoBatch, BalanceError> {
    if center >= ds.len() {
        return Err(BalanceError::BadCenter(center));
    }
    Ok(ego_from_adjacency(&ds.adjacency(), &ds.labels, center, radius))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub batch_size: usize,
    pub minority_fraction: f64,
    pub radius: usize,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self { batch_size: 32, minority_fraction: 0.5, radius: 2, seed: 0 }
    }
}

/// Endless stream of ego-subgraph batches. Each batch has
/// `⌈minority_fraction · batch_size⌉` minority-centered subgraphs, centers
/// drawn uniformly with replacement within each class.
pub struct BatchSampler {
    adj: Vec<Vec<usize>>,
    labels: Vec<Option<u8>>,
    minority: Vec<usize>,
    majority: Vec<usize>,
    params: SamplerParams,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    /// `candidates` are the dataset indices eligible as centers; each must be labeled.
    pub fn new(ds: &ContractDataset, candidates: &[usize], params: SamplerParams) -> Result<Self, BalanceError> {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for &i in candidates {
            match ds.labels.get(i) {
                Some(Some(1)) => pos.push(i),
                Some(Some(0)) => neg.push(i),
                _ => return Err(BalanceError::BadCenter(i)),
            }
        }
        pos.sort_unstable();
        neg.sort_unstable();
        if pos.is_empty() || neg.is_empty() {
            return Err(BalanceError::MissingClass { negatives: neg.len(), positives: pos.len() });
        }
        let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
        Ok(Self {
            adj: ds.adjacency(),
            labels: ds.labels.clone(),
            minority,
            majority,
            params,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        })
    }

    pub fn minority_per_batch(&self) -> usize {
        ((self.params.minority_fraction * self.params.batch_size as f64).ceil() as usize).min(self.params.batch_size)
    }

    /// Centers of the next batch, minority first.
    pub fn next_centers(&mut self) -> Vec<usize> {
        let m = self.minority_per_batch();
        let mut centers = Vec::with_capacity(self.params.batch_size);
        for _ in 0..m {
            centers.push(self.minority[self.rng.gen_range(0..self.minority.len())]);
        }
        for _ in m..self.params.batch_size {
            centers.push(self.majority[self.rng.gen_range(0..self.majority.len())]);
        }
        centers
    }

    pub fn is_minority(&self, i: usize) -> bool {
        self.minority.binary_search(&i).is_ok()
    }
}

impl Iterator for BatchSampler {
    type Item = Vec<EgoBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        let centers = self.next_centers();
        Some(centers.into_iter().map(|c| ego_from_adjacency(&self.adj, &self.labels, c, self.params.radius)).collect())
    }
}
