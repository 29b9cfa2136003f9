//! Contract-level dataset: EOA-neighborhood feature aggregation and the
//! undirected shared-EOA contract graph.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Address, GraphIndex, LabelMap, NodeKind, TxGraph};
use crate::matrix::Matrix;
use crate::topo::{FeatureMatrix, NormStat, FEATURE_DIM};

#[derive(Debug, Error)]
pub enum ContractError {
    #[error("address {0} is not a node of the graph")]
    MissingNode(Address),
    #[error("address {0} is not a contract")]
    NotContract(Address),
    #[error("no feature row for node {0}")]
    MissingFeatures(Address),
    #[error("label given for {0}, which is an EOA in the graph")]
    LabelOnEoa(Address),
    #[error("graph has no contract nodes")]
    NoContracts,
    #[error("contract dataset: {0}")]
    Format(String),
}

/// Undirected contract pair `a < b` sharing `shared` EOA neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContractEdge {
    #[serde(rename = "a_index")]
    pub a: usize,
    #[serde(rename = "b_index")]
    pub b: usize,
    #[serde(rename = "shared_count")]
    pub shared: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractDataset {
    /// Sorted by address.
    pub contracts: Vec<Address>,
    pub features: Matrix,
    pub labels: Vec<Option<u8>>,
    /// Sorted by `(a, b)`.
    pub edges: Vec<ContractEdge>,
    pub norm_stats: Option<Vec<NormStat>>,
    pub feature_order_version: String,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    contracts: Vec<Address>,
    features: Vec<Vec<f64>>,
    labels: Vec<Option<u8>>,
    edges: Vec<ContractEdge>,
    feature_order_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    norm_stats: Option<Vec<NormStat>>,
}

impl ContractDataset {
    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }

    /// Indices of contracts carrying a label.
    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i].is_some()).collect()
    }

    /// Undirected adjacency lists (sorted) built from `edges`.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn to_json(&self) -> String {
        let file = DatasetFile {
            contracts: self.contracts.clone(),
            features: (0..self.features.rows()).map(|r| self.features.row(r).to_vec()).collect(),
            labels: self.labels.clone(),
            edges: self.edges.clone(),
            feature_order_version: self.feature_order_version.clone(),
            norm_stats: self.norm_stats.clone(),
        };
        serde_json::to_string_pretty(&file).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ContractError> {
        let f: DatasetFile = serde_json::from_str(text).map_err(|e| ContractError::Format(e.to_string()))?;
        let n = f.contracts.len();
        if f.features.len() != n || f.labels.len() != n {
            return Err(ContractError::Format("contracts/features/labels lengths differ".into()));
        }
        if f.features.iter().any(|r| r.len() != FEATURE_DIM) {
            return Err(ContractError::Format(format!("feature rows must have {FEATURE_DIM} entries")));
        }
        if f.labels.iter().flatten().any(|&l| l > 1) {
            return Err(ContractError::Format("labels must be 0, 1 or null".into()));
        }
        for e in &f.edges {
            if e.a >= e.b || e.b >= n || e.shared == 0 {
                return Err(ContractError::Format(format!("invalid edge {e:?}")));
            }
        }
        let features = if n == 0 { Matrix::zeros(0, FEATURE_DIM) } else { Matrix::from_rows(&f.features) };
        Ok(Self {
            contracts: f.contracts,
            features,
            labels: f.labels,
            edges: f.edges,
            norm_stats: f.norm_stats,
            feature_order_version: f.feature_order_version,
        })
    }
}

fn eoa_neighbors(idx: &GraphIndex, c: usize) -> Vec<usize> {
    let set: BTreeSet<usize> = idx.inn[c]
        .iter()
        .chain(idx.out[c].iter())
        .map(|&(u, _)| u)
        .filter(|&u| idx.kinds[u] == NodeKind::Eoa)
        .collect();
    set.into_iter().collect()
}

/// EOAs adjacent to contract `c` in either direction.
pub fn eoa_neighborhood(g: &TxGraph, c: &Address) -> Result<BTreeSet<Address>, ContractError> {
    match g.kind(c) {
        None => return Err(ContractError::MissingNode(*c)),
        Some(NodeKind::Eoa) => return Err(ContractError::NotContract(*c)),
        Some(NodeKind::Contract) => {}
    }
    let idx = g.index();
    let ci = idx.position[c];
    Ok(eoa_neighbors(&idx, ci).into_iter().map(|u| idx.addresses[u]).collect())
}

/// Contract rows replaced by the mean of their EOA neighbors' rows. A
/// contract without EOA neighbors keeps its own row. Labels are left absent
/// and the edge list empty.
pub fn aggregate_contract_features(g: &TxGraph, m: &FeatureMatrix) -> Result<ContractDataset, ContractError> {
    let idx = g.index();
    let lookup = |u: usize| -> Result<&[f64], ContractError> {
        m.row_of(&idx.addresses[u]).ok_or(ContractError::MissingFeatures(idx.addresses[u]))
    };
    let contract_ids: Vec<usize> = (0..idx.len()).filter(|&v| idx.kinds[v] == NodeKind::Contract).collect();
    let rows: Result<Vec<Vec<f64>>, ContractError> = contract_ids
        .par_iter()
        .map(|&c| {
            let hood = eoa_neighbors(&idx, c);
            if hood.is_empty() {
                return Ok(lookup(c)?.to_vec());
            }
            let mut acc = vec![0.0; m.rows.cols()];
            for &e in &hood {
                for (a, x) in acc.iter_mut().zip(lookup(e)?) {
                    *a += x;
                }
            }
            let k = hood.len() as f64;
            Ok(acc.into_iter().map(|s| s / k).collect())
        })
        .collect();
    let rows = rows?;
    let features = if rows.is_empty() { Matrix::zeros(0, m.rows.cols()) } else { Matrix::from_rows(&rows) };
    Ok(ContractDataset {
        contracts: contract_ids.iter().map(|&c| idx.addresses[c]).collect(),
        features,
        labels: vec![None; contract_ids.len()],
        edges: Vec::new(),
        norm_stats: m.norm_stats.clone(),
        feature_order_version: m.feature_order_version.clone(),
    })
}

/// Undirected shared-EOA edges between contracts, indexed into the sorted
/// contract list of `g`.
pub fn project_contract_graph(g: &TxGraph) -> Vec<ContractEdge> {
    let idx = g.index();
    let contract_pos: BTreeMap<usize, usize> =
        (0..idx.len()).filter(|&v| idx.kinds[v] == NodeKind::Contract).enumerate().map(|(i, v)| (v, i)).collect();
    let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for e in (0..idx.len()).filter(|&v| idx.kinds[v] == NodeKind::Eoa) {
        let touched: BTreeSet<usize> =
            idx.inn[e].iter().chain(idx.out[e].iter()).filter_map(|&(u, _)| contract_pos.get(&u).copied()).collect();
        let touched: Vec<usize> = touched.into_iter().collect();
        for (i, &a) in touched.iter().enumerate() {
            for &b in &touched[i + 1..] {
                *counts.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    counts.into_iter().map(|((a, b), shared)| ContractEdge { a, b, shared }).collect()
}

/// Aggregated features, labels and contract edges in one dataset.
pub fn build_contract_dataset(
    g: &TxGraph,
    m: &FeatureMatrix,
    labels: &LabelMap,
) -> Result<ContractDataset, ContractError> {
    if g.contracts().next().is_none() {
        return Err(ContractError::NoContracts);
    }
    for a in labels.keys() {
        if g.kind(a) == Some(NodeKind::Eoa) {
            return Err(ContractError::LabelOnEoa(*a));
        }
    }
    let mut ds = aggregate_contract_features(g, m)?;
    ds.labels = ds.contracts.iter().map(|a| labels.get(a).copied()).collect();
    ds.edges = project_contract_graph(g);
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_graph, KindMap, TxRecord};
    use crate::topo::FEATURE_ORDER_VERSION;

    fn addr(c: char) -> Address {
        format!("0x{}", c.to_string().repeat(40)).parse().unwrap()
    }

    /// Graph with contracts on the chars listed in `contracts`.
    fn graph(edges: &[(char, char)], contracts: &str) -> TxGraph {
        let kinds: KindMap = contracts.chars().map(|c| (addr(c), NodeKind::Contract)).collect();
        let recs: Vec<TxRecord> = edges
            .iter()
            .map(|&(f, t)| TxRecord { from_address: addr(f), to_address: addr(t), value_wei: 1, timestamp: 0 })
            .collect();
        build_graph(&recs, &kinds)
    }

    fn features_for(g: &TxGraph, f: impl Fn(char) -> f64) -> FeatureMatrix {
        let addresses: Vec<Address> = g.nodes().keys().copied().collect();
        let rows: Vec<Vec<f64>> = addresses
            .iter()
            .map(|a| {
                let c = char::from_digit((a.0[0] >> 4) as u32, 16).unwrap();
                vec![f(c); FEATURE_DIM]
            })
            .collect();
        FeatureMatrix {
            addresses,
            rows: Matrix::from_rows(&rows),
            norm_stats: None,
            feature_order_version: FEATURE_ORDER_VERSION.into(),
        }
    }

    #[test]
    fn neighborhood_union_and_dedup() {
        let g = graph(&[('1', 'c'), ('c', '2')], "c");
        assert_eq!(eoa_neighborhood(&g, &addr('c')).unwrap(), BTreeSet::from([addr('1'), addr('2')]));

        let g = graph(&[('1', 'c'), ('c', '1')], "c");
        assert_eq!(eoa_neighborhood(&g, &addr('c')).unwrap(), BTreeSet::from([addr('1')]));

        let g = graph(&[('c', 'd')], "cd");
        assert!(eoa_neighborhood(&g, &addr('c')).unwrap().is_empty());
    }

    #[test]
    fn neighborhood_of_eoa_is_kind_error() {
        let g = graph(&[('1', 'c')], "c");
        assert!(matches!(eoa_neighborhood(&g, &addr('1')), Err(ContractError::NotContract(_))));
    }

    #[test]
    fn aggregation_rules() {
        // c: neighbors 1 and 2; d: neighbor 3; e: only contract neighbor.
        let g = graph(&[('1', 'c'), ('c', '2'), ('3', 'd'), ('e', 'd')], "cde");
        let m = features_for(&g, |c| c.to_digit(16).unwrap() as f64);
        let ds = aggregate_contract_features(&g, &m).unwrap();
        assert_eq!(ds.contracts, vec![addr('c'), addr('d'), addr('e')]);
        assert!(ds.features.row(0).iter().all(|&x| x == 1.5));
        assert!(ds.features.row(1).iter().all(|&x| x == 3.0));
        assert!(ds.features.row(2).iter().all(|&x| x == 14.0));
    }

    #[test]
    fn projection_weights() {
        let g = graph(&[('1', 'a'), ('2', 'a'), ('2', 'b'), ('3', 'b')], "ab");
        assert_eq!(project_contract_graph(&g), vec![ContractEdge { a: 0, b: 1, shared: 1 }]);

        let g = graph(&[('1', 'a'), ('2', 'b')], "ab");
        assert!(project_contract_graph(&g).is_empty());

        let g = graph(&[('1', 'a'), ('1', 'b'), ('1', 'c'), ('a', '2'), ('b', '2'), ('2', 'c')], "abc");
        assert_eq!(
            project_contract_graph(&g),
            vec![
                ContractEdge { a: 0, b: 1, shared: 2 },
                ContractEdge { a: 0, b: 2, shared: 2 },
                ContractEdge { a: 1, b: 2, shared: 2 },
            ]
        );
    }

    #[test]
    fn label_on_eoa_rejected() {
        let g = graph(&[('1', 'c'), ('c', '1')], "c");
        let m = features_for(&g, |_| 0.0);
        let labels = LabelMap::from([(addr('1'), 1)]);
        assert!(matches!(build_contract_dataset(&g, &m, &labels), Err(ContractError::LabelOnEoa(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = graph(&[('1', 'a'), ('1', 'b'), ('2', 'a')], "ab");
        let m = features_for(&g, |c| c.to_digit(16).unwrap() as f64 * 0.25);
        let labels = LabelMap::from([(addr('a'), 1)]);
        let ds = build_contract_dataset(&g, &m, &labels).unwrap();
        assert_eq!(ds.labels, vec![Some(1), None]);
        assert_eq!(ContractDataset::from_json(&ds.to_json()).unwrap(), ds);
    }
}
