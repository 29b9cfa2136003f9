//! Per-node topology features.
//!
//! Canonical column order (see [`FEATURE_NAMES`]):
//!
//! | col | feature |
//! |-----|---------|
//! | 0-2 | in-degree, out-degree, total degree over collapsed edges |
//! | 3   | PageRank (unweighted, damping 0.85, uniform teleport) |
//! | 4-5 | HITS hub, HITS authority (unweighted, L2-normalized) |
//! | 6-7 | number of nodes that reach / are reached by the node |
//! | 8-11| max and sum of BFS hop distances, inbound then outbound |
//! | 12  | `log10(1 + w)` with `w` the total Wei through the node |
//!
//! PageRank and HITS ignore edge weights; Wei volume enters only through
//! column 12.

use std::collections::{BTreeMap, VecDeque};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Address, GraphIndex, TxGraph};
use crate::matrix::Matrix;

pub const FEATURE_DIM: usize = 13;
pub const FEATURE_ORDER_VERSION: &str = "topo13-v1";
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "in_degree",
    "out_degree",
    "total_degree",
    "pagerank",
    "hits_hub",
    "hits_authority",
    "in_reach",
    "out_reach",
    "in_path_max",
    "in_path_sum",
    "out_path_max",
    "out_path_sum",
    "log10_wei_throughput",
];

/// Columns whose standard deviation falls below this map to zero.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TopoError {
    #[error("address {0} is not a node of the graph")]
    MissingNode(Address),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("normalization needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("feature matrix is already normalized")]
    AlreadyNormalized,
    #[error("expected {expected} normalization entries, got {got}")]
    StatsLength { expected: usize, got: usize },
    #[error("feature file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankParams {
    fn default() -> Self {
        Self { damping: 0.85, tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitsParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HitsParams {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRank {
    pub scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hits {
    pub hub: Vec<f64>,
    pub authority: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// The graph had no edges; both vectors are all zero.
    pub no_edges: bool,
}

/// Hop-distance summary of one BFS direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PathStats {
    pub reached: usize,
    pub max: usize,
    pub sum: usize,
}

/// Graph plus its index view; the entry point for every feature computation.
pub struct Topology<'g> {
    graph: &'g TxGraph,
    index: GraphIndex,
}

impl<'g> Topology<'g> {
    pub fn new(graph: &'g TxGraph) -> Self {
        Self { graph, index: graph.index() }
    }

    pub fn graph(&self) -> &TxGraph {
        self.graph
    }

    pub fn index(&self) -> &GraphIndex {
        &self.index
    }

    fn node(&self, v: &Address) -> Result<usize, TopoError> {
        self.index.position.get(v).copied().ok_or(TopoError::MissingNode(*v))
    }

    /// `(in, out, in + out)` over collapsed edges.
    pub fn degree_features(&self, v: &Address) -> Result<(usize, usize, usize), TopoError> {
        let i = self.node(v)?;
        let (din, dout) = (self.index.inn[i].len(), self.index.out[i].len());
        Ok((din, dout, din + dout))
    }

    /// `(inbound, outbound)` reachable-node counts, excluding `v` itself.
    pub fn reachability_counts(&self, v: &Address) -> Result<(usize, usize), TopoError> {
        let i = self.node(v)?;
        Ok((bfs_stats(&self.index.inn, i).reached, bfs_stats(&self.index.out, i).reached))
    }

    /// `(in_max, in_sum, out_max, out_sum)` of unweighted hop distances.
    pub fn shortest_path_stats(&self, v: &Address) -> Result<(usize, usize, usize, usize), TopoError> {
        let i = self.node(v)?;
        let inbound = bfs_stats(&self.index.inn, i);
        let outbound = bfs_stats(&self.index.out, i);
        Ok((inbound.max, inbound.sum, outbound.max, outbound.sum))
    }

    /// Total Wei flowing through `v` (inbound plus outbound).
    pub fn wei_volume(&self, v: &Address) -> Result<u128, TopoError> {
        let i = self.node(v)?;
        Ok(wei_volume(&self.index, i))
    }

    /// `log10(1 + w)` of [`Self::wei_volume`].
    pub fn value_throughput(&self, v: &Address) -> Result<f64, TopoError> {
        Ok(log_volume(self.wei_volume(v)?))
    }

    pub fn pagerank(&self, params: &PageRankParams) -> Result<PageRank, TopoError> {
        if self.index.is_empty() {
            return Err(TopoError::EmptyGraph);
        }
        Ok(pagerank_indexed(&self.index, params))
    }

    pub fn hits(&self, params: &HitsParams) -> Result<Hits, TopoError> {
        if self.index.is_empty() {
            return Err(TopoError::EmptyGraph);
        }
        Ok(hits_indexed(&self.index, params))
    }

    /// Raw 13-column feature matrix, one row per node in address order.
    pub fn assemble(&self, pr: &PageRankParams, hp: &HitsParams) -> Result<FeatureMatrix, TopoError> {
        let idx = &self.index;
        let pagerank = self.pagerank(pr)?;
        let hits = self.hits(hp)?;
        let rows: Vec<[f64; FEATURE_DIM]> = (0..idx.len())
            .into_par_iter()
            .map(|v| {
                let din = idx.inn[v].len() as f64;
                let dout = idx.out[v].len() as f64;
                let inbound = bfs_stats(&idx.inn, v);
                let outbound = bfs_stats(&idx.out, v);
                [
                    din,
                    dout,
                    din + dout,
                    pagerank.scores[v],
                    hits.hub[v],
                    hits.authority[v],
                    inbound.reached as f64,
                    outbound.reached as f64,
                    inbound.max as f64,
                    inbound.sum as f64,
                    outbound.max as f64,
                    outbound.sum as f64,
                    log_volume(wei_volume(idx, v)),
                ]
            })
            .collect();
        Ok(FeatureMatrix {
            addresses: idx.addresses.clone(),
            rows: Matrix::from_rows(&rows),
            norm_stats: None,
            feature_order_version: FEATURE_ORDER_VERSION.to_string(),
        })
    }
}

/// Raw features for every node of `g` with default PageRank/HITS settings.
pub fn assemble_features(g: &TxGraph) -> Result<FeatureMatrix, TopoError> {
    Topology::new(g).assemble(&PageRankParams::default(), &HitsParams::default())
}

fn wei_volume(idx: &GraphIndex, v: usize) -> u128 {
    idx.inn[v].iter().chain(idx.out[v].iter()).fold(0u128, |acc, (_, w)| acc.saturating_add(*w))
}

fn log_volume(w: u128) -> f64 {
    (w as f64 + 1.0).log10()
}

/// BFS over `adj` from `source`, summarizing hop distances of every other
/// reached node.
pub fn bfs_stats(adj: &[Vec<(usize, u128)>], source: usize) -> PathStats {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    let mut stats = PathStats::default();
    while let Some(u) = queue.pop_front() {
        let d = dist[u];
        if u != source {
            stats.reached += 1;
            stats.max = stats.max.max(d);
            stats.sum += d;
        }
        for &(w, _) in &adj[u] {
            if dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    stats
}

fn pagerank_indexed(idx: &GraphIndex, params: &PageRankParams) -> PageRank {
    let n = idx.len();
    let nf = n as f64;
    let d = params.damping;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&u| idx.out[u].is_empty()).map(|u| x[u]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        for v in 0..n {
            let inflow: f64 = idx.inn[v].iter().map(|&(u, _)| x[u] / idx.out[u].len() as f64).sum();
            next[v] = base + d * inflow;
        }
        let change: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if change < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("pagerank did not converge within {} iterations", params.max_iter);
    }
    PageRank { scores: x, converged, iterations }
}

fn l2_normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

fn hits_indexed(idx: &GraphIndex, params: &HitsParams) -> Hits {
    let n = idx.len();
    let edge_count: usize = idx.out.iter().map(Vec::len).sum();
    if edge_count == 0 {
        return Hits { hub: vec![0.0; n], authority: vec![0.0; n], converged: true, iterations: 0, no_edges: true };
    }
    let mut hub = vec![1.0; n];
    l2_normalize(&mut hub);
    let mut authority = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let mut a: Vec<f64> = (0..n).map(|v| idx.inn[v].iter().map(|&(u, _)| hub[u]).sum()).collect();
        l2_normalize(&mut a);
        let mut h: Vec<f64> = (0..n).map(|u| idx.out[u].iter().map(|&(v, _)| a[v]).sum()).collect();
        l2_normalize(&mut h);
        let change: f64 = a.iter().zip(&authority).chain(h.iter().zip(&hub)).map(|(x, y)| (x - y).abs()).sum();
        authority = a;
        hub = h;
        if change < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("hits did not converge within {} iterations", params.max_iter);
    }
    Hits { hub, authority, converged, iterations, no_edges: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStat {
    pub mean: f64,
    pub std: f64,
}

/// Node features in canonical column order, rows sorted by address.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub addresses: Vec<Address>,
    pub rows: Matrix,
    /// Present once the rows have been z-scored.
    pub norm_stats: Option<Vec<NormStat>>,
    pub feature_order_version: String,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    pub fn row_of(&self, a: &Address) -> Option<&[f64]> {
        self.addresses.binary_search(a).ok().map(|i| self.rows.row(i))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TopoError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["address".to_string()];
        header.extend((0..FEATURE_DIM).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for (i, a) in self.addresses.iter().enumerate() {
            let mut rec = vec![a.to_string()];
            rec.extend(self.rows.row(i).iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn sidecar(&self) -> FeatureSidecar {
        FeatureSidecar {
            feature_order_version: self.feature_order_version.clone(),
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            norm_stats: self.norm_stats.clone(),
        }
    }

    pub fn read_csv<R: Read>(input: R, sidecar: &FeatureSidecar) -> Result<Self, TopoError> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.len() != FEATURE_DIM + 1 || &headers[0] != "address" {
            return Err(TopoError::Format(format!("expected header address,f0..f12, got {headers:?}")));
        }
        let mut addresses = Vec::new();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let a: Address = rec[0].parse().map_err(|e| TopoError::Format(format!("line {line}: {e}")))?;
            let row: Result<Vec<f64>, _> = (1..=FEATURE_DIM).map(|j| rec[j].parse::<f64>()).collect();
            let row = row.map_err(|e| TopoError::Format(format!("line {line}: {e}")))?;
            addresses.push(a);
            rows.push(row);
        }
        if addresses.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TopoError::Format("rows must be sorted by address without duplicates".into()));
        }
        if let Some(stats) = &sidecar.norm_stats {
            if stats.len() != FEATURE_DIM {
                return Err(TopoError::StatsLength { expected: FEATURE_DIM, got: stats.len() });
            }
        }
        let rows = if rows.is_empty() { Matrix::zeros(0, FEATURE_DIM) } else { Matrix::from_rows(&rows) };
        Ok(Self {
            addresses,
            rows,
            norm_stats: sidecar.norm_stats.clone(),
            feature_order_version: sidecar.feature_order_version.clone(),
        })
    }
}

/// JSON companion of the feature CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub feature_order_version: String,
    pub feature_names: Vec<String>,
    pub norm_stats: Option<Vec<NormStat>>,
}

/// Per-column mean and population standard deviation.
pub fn column_stats(rows: &Matrix) -> Vec<NormStat> {
    let n = rows.rows() as f64;
    let means: Vec<f64> = rows.column_sums().into_iter().map(|s| s / n).collect();
    let mut var = vec![0.0; rows.cols()];
    for r in 0..rows.rows() {
        for (j, x) in rows.row(r).iter().enumerate() {
            var[j] += (x - means[j]) * (x - means[j]);
        }
    }
    means.into_iter().zip(var).map(|(mean, v)| NormStat { mean, std: (v / n).sqrt() }).collect()
}

pub fn normalize_rows(rows: &Matrix, stats: &[NormStat]) -> Matrix {
    let mut out = rows.clone();
    for r in 0..out.rows() {
        for (x, s) in out.row_mut(r).iter_mut().zip(stats) {
            *x = if s.std < DEGENERATE_STD { 0.0 } else { (*x - s.mean) / s.std };
        }
    }
    out
}

/// Z-scores every column with statistics from `m` itself.
pub fn fit_normalize(m: &FeatureMatrix) -> Result<FeatureMatrix, TopoError> {
    if m.len() < 2 {
        return Err(TopoError::TooFewRows(m.len()));
    }
    if m.norm_stats.is_some() {
        return Err(TopoError::AlreadyNormalized);
    }
    let stats = column_stats(&m.rows);
    apply_normalize(m, &stats)
}

/// Z-scores `m` with previously fitted statistics.
pub fn apply_normalize(m: &FeatureMatrix, stats: &[NormStat]) -> Result<FeatureMatrix, TopoError> {
    if m.norm_stats.is_some() {
        return Err(TopoError::AlreadyNormalized);
    }
    if stats.len() != m.rows.cols() {
        return Err(TopoError::StatsLength { expected: m.rows.cols(), got: stats.len() });
    }
    Ok(FeatureMatrix {
        addresses: m.addresses.clone(),
        rows: normalize_rows(&m.rows, stats),
        norm_stats: Some(stats.to_vec()),
        feature_order_version: m.feature_order_version.clone(),
    })
}

/// Address-keyed view of one feature column.
pub fn column_by_address(m: &FeatureMatrix, col: usize) -> BTreeMap<Address, f64> {
    m.addresses.iter().enumerate().map(|(i, a)| (*a, m.rows.get(i, col))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_graph, KindMap, TxRecord};

    fn addr(c: char) -> Address {
        format!("0x{}", c.to_string().repeat(40)).parse().unwrap()
    }

    fn graph(edges: &[(char, char, u128)]) -> TxGraph {
        let recs: Vec<TxRecord> = edges
            .iter()
            .map(|&(f, t, v)| TxRecord { from_address: addr(f), to_address: addr(t), value_wei: v, timestamp: 0 })
            .collect();
        build_graph(&recs, &KindMap::new())
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn degrees() {
        let g = graph(&[('a', 'b', 1), ('b', 'c', 1)]);
        let t = Topology::new(&g);
        assert_eq!(t.degree_features(&addr('b')).unwrap(), (1, 1, 2));

        let g = graph(&[('a', 'a', 1)]);
        assert_eq!(Topology::new(&g).degree_features(&addr('a')).unwrap(), (1, 1, 2));
    }

    #[test]
    fn isolated_node_has_zero_degree() {
        let nodes = std::collections::BTreeMap::from([(addr('a'), crate::NodeKind::Eoa)]);
        let g = TxGraph::from_parts(nodes, Default::default()).unwrap();
        let t = Topology::new(&g);
        assert_eq!(t.degree_features(&addr('a')).unwrap(), (0, 0, 0));
        assert!(matches!(t.degree_features(&addr('b')), Err(TopoError::MissingNode(_))));
    }

    #[test]
    fn pagerank_cycle_and_single() {
        let g = graph(&[('a', 'b', 1), ('b', 'c', 1), ('c', 'a', 1)]);
        let pr = Topology::new(&g).pagerank(&PageRankParams::default()).unwrap();
        assert!(pr.converged);
        for s in pr.scores {
            assert!(close(s, 1.0 / 3.0, 1e-12));
        }

        let nodes = std::collections::BTreeMap::from([(addr('a'), crate::NodeKind::Eoa)]);
        let g = TxGraph::from_parts(nodes, Default::default()).unwrap();
        let pr = Topology::new(&g).pagerank(&PageRankParams::default()).unwrap();
        assert_eq!(pr.scores, vec![1.0]);
    }

    #[test]
    fn pagerank_empty_graph_errors() {
        let g = TxGraph::default();
        assert!(matches!(Topology::new(&g).pagerank(&PageRankParams::default()), Err(TopoError::EmptyGraph)));
    }

    #[test]
    fn pagerank_flags_non_convergence() {
        let g = graph(&[('a', 'b', 1), ('a', 'c', 1), ('b', 'c', 1), ('c', 'a', 1)]);
        let pr = Topology::new(&g).pagerank(&PageRankParams { max_iter: 2, ..Default::default() }).unwrap();
        assert!(!pr.converged);
        assert_eq!(pr.iterations, 2);
    }

    #[test]
    fn hits_single_edge_and_star() {
        let g = graph(&[('a', 'b', 1)]);
        let h = Topology::new(&g).hits(&HitsParams::default()).unwrap();
        assert_eq!(h.hub, vec![1.0, 0.0]);
        assert_eq!(h.authority, vec![0.0, 1.0]);

        // c is the center; addresses sort as c < d < e < f.
        let g = graph(&[('c', 'd', 1), ('c', 'e', 1), ('c', 'f', 1)]);
        let h = Topology::new(&g).hits(&HitsParams::default()).unwrap();
        assert!(close(h.hub[0], 1.0, 1e-12));
        for v in 1..4 {
            assert!(close(h.authority[v], 1.0 / 3f64.sqrt(), 1e-12));
            assert_eq!(h.hub[v], 0.0);
        }
    }

    #[test]
    fn hits_without_edges_flags() {
        let nodes = std::collections::BTreeMap::from([(addr('a'), crate::NodeKind::Eoa)]);
        let g = TxGraph::from_parts(nodes, Default::default()).unwrap();
        let h = Topology::new(&g).hits(&HitsParams::default()).unwrap();
        assert!(h.no_edges);
        assert_eq!(h.hub, vec![0.0]);
    }

    #[test]
    fn reachability_and_paths_on_chain() {
        let g = graph(&[('a', 'b', 1), ('b', 'c', 1)]);
        let t = Topology::new(&g);
        assert_eq!(t.reachability_counts(&addr('a')).unwrap(), (0, 2));
        assert_eq!(t.reachability_counts(&addr('c')).unwrap(), (2, 0));
        assert_eq!(t.shortest_path_stats(&addr('a')).unwrap(), (0, 0, 2, 3));
    }

    #[test]
    fn paths_on_cycle() {
        let g = graph(&[('a', 'b', 1), ('b', 'c', 1), ('c', 'a', 1)]);
        let t = Topology::new(&g);
        for c in ['a', 'b', 'c'] {
            assert_eq!(t.shortest_path_stats(&addr(c)).unwrap(), (2, 3, 2, 3));
        }
    }

    #[test]
    fn throughput() {
        let g = graph(&[('a', 'b', 5), ('b', 'c', 3)]);
        assert_eq!(Topology::new(&g).value_throughput(&addr('b')).unwrap(), 9f64.log10());
        let g = graph(&[('a', 'b', 0), ('b', 'c', 0)]);
        assert_eq!(Topology::new(&g).value_throughput(&addr('b')).unwrap(), 0.0);
        let g = graph(&[('a', 'a', 10)]);
        assert_eq!(Topology::new(&g).value_throughput(&addr('a')).unwrap(), 21f64.log10());
    }

    #[test]
    fn cycle_rows_identical() {
        let g = graph(&[('a', 'b', 7), ('b', 'c', 7), ('c', 'a', 7)]);
        let m = assemble_features(&g).unwrap();
        assert_eq!(m.rows.row(0), m.rows.row(1));
        assert_eq!(m.rows.row(1), m.rows.row(2));
        for r in 0..3 {
            let row = m.rows.row(r);
            assert_eq!(row.len(), FEATURE_DIM);
            assert_eq!(row[2], row[0] + row[1]);
        }
    }

    fn single_column(values: &[f64]) -> FeatureMatrix {
        let n = values.len();
        let addresses = (0..n).map(|i| Address([i as u8; 20])).collect();
        let mut rows = Matrix::zeros(n, FEATURE_DIM);
        for (i, v) in values.iter().enumerate() {
            rows.set(i, 0, *v);
        }
        FeatureMatrix { addresses, rows, norm_stats: None, feature_order_version: FEATURE_ORDER_VERSION.into() }
    }

    #[test]
    fn two_point_zscore() {
        let z = fit_normalize(&single_column(&[1.0, 3.0])).unwrap();
        assert_eq!(z.rows.get(0, 0), -1.0);
        assert_eq!(z.rows.get(1, 0), 1.0);
        // The remaining columns are constant zero.
        assert_eq!(z.rows.get(0, 5), 0.0);
    }

    #[test]
    fn constant_column_zeroes() {
        let z = fit_normalize(&single_column(&[5.0, 5.0, 5.0])).unwrap();
        assert!((0..3).all(|r| z.rows.get(r, 0) == 0.0));
    }

    #[test]
    fn apply_reproduces_fit() {
        let raw = single_column(&[0.3, -2.0, 7.5, 1.25]);
        let fitted = fit_normalize(&raw).unwrap();
        let applied = apply_normalize(&raw, fitted.norm_stats.as_ref().unwrap()).unwrap();
        assert_eq!(fitted, applied);
    }

    #[test]
    fn fit_needs_two_rows() {
        assert!(matches!(fit_normalize(&single_column(&[1.0])), Err(TopoError::TooFewRows(1))));
    }

    #[test]
    fn csv_round_trip() {
        let g = graph(&[('a', 'b', 5), ('b', 'c', 3), ('c', 'a', 1), ('a', 'c', 2)]);
        let m = fit_normalize(&assemble_features(&g).unwrap()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv(buf.as_slice(), &m.sidecar()).unwrap();
        assert_eq!(back, m);
    }
}
