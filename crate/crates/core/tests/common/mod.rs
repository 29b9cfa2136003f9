//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scamgraph_core::ingest::{Address, NodeKind, TxGraph, TxRecord};
use scamgraph_core::matrix::Matrix;
use scamgraph_core::nn::Dense;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Address whose sort order follows `i`.
pub fn addr(i: usize) -> Address {
    let mut b = [0u8; 20];
    b[12..20].copy_from_slice(&(i as u64).to_be_bytes());
    Address(b)
}

pub fn tx(from: usize, to: usize, value: u128, ts: u64) -> TxRecord {
    TxRecord { from_address: addr(from), to_address: addr(to), value_wei: value, timestamp: ts }
}

/// Directed graph on nodes `0..n` (all present, isolated ones included).
pub fn graph_from_edges(n: usize, edges: &[(usize, usize)], contracts: &[usize]) -> TxGraph {
    let nodes: BTreeMap<Address, NodeKind> =
        (0..n).map(|i| (addr(i), if contracts.contains(&i) { NodeKind::Contract } else { NodeKind::Eoa })).collect();
    let e: BTreeMap<(Address, Address), u128> =
        edges.iter().enumerate().map(|(k, &(a, b))| ((addr(a), addr(b)), k as u128 + 1)).collect();
    TxGraph::from_parts(nodes, e).unwrap()
}

/// Random simple digraph with `1..=max_n` nodes, self-loops allowed.
pub fn random_digraph(r: &mut impl Rng, max_n: usize) -> (usize, Vec<(usize, usize)>) {
    let n = r.gen_range(1..=max_n);
    let p: f64 = r.gen_range(0.0..0.25);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let q = if a == b { p / 4.0 } else { p };
            if r.gen_bool(q) {
                edges.push((a, b));
            }
        }
    }
    (n, edges)
}

pub fn dedup_edges(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut e = edges.to_vec();
    e.sort_unstable();
    e.dedup();
    e
}

pub const INF: usize = usize::MAX;

/// All-pairs hop distances; `dist[i][i] = 0`.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        if a != b {
            d[a][b] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == INF {
                continue;
            }
            for j in 0..n {
                if d[k][j] != INF && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// `(in_reach, out_reach, in_max, in_sum, out_max, out_sum)` per node.
pub fn path_oracle(n: usize, edges: &[(usize, usize)]) -> Vec<[usize; 6]> {
    let d = floyd_warshall(n, edges);
    (0..n)
        .map(|v| {
            let ins: Vec<usize> = (0..n).filter(|&u| u != v && d[u][v] != INF).map(|u| d[u][v]).collect();
            let outs: Vec<usize> = (0..n).filter(|&u| u != v && d[v][u] != INF).map(|u| d[v][u]).collect();
            [
                ins.len(),
                outs.len(),
                ins.iter().copied().max().unwrap_or(0),
                ins.iter().sum(),
                outs.iter().copied().max().unwrap_or(0),
                outs.iter().sum(),
            ]
        })
        .collect()
}

/// PageRank by power iteration on the explicit dense Google matrix.
pub fn dense_pagerank(n: usize, edges: &[(usize, usize)], d: f64, iters: usize) -> Vec<f64> {
    let edges = dedup_edges(edges);
    let nf = n as f64;
    let mut out_deg = vec![0usize; n];
    for &(a, _) in &edges {
        out_deg[a] += 1;
    }
    let mut g = vec![vec![(1.0 - d) / nf; n]; n];
    for u in 0..n {
        if out_deg[u] == 0 {
            for row in g.iter_mut() {
                row[u] += d / nf;
            }
        }
    }
    for &(a, b) in &edges {
        g[b][a] += d / out_deg[a] as f64;
    }
    let mut x = vec![1.0 / nf; n];
    for _ in 0..iters {
        x = (0..n).map(|v| (0..n).map(|u| g[v][u] * x[u]).sum()).collect();
    }
    x
}

/// Eigenvalues and column eigenvectors of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// HITS limit from the eigendecomposition of AᵀA: the projection of the
/// first authority iterate onto the top eigenspace. Returns `(hub, authority)`.
pub fn hits_oracle(n: usize, edges: &[(usize, usize)]) -> (Vec<f64>, Vec<f64>) {
    let edges = dedup_edges(edges);
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in &edges {
        a[u][v] = 1.0;
    }
    let ata: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[k][i] * a[k][j]).sum()).collect()).collect();
    let (vals, vecs) = jacobi_eigen(ata);
    let top = vals.iter().copied().fold(f64::MIN, f64::max);
    let first: Vec<f64> = (0..n).map(|i| (0..n).map(|k| a[k][i]).sum()).collect();
    let mut auth = vec![0.0; n];
    for (c, &lambda) in vals.iter().enumerate() {
        if lambda >= top * (1.0 - 1e-9) {
            let coef: f64 = (0..n).map(|i| vecs[i][c] * first[i]).sum();
            for i in 0..n {
                auth[i] += coef * vecs[i][c];
            }
        }
    }
    let auth = normalized(auth);
    let hub = normalized((0..n).map(|u| (0..n).map(|v| a[u][v] * auth[v]).sum()).collect());
    (hub, auth)
}

/// Second-largest over largest eigenvalue of AᵀA.
pub fn hits_gap_ratio(n: usize, edges: &[(usize, usize)]) -> f64 {
    let edges = dedup_edges(edges);
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in &edges {
        a[u][v] = 1.0;
    }
    let ata: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[k][i] * a[k][j]).sum()).collect()).collect();
    let (mut vals, _) = jacobi_eigen(ata);
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let top = vals[0];
    vals.iter().copied().find(|&l| l < top * (1.0 - 1e-9)).map_or(0.0, |l| l / top)
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` nearest rows to `i` among `candidates` by full sort, ties by index.
pub fn brute_knn(x: &Matrix, i: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> =
        candidates.iter().filter(|&&j| j != i).map(|&j| (sq_dist(x.row(i), x.row(j)), j)).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Rows whose `k` nearest neighbors hold a strict majority of the other label.
pub fn enn_oracle(x: &Matrix, labels: &[u8], k: usize) -> Vec<usize> {
    let all: Vec<usize> = (0..labels.len()).collect();
    (0..labels.len())
        .filter(|&i| {
            let nn = brute_knn(x, i, &all, k);
            let other = nn.iter().filter(|&&j| labels[j] != labels[i]).count();
            2 * other > nn.len()
        })
        .collect()
}

pub fn random_matrix(r: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.gen_range(-scale..scale)).collect())
}

pub fn dense(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
}

/// Plain nested-loop forward pass. Returns logits and the pre-activations
/// of every hidden layer. `adj` switches on graph propagation `Â·H` before
/// each layer.
pub fn ref_forward(
    layers: &[Dense],
    x: &Matrix,
    adj: Option<&[Vec<f64>]>,
    masks: Option<&[Matrix]>,
) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
    let mut h = dense(x);
    let mut pre = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        if let Some(a) = adj {
            h = (0..h.len())
                .map(|i| (0..h[0].len()).map(|c| (0..h.len()).map(|j| a[i][j] * h[j][c]).sum()).collect())
                .collect();
        }
        let (fi, fo) = (layer.fan_in(), layer.fan_out());
        let z: Vec<Vec<f64>> = h
            .iter()
            .map(|row| (0..fo).map(|o| layer.b[o] + (0..fi).map(|i| row[i] * layer.w.get(i, o)).sum::<f64>()).collect())
            .collect();
        if l + 1 == layers.len() {
            return (z.iter().map(|r| r[0]).collect(), pre);
        }
        pre.push(z.clone());
        h = z
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.iter().enumerate().map(|(c, &v)| v.max(0.0) * masks.map_or(1.0, |m| m[l].get(r, c))).collect()
            })
            .collect();
    }
    unreachable!("at least one layer")
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean binary cross-entropy over `targets`, computed directly from probabilities.
pub fn ref_bce(logits: &[f64], targets: &[(usize, u8)]) -> f64 {
    targets
        .iter()
        .map(|&(i, y)| {
            let z = logits[i];
            // log(1 + e^{-|z|}) form keeps large |z| finite.
            let softplus = |t: f64| t.max(0.0) + (-t.abs()).exp().ln_1p();
            if y == 1 {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum::<f64>()
        / targets.len() as f64
}

/// Fourth-order central difference of `f` at `x` in coordinate `k`.
pub fn central_diff(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut at = |delta: f64, p: &mut Vec<f64>| {
        p[k] = x[k] + delta;
        f(p)
    };
    let f2 = at(2.0 * h, &mut p);
    let f1 = at(h, &mut p);
    let m1 = at(-h, &mut p);
    let m2 = at(-2.0 * h, &mut p);
    (-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h)
}

/// `|a - n| / max(|a|, |n|, floor)`
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

pub fn sign_pattern(pre: &[Vec<Vec<f64>>]) -> Vec<bool> {
    pre.iter().flatten().flatten().map(|&v| v > 0.0).collect()
}

pub fn min_abs_preact(pre: &[Vec<Vec<f64>>]) -> f64 {
    pre.iter().flatten().flatten().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
}

pub const GRAD_STEP: f64 = 1e-3;
pub const GRAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub worst: f64,
    pub checked: usize,
    /// Coordinates whose stencil changes some ReLU's sign (non-differentiable there).
    pub skipped: usize,
}

impl GradCheck {
    pub fn merge(&mut self, o: GradCheck) {
        self.worst = self.worst.max(o.worst);
        self.checked += o.checked;
        self.skipped += o.skipped;
    }
}

/// Analytic gradients from the library against finite differences of the
/// library's own objective, on the flattened coordinates `coords`. MLP mode
/// (`adj = None`) takes targets as labels for every row in order.
pub fn gradcheck(
    layers: &[Dense],
    x: &Matrix,
    adj: Option<&scamgraph_core::nn::NormAdjacency>,
    targets: &[(usize, u8)],
    masks: Option<&[Matrix]>,
    weight_decay: f64,
    coords: &[usize],
) -> GradCheck {
    use scamgraph_core::nn::{flatten, gcn_backward, mlp_backward, unflatten, GcnParams, MlpParams};
    let labels: Vec<u8> = targets.iter().map(|t| t.1).collect();
    let objective = |ls: &[Dense]| -> (f64, Vec<Dense>) {
        match adj {
            Some(a) => gcn_backward(&GcnParams { layers: ls.to_vec() }, a, x, targets, masks, weight_decay).unwrap(),
            None => mlp_backward(&MlpParams { layers: ls.to_vec() }, x, &labels, masks, weight_decay).unwrap(),
        }
    };
    let dense_adj = adj.map(|a| dense(&a.to_dense()));
    let pattern = |ls: &[Dense]| sign_pattern(&ref_forward(ls, x, dense_adj.as_deref(), masks).1);
    let theta = flatten(layers);
    let analytic = flatten(&objective(layers).1);
    let base = pattern(layers);
    let with = |t: &[f64]| {
        let mut ls = layers.to_vec();
        unflatten(&mut ls, t);
        ls
    };
    let mut out = GradCheck::default();
    for &k in coords {
        let crosses = [-2.0, -1.0, 1.0, 2.0].iter().any(|m| {
            let mut t = theta.clone();
            t[k] += m * GRAD_STEP;
            pattern(&with(&t)) != base
        });
        if crosses {
            out.skipped += 1;
            continue;
        }
        let mut f = |t: &[f64]| objective(&with(t)).0;
        let numeric = central_diff(&mut f, &theta, k, GRAD_STEP);
        out.worst = out.worst.max(rel_err(analytic[k], numeric, GRAD_FLOOR));
        out.checked += 1;
    }
    out
}

/// Hidden-layer dropout masks for `layers` over `rows` rows.
pub fn fixed_masks(r: &mut impl Rng, layers: &[Dense], rows: usize, p: f64) -> Vec<Matrix> {
    layers[..layers.len() - 1].iter().map(|l| scamgraph_core::nn::dropout_mask(r, rows, l.fan_out(), p)).collect()
}
