mod common;

use common::*;
use proptest::prelude::*;
use scamgraph_core::topo::{
    assemble_features, fit_normalize, FeatureMatrix, HitsParams, PageRankParams, Topology, FEATURE_DIM,
    FEATURE_ORDER_VERSION,
};

fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    any::<u64>().prop_map(|s| random_digraph(&mut rng(s), 30))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pagerank_is_a_distribution((n, edges) in arb_graph()) {
        let g = graph_from_edges(n, &edges, &[]);
        let pr = Topology::new(&g).pagerank(&PageRankParams::default()).unwrap();
        prop_assert!(pr.converged);
        prop_assert!((pr.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(pr.scores.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn pagerank_matches_dense_power_iteration((n, edges) in arb_graph()) {
        let g = graph_from_edges(n, &edges, &[]);
        let pr = Topology::new(&g).pagerank(&PageRankParams::default()).unwrap();
        let oracle = dense_pagerank(n, &edges, 0.85, 3000);
        for (a, b) in pr.scores.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn hits_vectors_are_unit_and_nonnegative((n, edges) in arb_graph()) {
        let g = graph_from_edges(n, &edges, &[]);
        let h = Topology::new(&g).hits(&HitsParams::default()).unwrap();
        if edges.is_empty() {
            prop_assert!(h.no_edges);
            prop_assert!(h.hub.iter().chain(&h.authority).all(|&x| x == 0.0));
        } else {
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm(&h.hub) - 1.0).abs() < 1e-9);
            prop_assert!((norm(&h.authority) - 1.0).abs() < 1e-9);
            prop_assert!(h.hub.iter().chain(&h.authority).all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn hits_matches_eigen_oracle((n, edges) in arb_graph()) {
        prop_assume!(!edges.is_empty());
        let g = graph_from_edges(n, &edges, &[]);
        let h = Topology::new(&g).hits(&HitsParams { tol: 1e-13, max_iter: 200_000 }).unwrap();
        prop_assert!(h.converged);
        let (hub, auth) = hits_oracle(n, &edges);
        for (a, b) in h.hub.iter().zip(&hub).chain(h.authority.iter().zip(&auth)) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn path_columns_match_floyd_warshall((n, edges) in arb_graph()) {
        let g = graph_from_edges(n, &edges, &[]);
        let m = assemble_features(&g).unwrap();
        let oracle = path_oracle(n, &edges);
        for v in 0..n {
            let row = m.rows.row(v);
            let got: Vec<usize> = row[6..12].iter().map(|&x| x as usize).collect();
            prop_assert_eq!(&got[..], &oracle[v][..]);
            prop_assert!(row[10] <= row[11]);
            prop_assert!(row[8] <= row[9]);
        }
    }

    #[test]
    fn degree_and_volume_columns((n, edges) in arb_graph()) {
        let g = graph_from_edges(n, &edges, &[]);
        let m = assemble_features(&g).unwrap();
        for v in 0..n {
            let row = m.rows.row(v);
            let din = edges.iter().filter(|e| e.1 == v).count() as f64;
            let dout = edges.iter().filter(|e| e.0 == v).count() as f64;
            prop_assert_eq!((row[0], row[1], row[2]), (din, dout, din + dout));
            // graph_from_edges weights edge k with k + 1 Wei; a self-loop is both inbound and outbound.
            let wei: u128 = edges
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| (k as u128 + 1) * (u128::from(a == v) + u128::from(b == v)))
                .sum();
            prop_assert!((row[12] - (wei as f64 + 1.0).log10()).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_centres_and_scales((n, edges) in arb_graph()) {
        prop_assume!(n >= 2);
        let g = graph_from_edges(n, &edges, &[]);
        let z = fit_normalize(&assemble_features(&g).unwrap()).unwrap();
        let stats = z.norm_stats.as_ref().unwrap();
        for j in 0..FEATURE_DIM {
            let col: Vec<f64> = (0..n).map(|i| z.rows.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-9);
            let var = col.iter().map(|x| x * x).sum::<f64>() / n as f64;
            if stats[j].std >= 1e-12 {
                prop_assert!((var - 1.0).abs() < 1e-9);
            } else {
                prop_assert!(col.iter().all(|&x| x == 0.0));
            }
        }
    }
}

#[test]
fn star_graph_values() {
    // Leaves 1..=4 all point at hub node 0.
    let edges = [(1, 0), (2, 0), (3, 0), (4, 0)];
    let g = graph_from_edges(5, &edges, &[]);
    let t = Topology::new(&g);
    let h = t.hits(&HitsParams::default()).unwrap();
    assert!((h.authority[0] - 1.0).abs() < 1e-12);
    for leaf in 1..5 {
        assert!((h.hub[leaf] - 0.5).abs() < 1e-12);
        assert_eq!(t.reachability_counts(&addr(leaf)).unwrap(), (0, 1));
    }
    assert_eq!(t.reachability_counts(&addr(0)).unwrap(), (4, 0));
    assert_eq!(t.shortest_path_stats(&addr(0)).unwrap(), (1, 4, 0, 0));
    let pr = t.pagerank(&PageRankParams::default()).unwrap();
    assert!(pr.scores[0] > pr.scores[1]);
}

#[test]
fn features_are_deterministic_and_round_trip() {
    let (n, edges) = random_digraph(&mut rng(7), 40);
    let g = graph_from_edges(n, &edges, &[]);
    let a = assemble_features(&g).unwrap();
    let b = assemble_features(&g).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.feature_order_version, FEATURE_ORDER_VERSION);

    let z = fit_normalize(&a).unwrap();
    let mut csv = Vec::new();
    z.write_csv(&mut csv).unwrap();
    let back = FeatureMatrix::read_csv(csv.as_slice(), &z.sidecar()).unwrap();
    assert_eq!(back, z);
    assert!(fit_normalize(&z).is_err());
}

#[test]
fn empty_graph_is_rejected() {
    let g = graph_from_edges(0, &[], &[]);
    assert!(assemble_features(&g).is_err());
}
