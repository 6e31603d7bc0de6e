//! Dataset ingestion, adjacency normalization, splitting, and kNN graphs,
//! each against an independent reference where one exists.

use proptest::prelude::*;
use rand::Rng;

use gad_core::graph::{
    attach_points, knn_graph, load_graph, normalize_adjacency, stratified_split, write_graph,
};
use gad_core::rng::stream;
use gad_core::{Graph, Matrix};

fn demo_graph() -> Graph {
    let features = Matrix::from_rows(&[
        vec![0.25, -1.5, 3.0],
        vec![1.0, 2.0, -0.125],
        vec![0.0, 0.5, 1.0 / 3.0],
        vec![-2.0, 0.0, 7.5],
    ])
    .unwrap();
    Graph::new(
        "demo",
        features,
        &[(0, 1), (1, 2), (2, 3)],
        Some(vec![0, 1, 0, 0]),
        Some(vec![0, 1, 2, 0]),
    )
    .unwrap()
}

#[test]
fn dataset_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let g = demo_graph();
    write_graph(&g, dir.path()).unwrap();
    let loaded = load_graph(dir.path()).unwrap();
    assert_eq!(loaded.name, g.name);
    assert_eq!(loaded.n(), g.n());
    assert_eq!(loaded.edge_set(), g.edge_set());
    assert_eq!(loaded.features, g.features);
    assert_eq!(loaded.labels, g.labels);
    assert_eq!(loaded.class_labels, g.class_labels);
}

#[test]
fn two_node_edge_symmetrized_on_load() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("meta.json"), r#"{"name":"pair","n":2,"d":1}"#).unwrap();
    std::fs::write(dir.path().join("edges.tsv"), "0 1\n").unwrap();
    std::fs::write(dir.path().join("features.csv"), "1.0\n2.0\n").unwrap();
    let g = load_graph(dir.path()).unwrap();
    assert_eq!(g.adj.get(0, 1), 1.0);
    assert_eq!(g.adj.get(1, 0), 1.0);
}

#[test]
fn loader_rejects_bad_inputs() {
    let write_base = |dir: &std::path::Path, n: usize| {
        std::fs::write(dir.join("meta.json"), format!(r#"{{"name":"x","n":{n},"d":1}}"#)).unwrap();
        std::fs::write(dir.join("edges.tsv"), "").unwrap();
        std::fs::write(dir.join("features.csv"), "1.0\n2.0\n3.0\n").unwrap();
    };

    // row count mismatch: meta says 4, features has 3
    let d1 = tempfile::tempdir().unwrap();
    write_base(d1.path(), 4);
    assert!(load_graph(d1.path()).is_err());

    // node index >= n
    let d2 = tempfile::tempdir().unwrap();
    write_base(d2.path(), 3);
    std::fs::write(d2.path().join("edges.tsv"), "0 9\n").unwrap();
    assert!(load_graph(d2.path()).is_err());

    // non-numeric cell
    let d3 = tempfile::tempdir().unwrap();
    write_base(d3.path(), 3);
    std::fs::write(d3.path().join("features.csv"), "1.0\nfoo\n3.0\n").unwrap();
    assert!(load_graph(d3.path()).is_err());

    // missing file
    let d4 = tempfile::tempdir().unwrap();
    std::fs::write(d4.path().join("meta.json"), r#"{"name":"x","n":1,"d":1}"#).unwrap();
    assert!(load_graph(d4.path()).is_err());

    // unknown meta key
    let d5 = tempfile::tempdir().unwrap();
    write_base(d5.path(), 3);
    std::fs::write(d5.path().join("meta.json"), r#"{"name":"x","n":3,"d":1,"extra":1}"#).unwrap();
    assert!(load_graph(d5.path()).is_err());
}

/// Dense evaluation of Dtilde^{-1/2} (A+I) Dtilde^{-1/2}.
fn dense_normalized(g: &Graph) -> Matrix {
    let n = g.n();
    let mut a = g.adj.to_dense();
    for i in 0..n {
        a.set(i, i, a.at(i, i) + 1.0);
    }
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a.at(i, j)).sum()).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, a.at(i, j) / (deg[i] * deg[j]).sqrt());
        }
    }
    out
}

#[test]
fn normalization_matches_dense_oracle() {
    let mut rng = stream(5, "test/normalize");
    let n = 20;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.2 {
                edges.push((i, j));
            }
        }
    }
    let g = Graph::new("rand", Matrix::zeros(n, 1), &edges, None, None).unwrap();
    let norm = normalize_adjacency(&g).0;
    let oracle = dense_normalized(&g);
    for i in 0..n {
        for j in 0..n {
            assert!((norm.get(i, j) - oracle.at(i, j)).abs() <= 1e-12, "entry ({i},{j})");
        }
    }
    assert!(norm.is_symmetric());
    for i in 0..n {
        assert_eq!(norm.get(i, i), 1.0 / (g.degree(i) + 1) as f64);
    }
}

// ---------------------------------------------------------------------------
// kNN against a brute-force oracle
// ---------------------------------------------------------------------------

/// Repeated-extraction nearest-neighbor scan, structured differently from
/// the sort-based implementation.
fn brute_force_neighbors(points: &Matrix, i: usize, k: usize) -> Vec<usize> {
    let d2 = |a: usize, b: usize| -> f64 {
        points
            .row(a)
            .iter()
            .zip(points.row(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };
    let mut picked = Vec::new();
    while picked.len() < k {
        let mut best: Option<usize> = None;
        for j in 0..points.rows() {
            if j == i || picked.contains(&j) {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(b) => {
                    if d2(i, j) < d2(i, b) || (d2(i, j) == d2(i, b) && j < b) {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        picked.push(best.expect("k < m"));
    }
    picked
}

#[test]
fn knn_matches_brute_force_scan() {
    let mut rng = stream(6, "test/knn");
    let rows: Vec<Vec<f64>> =
        (0..50).map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
    let points = Matrix::from_rows(&rows).unwrap();
    let g = knn_graph(&points, 5).unwrap();
    for i in 0..50 {
        let expected = brute_force_neighbors(&points, i, 5);
        // The graph is symmetrized, so node i's neighbor set must contain
        // its own 5 nearest; extra edges come from being chosen by others.
        for j in &expected {
            assert_eq!(g.adj.get(i, *j), 1.0, "node {i} missing neighbor {j}");
        }
    }
}

#[test]
fn knn_duplicate_points_tie_break_low_index() {
    let points =
        Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![5.0, 5.0]])
            .unwrap();
    let g = knn_graph(&points, 1).unwrap();
    // All three coincident points pick the lowest-indexed duplicate.
    assert_eq!(g.adj.get(1, 0), 1.0);
    assert_eq!(g.adj.get(2, 0), 1.0);
    assert_eq!(g.adj.get(3, 0), 1.0);
}

#[test]
fn attach_points_extends_without_touching_base_edges() {
    let base_pts = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let base = knn_graph(&base_pts, 1).unwrap();
    let extra = Matrix::from_rows(&[vec![0.9, 0.1]]).unwrap();
    let g = attach_points(&base, &extra, 2).unwrap();
    assert_eq!(g.n(), 4);
    assert!(g.edge_set().is_superset(&base.edge_set()));
    assert_eq!(g.adj.get(3, 1), 1.0, "grid point wired to nearest base point");
    assert!(g.adj.is_symmetric());
}

// ---------------------------------------------------------------------------
// stratified split properties
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_disjoint_and_covering(labels in proptest::collection::vec(0u8..2, 3..120), seed in 0u64..500) {
        let n = labels.len();
        let g = Graph::new("p", Matrix::zeros(n, 1), &[], Some(labels), None).unwrap();
        let s = stratified_split(&g, (0.4, 0.3, 0.3), seed).unwrap();
        let mut all: Vec<usize> = s.train_idx.iter().chain(&s.val_idx).chain(&s.test_idx).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        // 4:3:3 within one node per set
        let (a, b, c) = s.sizes();
        prop_assert!((a as f64 - 0.4 * n as f64).abs() < 1.0 + 1e-9);
        prop_assert!((b as f64 - 0.3 * n as f64).abs() < 1.0 + 1e-9);
        prop_assert!((c as f64 - 0.3 * n as f64).abs() < 1.0 + 1e-9);
    }
}
