//! k-nearest-neighbor graph construction over point clouds.

use crate::autodiff::matrix::Matrix;
use crate::error::{GadError, Result};
use crate::graph::Graph;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest rows of `points` to `query`, excluding
/// `skip` (the query's own index, if any). Ties break on the lower index.
fn k_nearest(points: &Matrix, query: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = (0..points.rows())
        .filter(|&j| Some(j) != skip)
        .map(|j| (dist2(points.row(j), query), j))
        .collect();
    cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Connect every point to its `k` nearest Euclidean neighbors, symmetrize,
/// and carry the coordinates as node features.
pub fn knn_graph(points: &Matrix, k: usize) -> Result<Graph> {
    let m = points.rows();
    if k == 0 || k >= m {
        return Err(GadError::Config(format!("knn_graph requires 1 <= k < m, got k={k}, m={m}")));
    }
    let mut edges = Vec::with_capacity(m * k);
    for i in 0..m {
        for j in k_nearest(points, points.row(i), k, Some(i)) {
            edges.push((i, j));
        }
    }
    Graph::new("knn", points.clone(), &edges, None, None)
}

/// Extend `base` with extra points, each wired to its `k` nearest base
/// points. The new nodes carry no labels; returned graph has
/// `base.n() + extra.rows()` nodes with the extras appended at the end.
pub fn attach_points(base: &Graph, extra: &Matrix, k: usize) -> Result<Graph> {
    if extra.cols() != base.dim() {
        return Err(GadError::shape(
            "attach_points",
            format!("extra points have {} dims, base has {}", extra.cols(), base.dim()),
        ));
    }
    if k == 0 || k > base.n() {
        return Err(GadError::Config(format!("attach_points requires 1 <= k <= n, got {k}")));
    }
    let n0 = base.n();
    let mut rows: Vec<Vec<f64>> = (0..n0).map(|i| base.features.row(i).to_vec()).collect();
    rows.extend((0..extra.rows()).map(|i| extra.row(i).to_vec()));
    let features = Matrix::from_rows(&rows)?;

    let mut edges: Vec<(usize, usize)> = base.edge_set().into_iter().collect();
    for (i, _) in (0..extra.rows()).enumerate() {
        for j in k_nearest(&base.features, extra.row(i), k, None) {
            edges.push((n0 + i, j));
        }
    }
    Graph::new(format!("{}+grid", base.name), features, &edges, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_single_mutual_edge() {
        let pts = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let g = knn_graph(&pts, 1).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.adj.get(0, 1), 1.0);
        assert_eq!(g.adj.get(1, 0), 1.0);
    }

    #[test]
    fn output_always_symmetric() {
        let pts = Matrix::from_rows(
            &(0..20).map(|i| vec![(i as f64 * 0.77).sin(), (i as f64 * 1.3).cos()]).collect::<Vec<_>>(),
        )
        .unwrap();
        let g = knn_graph(&pts, 3).unwrap();
        assert!(g.adj.is_symmetric());
    }

    #[test]
    fn k_out_of_range_rejected() {
        let pts = Matrix::zeros(3, 2);
        assert!(knn_graph(&pts, 0).is_err());
        assert!(knn_graph(&pts, 3).is_err());
    }
}
