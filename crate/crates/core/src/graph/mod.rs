//! Attributed graphs: representation, ingestion, normalization, splitting,
//! and kNN construction for point-cloud demos.

mod io;
mod knn;
mod normalize;
mod split;

pub use io::{load_graph, write_graph};
pub use knn::{attach_points, knn_graph};
pub use normalize::{normalize_adjacency, NormalizedAdjacency};
pub use split::{stratified_split, Split};

use crate::autodiff::matrix::Matrix;
use crate::autodiff::sparse::SparseMatrix;
use crate::error::{GadError, Result};

/// Undirected attributed graph with optional anomaly labels.
///
/// The adjacency is stored symmetric with unit weights and no self-loops;
/// self-loops only appear inside [`normalize_adjacency`].
#[derive(Clone, Debug)]
pub struct Graph {
    pub name: String,
    pub features: Matrix,
    pub adj: SparseMatrix,
    /// Binary anomaly labels, 1 = anomaly.
    pub labels: Option<Vec<u8>>,
    /// Original multiclass labels, for minimal-class anomaly construction.
    pub class_labels: Option<Vec<usize>>,
}

impl Graph {
    /// Build from an edge list. Edges are symmetrized and deduplicated;
    /// self-loops in the input are dropped.
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        edges: &[(usize, usize)],
        labels: Option<Vec<u8>>,
        class_labels: Option<Vec<usize>>,
    ) -> Result<Graph> {
        let n = features.rows();
        if let Some(y) = &labels {
            if y.len() != n {
                return Err(GadError::Data(format!("{} labels for {n} nodes", y.len())));
            }
            if y.iter().any(|&v| v > 1) {
                return Err(GadError::Data("anomaly labels must be 0 or 1".into()));
            }
        }
        if let Some(c) = &class_labels {
            if c.len() != n {
                return Err(GadError::Data(format!("{} class labels for {n} nodes", c.len())));
            }
        }
        let adj = adjacency_from_edges(n, edges)?;
        Ok(Graph { name: name.into(), features, adj, labels, class_labels })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Undirected edge count.
    pub fn num_edges(&self) -> usize {
        self.adj.nnz() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adj.row(i).0
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).len()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.as_ref().map_or(0, |y| y.iter().filter(|&&v| v == 1).count())
    }

    pub fn anomaly_ratio(&self) -> f64 {
        self.anomaly_count() as f64 / self.n() as f64
    }

    /// Undirected edge set as (min, max) pairs.
    pub fn edge_set(&self) -> std::collections::BTreeSet<(usize, usize)> {
        self.adj.iter().filter(|&(i, j, _)| i < j).map(|(i, j, _)| (i, j)).collect()
    }
}

/// Symmetric unit-weight CSR adjacency from an arbitrary edge list.
pub(crate) fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<SparseMatrix> {
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(edges.len() * 2);
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(GadError::Data(format!("edge ({a}, {b}) references node >= {n}")));
        }
        if a == b {
            continue;
        }
        pairs.push((a, b));
        pairs.push((b, a));
    }
    pairs.sort_unstable();
    pairs.dedup();
    let triplets = pairs.into_iter().map(|(a, b)| (a, b, 1.0)).collect();
    SparseMatrix::from_triplets(n, n, triplets)
}
