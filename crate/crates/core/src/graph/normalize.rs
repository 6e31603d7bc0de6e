//! Symmetric GCN propagation operator.

use crate::autodiff::sparse::SparseMatrix;
use crate::graph::Graph;

/// `Ahat = Dtilde^{-1/2} (A + I) Dtilde^{-1/2}` where `Dtilde` is the degree
/// of `A + I`. Exactly symmetric by construction; `Ahat[i][i] = 1/(deg_i + 1)`.
#[derive(Clone, Debug)]
pub struct NormalizedAdjacency(pub SparseMatrix);

pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.n();
    let deg_tilde: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut entries = Vec::with_capacity(g.adj.nnz() + n);
    for i in 0..n {
        entries.push((i, i, 1.0 / deg_tilde[i]));
        for &j in g.neighbors(i) {
            // 1/sqrt(di*dj) rather than a product of inverse roots: exactly
            // symmetric and exact on analytically forced cases like d=2.
            entries.push((i, j, 1.0 / (deg_tilde[i] * deg_tilde[j]).sqrt()));
        }
    }
    NormalizedAdjacency(
        SparseMatrix::from_triplets(n, n, entries).expect("valid adjacency stays valid"),
    )
}
