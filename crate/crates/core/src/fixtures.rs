//! Synthetic benchmark graphs and point clouds.
//!
//! Desk-scale generators used by the example configs, the decision-boundary
//! demo, and the evaluation suites: a two-community attributed graph with
//! community-correlated features, the same graph with planted synthetic
//! anomalies, and the Gaussian-vs-uniform point cloud.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::matrix::Matrix;
use crate::error::Result;
use crate::graph::Graph;
use crate::inject::{make_synthetic, InjectionReport};
use crate::rng::stream;

/// Marsaglia polar Gaussian; deterministic per rng stream.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

#[derive(Clone, Debug)]
pub struct CommunityParams {
    pub n: usize,
    pub feat_dim: usize,
    pub intra_p: f64,
    pub inter_p: f64,
    /// Separation of the two community feature means.
    pub feature_shift: f64,
    pub noise: f64,
}

impl Default for CommunityParams {
    fn default() -> Self {
        CommunityParams {
            n: 500,
            feat_dim: 16,
            intra_p: 0.035,
            inter_p: 0.004,
            feature_shift: 1.0,
            noise: 0.6,
        }
    }
}

/// Two equal communities with denser intra-community wiring and
/// community-shifted Gaussian features. Nodes carry their community as the
/// multiclass label; anomaly labels start absent.
pub fn two_community_graph(params: &CommunityParams, seed: u64) -> Result<Graph> {
    let n = params.n;
    let mut rng = stream(seed, "fixture/structure");
    let mut edges = Vec::new();
    let comm = |i: usize| usize::from(i >= n / 2);
    for i in 0..n {
        for j in i + 1..n {
            let p = if comm(i) == comm(j) { params.intra_p } else { params.inter_p };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let mut frng = stream(seed, "fixture/features");
    // Half the columns carry the community signal, the rest are noise.
    let mut features = Matrix::zeros(n, params.feat_dim);
    for i in 0..n {
        let sign = if comm(i) == 0 { 1.0 } else { -1.0 };
        for j in 0..params.feat_dim {
            let mean = if j < params.feat_dim / 2 { sign * params.feature_shift } else { 0.0 };
            features.set(i, j, mean + params.noise * gauss(&mut frng));
        }
    }
    let classes: Vec<usize> = (0..n).map(comm).collect();
    Graph::new(format!("two-community-{seed}"), features, &edges, None, Some(classes))
}

/// A 500-node two-community graph with 10% planted anomalies, half clique
/// members and half farthest-of-k feature swaps.
pub fn planted_fixture(seed: u64) -> Result<(Graph, InjectionReport)> {
    let base = two_community_graph(&CommunityParams::default(), seed)?;
    make_synthetic(&base, 0.1, 10, 50, seed)
}

/// A 500-node detection benchmark with systematic (rather than outlier-like)
/// anomalies: six 75-node feature-blocked communities, a dense 25-node cell
/// (the structural mechanism), and 25 role nodes carrying a feature-block
/// combination no community uses (the attribute mechanism). 10% anomalous.
pub fn benchmark_fixture(seed: u64, noise: f64) -> Result<Graph> {
    const N: usize = 500;
    const D: usize = 24;
    const SHIFT: f64 = 1.0;
    let comm = |i: usize| -> usize {
        if i < 450 {
            i / 75
        } else if i < 475 {
            6 // dense cell
        } else {
            7 // role nodes
        }
    };
    let mut rng = stream(seed, "fixture/structure");
    let mut edges = Vec::new();
    for i in 0..N {
        for j in i + 1..N {
            let (ci, cj) = (comm(i), comm(j));
            let p = if ci == cj {
                match ci {
                    6 => 0.35,
                    7 => 0.15,
                    _ => 0.08,
                }
            } else if ci < 6 && cj < 6 {
                0.006
            } else {
                0.015
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let mut frng = stream(seed, "fixture/features");
    let mut x = Matrix::zeros(N, D);
    for i in 0..N {
        let c = comm(i);
        for j in 0..D {
            let mean = match c {
                0..=5 => {
                    if (4 * c..4 * (c + 1)).contains(&j) {
                        SHIFT
                    } else {
                        0.0
                    }
                }
                6 => 0.0,
                _ => {
                    if j < 4 || (8..12).contains(&j) {
                        0.75 * SHIFT
                    } else {
                        0.0
                    }
                }
            };
            x.set(i, j, mean + noise * gauss(&mut frng));
        }
    }
    let labels: Vec<u8> = (0..N).map(|i| u8::from(comm(i) >= 6)).collect();
    Graph::new(format!("benchmark-{seed}"), x, &edges, Some(labels), None)
}

/// Normal points from N(0, sigma^2 I_2) labeled 0, anomalies uniform on
/// [-range, range]^2 labeled 1. Returns coordinates and labels.
pub fn point_cloud(
    n_normal: usize,
    n_anomalous: usize,
    sigma: f64,
    range: f64,
    seed: u64,
) -> (Matrix, Vec<u8>) {
    let mut rng = stream(seed, "fixture/points");
    let mut rows = Vec::with_capacity(n_normal + n_anomalous);
    let mut labels = Vec::with_capacity(n_normal + n_anomalous);
    for _ in 0..n_normal {
        rows.push(vec![sigma * gauss(&mut rng), sigma * gauss(&mut rng)]);
        labels.push(0);
    }
    for _ in 0..n_anomalous {
        let x = (2.0 * rng.random::<f64>() - 1.0) * range;
        let y = (2.0 * rng.random::<f64>() - 1.0) * range;
        rows.push(vec![x, y]);
        labels.push(1);
    }
    let points = Matrix::from_rows(&rows).expect("fixed-width rows");
    (points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_fixture_has_ten_percent_anomalies() {
        let (g, report) = planted_fixture(0).unwrap();
        assert_eq!(g.n(), 500);
        assert_eq!(g.anomaly_count(), 50);
        assert_eq!(report.anomalies.len(), 50);
    }

    #[test]
    fn point_cloud_shapes_and_labels() {
        let (pts, labels) = point_cloud(40, 10, 0.3, 7.0, 1);
        assert_eq!(pts.rows(), 50);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 10);
        // Normal cluster is tight, anomalies spread wide.
        let norm_max = (0..40).map(|i| pts.at(i, 0).abs().max(pts.at(i, 1).abs()))
            .fold(0.0, f64::max);
        assert!(norm_max < 2.5);
    }
}
