//! Graph anomaly detection with multi-view representation fusion.
//!
//! The pipeline: load or synthesize an attributed graph with anomaly labels,
//! encode it with one or more GNN backbones (GCN, GAT, GIN), fuse the views
//! at the view level (learnable convex weights) and the feature level
//! (cosine-similarity column reweighting), then train against one of three
//! objectives (label, reconstruction, self-supervised) and report ROC-AUC
//! over multiple seeds.
//!
//! Everything runs on a small reverse-mode autodiff engine over dense f64
//! matrices and CSR sparse-dense products; see [`autodiff`].

pub mod autodiff;
pub mod backbones;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod fusion;
pub mod graph;
pub mod inject;
pub mod model;
pub mod objectives;
pub mod rng;

pub use autodiff::matrix::Matrix;
pub use autodiff::sparse::SparseMatrix;
pub use autodiff::tape::{GradStore, Tape, Tensor};
pub use error::{GadError, Result};
pub use graph::{Graph, NormalizedAdjacency, Split};
