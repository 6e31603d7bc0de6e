//! Reverse-mode automatic differentiation over dense f64 matrices and
//! CSR sparse-dense products, plus Xavier initialization and Adam.

pub mod adam;
pub mod gradcheck;
pub mod init;
pub mod matrix;
pub mod ops;
pub mod sparse;
pub mod tape;

pub use adam::{AdamHyper, BoundParams, ParamId, ParamStore};
pub use init::{xavier, xavier_seeded};
pub use matrix::Matrix;
pub use ops::{Broadcast, EdgeGroups, Op};
pub use sparse::SparseMatrix;
pub use tape::{GradStore, NodeId, Tape, Tensor};
