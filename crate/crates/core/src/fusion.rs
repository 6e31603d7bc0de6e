//! View-level and feature-level representation fusion.
//!
//! View fusion projects each view to a unified width and combines them with
//! a learnable convex weight vector (softmax over raw logits). Feature
//! fusion reweights each column of the fused representation by how
//! complementary it is to the other columns, measured by column cosine
//! similarity.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::adam::{BoundParams, ParamId, ParamStore};
use crate::autodiff::init::xavier;
use crate::autodiff::matrix::{canonical_sum, Matrix};
use crate::autodiff::ops::{Broadcast, Op};
use crate::autodiff::tape::{Tape, Tensor};
use crate::error::{GadError, Result};
use crate::rng::stream;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FusionConfig {
    pub view_fusion: bool,
    pub feature_fusion: bool,
    /// Width every view is projected to before mixing.
    pub unified_dim: usize,
    /// Freeze the view weights at these values (normalized by their sum)
    /// instead of learning them; used by the weight-grid sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_view_weights: Option<Vec<f64>>,
    /// Let gradients flow through the similarity matrix instead of treating
    /// the column weights as constants.
    #[serde(default)]
    pub gradient_through_weights: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            view_fusion: true,
            feature_fusion: true,
            unified_dim: 64,
            fixed_view_weights: None,
            gradient_through_weights: false,
        }
    }
}

/// Learnable fusion state: one projection per view plus raw view logits.
pub struct FusionParams {
    config: FusionConfig,
    projections: Vec<ParamId>,
    beta: Option<ParamId>,
    num_views: usize,
}

impl FusionParams {
    pub fn new(
        store: &mut ParamStore,
        config: &FusionConfig,
        view_dims: &[usize],
        seed: u64,
    ) -> Result<FusionParams> {
        let m = view_dims.len();
        if m == 0 {
            return Err(GadError::Config("fusion needs at least one view".into()));
        }
        if let Some(w) = &config.fixed_view_weights {
            if w.len() != m {
                return Err(GadError::Config(format!("{} fixed weights for {m} views", w.len())));
            }
            if w.iter().any(|&v| v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(GadError::Config("fixed view weights must be non-negative with positive sum".into()));
            }
        }
        let (projections, beta) = if config.view_fusion {
            let projections = view_dims
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let m = xavier(d, config.unified_dim, &mut stream(seed, &format!("init/fusion/p{i}")));
                    store.add(format!("fusion/p{i}"), m)
                })
                .collect();
            let beta = if config.fixed_view_weights.is_none() {
                Some(store.add("fusion/beta", Matrix::zeros(1, m)))
            } else {
                None
            };
            (projections, beta)
        } else {
            (Vec::new(), None)
        };
        Ok(FusionParams { config: config.clone(), projections, beta, num_views: m })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.projections.clone();
        ids.extend(self.beta);
        ids
    }

    /// Combine views into `X_v`. Returns the tensor and the effective view
    /// weights (softmax of the logits, fixed weights, or uniform).
    pub fn view_fusion(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        reprs: &[Tensor],
    ) -> Result<(Tensor, Vec<f64>)> {
        if reprs.len() != self.num_views {
            return Err(GadError::shape(
                "view_fusion",
                format!("{} views, expected {}", reprs.len(), self.num_views),
            ));
        }
        let n = reprs[0].rows();
        if reprs.iter().any(|r| r.rows() != n) {
            return Err(GadError::shape("view_fusion", "views disagree on node count"));
        }
        let m = reprs.len();

        if !self.config.view_fusion {
            // Fusion disabled: a single view passes through untouched, more
            // views average with equal constant weights.
            if m == 1 {
                return Ok((reprs[0].clone(), vec![1.0]));
            }
            let w = vec![1.0 / m as f64; m];
            let weights = tape.constant(Matrix::from_vec(1, m, w.clone())?);
            let mut inputs: Vec<&Tensor> = vec![&weights];
            inputs.extend(reprs.iter());
            let xv = tape.eval(Op::WeightedSum, &inputs)?;
            return Ok((xv, w));
        }

        let projected: Vec<Tensor> = self
            .projections
            .iter()
            .zip(reprs)
            .map(|(&p, r)| {
                let pt = bp.bind(store, tape, p);
                tape.eval(Op::MatMul, &[r, &pt])
            })
            .collect::<Result<_>>()?;

        let (alpha, alpha_values) = match (&self.config.fixed_view_weights, self.beta) {
            (Some(fixed), _) => {
                let total: f64 = fixed.iter().sum();
                let w: Vec<f64> = fixed.iter().map(|v| v / total).collect();
                (tape.constant(Matrix::from_vec(1, m, w.clone())?), w)
            }
            (None, Some(beta)) => {
                let b = bp.bind(store, tape, beta);
                let a = tape.eval(Op::RowSoftmax, &[&b])?;
                let values = a.values().to_vec();
                (a, values)
            }
            (None, None) => unreachable!("beta exists whenever weights are learned"),
        };
        let mut inputs: Vec<&Tensor> = vec![&alpha];
        inputs.extend(projected.iter());
        let xv = tape.eval(Op::WeightedSum, &inputs)?;
        Ok((xv, alpha_values))
    }

    /// Apply feature-level fusion to `X_v` per the config; identity when off.
    pub fn feature_fusion(&self, tape: &Tape, xv: &Tensor) -> Result<Tensor> {
        if !self.config.feature_fusion {
            return Ok(xv.clone());
        }
        if self.config.gradient_through_weights {
            feature_fusion_on_tape(tape, xv)
        } else {
            let (_, w) = feature_weights(&xv.to_matrix())?;
            tape.eval(Op::ScaleColumns { weights: Rc::new(w) }, &[xv])
        }
    }
}

/// Column cosine-similarity matrix `S` and complementarity weights `w`,
/// `w_i = mean_j (1 - |s_ij|)` with the diagonal included.
///
/// A zero-norm column gets similarity 0 to every other column (it is treated
/// as maximally complementary) and a warning is logged.
pub fn feature_weights(xv: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let d = xv.cols();
    if d < 2 {
        return Err(GadError::shape("feature_weights", format!("needs >= 2 columns, got {d}")));
    }
    let n = xv.rows();
    let mut sq_norms = vec![0.0; d];
    for j in 0..d {
        let mut s = 0.0;
        for i in 0..n {
            let v = xv.at(i, j);
            s += v * v;
        }
        sq_norms[j] = s;
    }
    if sq_norms.iter().any(|&q| q == 0.0) {
        log::warn!("zero-norm column in fused representation; treating it as maximally complementary");
    }

    let mut sim = Matrix::zeros(d, d);
    for i in 0..d {
        sim.set(i, i, if sq_norms[i] == 0.0 { 0.0 } else { 1.0 });
        for j in i + 1..d {
            let s = if sq_norms[i] == 0.0 || sq_norms[j] == 0.0 {
                0.0
            } else {
                let mut dot = 0.0;
                for r in 0..n {
                    dot += xv.at(r, i) * xv.at(r, j);
                }
                dot / (sq_norms[i] * sq_norms[j]).sqrt()
            };
            sim.set(i, j, s);
            sim.set(j, i, s);
        }
    }

    let mut weights = vec![0.0; d];
    let mut terms = vec![0.0; d];
    for i in 0..d {
        // The diagonal is part of the mean but contributes 1 - |s_ii| = 0,
        // so weights live in [0, (d-1)/d]; a zero-norm column attains the
        // bound exactly, like a column orthogonal to all others.
        for j in 0..d {
            terms[j] = if j == i { 0.0 } else { 1.0 - sim.at(i, j).abs() };
        }
        weights[i] = canonical_sum(&mut terms) / d as f64;
    }
    Ok((sim, weights))
}

/// Column reweighting with the weights recomputed as constants; this is the
/// default route used by [`FusionParams::feature_fusion`].
pub fn feature_fusion(tape: &Tape, xv: &Tensor) -> Result<Tensor> {
    let (_, w) = feature_weights(&xv.to_matrix())?;
    tape.eval(Op::ScaleColumns { weights: Rc::new(w) }, &[xv])
}

/// Differentiable variant: the similarity matrix stays on the tape, so the
/// column weights receive gradients. Errors on zero-norm columns (the
/// division is undefined there) and at the |s| kink the subgradient is 0.
fn feature_fusion_on_tape(tape: &Tape, xv: &Tensor) -> Result<Tensor> {
    let d = xv.cols();
    if d < 2 {
        return Err(GadError::shape("feature_fusion", format!("needs >= 2 columns, got {d}")));
    }
    let norms = tape.eval(Op::L2NormColumns, &[xv])?;
    let norms_t = tape.eval(Op::Transpose, &[&norms])?;
    let denom = tape.eval(Op::MatMul, &[&norms_t, &norms])?;
    let xt = tape.eval(Op::Transpose, &[xv])?;
    let gram = tape.eval(Op::MatMul, &[&xt, xv])?;
    let sim = tape.eval(Op::Div { bcast: Broadcast::None }, &[&gram, &denom])?;
    let abs_sim = tape.eval(Op::Abs, &[&sim])?;
    let mean_abs = tape.eval(Op::RowMean, &[&abs_sim])?;
    let ones = tape.constant(Matrix::filled(d, 1, 1.0));
    let w_col = tape.eval(Op::Sub { bcast: Broadcast::None }, &[&ones, &mean_abs])?;
    let w_row = tape.eval(Op::Transpose, &[&w_col])?;
    tape.eval(Op::Mul { bcast: Broadcast::Row }, &[xv, &w_row])
}
