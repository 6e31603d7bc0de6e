//! Per-view graph encoders: two-layer GCN, GAT, and GIN.
//!
//! Each encoder maps (graph, features) to an n x hidden representation on
//! the active tape, so gradients reach both its parameters and the input
//! features.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::adam::{BoundParams, ParamId, ParamStore};
use crate::autodiff::init::xavier;
use crate::autodiff::matrix::Matrix;
use crate::autodiff::ops::{Broadcast, EdgeGroups, Op};
use crate::autodiff::sparse::SparseMatrix;
use crate::autodiff::tape::{Tape, Tensor};
use crate::error::{GadError, Result};
use crate::graph::{normalize_adjacency, Graph};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Gcn,
    Gat,
    Gin,
}

impl BackboneKind {
    pub fn name(self) -> &'static str {
        match self {
            BackboneKind::Gcn => "gcn",
            BackboneKind::Gat => "gat",
            BackboneKind::Gin => "gin",
        }
    }
}

/// Two fixed layers; hidden width and activation slopes are configurable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: BackboneKind,
    pub hidden_dim: usize,
    pub leaky_slope: f64,
    pub gin_eps: f64,
}

impl EncoderConfig {
    pub fn new(kind: BackboneKind) -> Self {
        EncoderConfig { kind, hidden_dim: 64, leaky_slope: 0.2, gin_eps: 0.0 }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden_dim = hidden;
        self
    }
}

/// Tape-ready graph structure shared by every encoder in a run.
pub struct GraphTensors {
    pub n: usize,
    pub features: Matrix,
    /// Dtilde^{-1/2} (A+I) Dtilde^{-1/2}, for GCN propagation.
    pub norm_adj: Rc<SparseMatrix>,
    /// Raw adjacency, for GIN neighbor sums.
    pub raw_adj: Rc<SparseMatrix>,
    /// Attention slots: per center node, its neighbors plus itself.
    pub attn_groups: Rc<EdgeGroups>,
    /// Center node per attention slot.
    pub attn_centers: Rc<Vec<usize>>,
    /// Neighbor node per attention slot (same order as `attn_groups`).
    pub attn_neighbors: Rc<Vec<usize>>,
    /// Segment bounds per center, shared with the attention softmax.
    pub attn_offsets: Rc<Vec<usize>>,
}

impl GraphTensors {
    pub fn new(g: &Graph) -> GraphTensors {
        let n = g.n();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut centers = Vec::new();
        offsets.push(0);
        for i in 0..n {
            // Self-loop first, then stored (ascending) neighbors.
            neighbors.push(i);
            centers.push(i);
            for &j in g.neighbors(i) {
                neighbors.push(j);
                centers.push(i);
            }
            offsets.push(neighbors.len());
        }
        GraphTensors {
            n,
            features: g.features.clone(),
            norm_adj: Rc::new(normalize_adjacency(g).0),
            raw_adj: Rc::new(g.adj.clone()),
            attn_neighbors: Rc::new(neighbors.clone()),
            attn_groups: Rc::new(EdgeGroups { offsets: offsets.clone(), neighbors }),
            attn_centers: Rc::new(centers),
            attn_offsets: Rc::new(offsets),
        }
    }
}

enum EncoderParams {
    Gcn { w1: ParamId, w2: ParamId },
    Gat { layers: [GatLayer; 2] },
    Gin { layers: [GinLayer; 2] },
}

struct GatLayer {
    w: ParamId,
    attn_self: ParamId,
    attn_neigh: ParamId,
}

struct GinLayer {
    w_in: ParamId,
    w_out: ParamId,
}

/// One view: a configured encoder with its own parameters.
pub struct ViewEncoder {
    pub config: EncoderConfig,
    params: EncoderParams,
}

impl ViewEncoder {
    /// Create and initialize; parameter streams are namespaced by
    /// `(seed, tag)` so views with distinct tags never share weights.
    pub fn new(
        store: &mut ParamStore,
        config: &EncoderConfig,
        in_dim: usize,
        seed: u64,
        tag: &str,
    ) -> ViewEncoder {
        let h = config.hidden_dim;
        let mut init = |name: &str, r: usize, c: usize| {
            let full = format!("{tag}/{name}");
            let m = xavier(r, c, &mut stream(seed, &format!("init/{full}")));
            store.add(full, m)
        };
        let params = match config.kind {
            BackboneKind::Gcn => EncoderParams::Gcn {
                w1: init("gcn.w1", in_dim, h),
                w2: init("gcn.w2", h, h),
            },
            BackboneKind::Gat => EncoderParams::Gat {
                layers: [
                    GatLayer {
                        w: init("gat.l1.w", in_dim, h),
                        attn_self: init("gat.l1.a_self", h, 1),
                        attn_neigh: init("gat.l1.a_neigh", h, 1),
                    },
                    GatLayer {
                        w: init("gat.l2.w", h, h),
                        attn_self: init("gat.l2.a_self", h, 1),
                        attn_neigh: init("gat.l2.a_neigh", h, 1),
                    },
                ],
            },
            BackboneKind::Gin => EncoderParams::Gin {
                layers: [
                    GinLayer { w_in: init("gin.l1.w_in", in_dim, h), w_out: init("gin.l1.w_out", h, h) },
                    GinLayer { w_in: init("gin.l2.w_in", h, h), w_out: init("gin.l2.w_out", h, h) },
                ],
            },
        };
        ViewEncoder { config: config.clone(), params }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match &self.params {
            EncoderParams::Gcn { w1, w2 } => vec![*w1, *w2],
            EncoderParams::Gat { layers } => layers
                .iter()
                .flat_map(|l| [l.w, l.attn_self, l.attn_neigh])
                .collect(),
            EncoderParams::Gin { layers } => {
                layers.iter().flat_map(|l| [l.w_in, l.w_out]).collect()
            }
        }
    }

    /// Encode `x` (an n x d tensor already on `tape`).
    pub fn forward(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        gt: &GraphTensors,
        x: &Tensor,
    ) -> Result<Tensor> {
        if x.rows() != gt.n {
            return Err(GadError::shape("encoder", format!("{} rows for {} nodes", x.rows(), gt.n)));
        }
        match &self.params {
            EncoderParams::Gcn { w1, w2 } => {
                let w1 = bp.bind(store, tape, *w1);
                let w2 = bp.bind(store, tape, *w2);
                let spmm = |t: &Tensor| {
                    tape.eval(Op::SpMM { sparse: Rc::clone(&gt.norm_adj) }, &[t])
                };
                let h1 = tape.eval(Op::Relu, &[&spmm(&tape.eval(Op::MatMul, &[x, &w1])?)?])?;
                spmm(&tape.eval(Op::MatMul, &[&h1, &w2])?)
            }
            EncoderParams::Gat { layers } => {
                let mut h = x.clone();
                for layer in layers {
                    h = self.gat_layer(store, tape, bp, gt, layer, &h)?.0;
                }
                Ok(h)
            }
            EncoderParams::Gin { layers } => {
                let mut h = x.clone();
                for layer in layers {
                    let neigh = tape.eval(Op::SpMM { sparse: Rc::clone(&gt.raw_adj) }, &[&h])?;
                    let scaled = tape.eval(Op::Scale { factor: 1.0 + self.config.gin_eps }, &[&h])?;
                    let agg = tape.eval(Op::Add { bcast: Broadcast::None }, &[&neigh, &scaled])?;
                    let w_in = bp.bind(store, tape, layer.w_in);
                    let w_out = bp.bind(store, tape, layer.w_out);
                    let hidden = tape.eval(Op::Relu, &[&tape.eval(Op::MatMul, &[&agg, &w_in])?])?;
                    h = tape.eval(Op::MatMul, &[&hidden, &w_out])?;
                }
                Ok(h)
            }
        }
    }

    /// Single-head attention layer with self-loops:
    /// `e_ij = leaky_relu(a_self . Wh_i + a_neigh . Wh_j)`, softmax over
    /// `j in N(i) + {i}`, then `relu(sum_j alpha_ij Wh_j)`.
    /// Returns the layer output and the attention coefficients (one per
    /// slot of `gt.attn_groups`).
    fn gat_layer(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        gt: &GraphTensors,
        layer: &GatLayer,
        h: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        let w = bp.bind(store, tape, layer.w);
        let a_self = bp.bind(store, tape, layer.attn_self);
        let a_neigh = bp.bind(store, tape, layer.attn_neigh);
        let wh = tape.eval(Op::MatMul, &[h, &w])?;
        let score_self = tape.eval(Op::MatMul, &[&wh, &a_self])?;
        let score_neigh = tape.eval(Op::MatMul, &[&wh, &a_neigh])?;
        let per_center =
            tape.eval(Op::GatherRows { indices: Rc::clone(&gt.attn_centers) }, &[&score_self])?;
        let per_neigh = tape.eval(
            Op::GatherRows { indices: Rc::clone(&gt.attn_neighbors) },
            &[&score_neigh],
        )?;
        let logits = tape.eval(
            Op::LeakyRelu { slope: self.config.leaky_slope },
            &[&tape.eval(Op::Add { bcast: Broadcast::None }, &[&per_center, &per_neigh])?],
        )?;
        let alpha =
            tape.eval(Op::SegmentSoftmax { offsets: Rc::clone(&gt.attn_offsets) }, &[&logits])?;
        let agg =
            tape.eval(Op::EdgeAggregate { groups: Rc::clone(&gt.attn_groups) }, &[&alpha, &wh])?;
        Ok((tape.eval(Op::Relu, &[&agg])?, alpha))
    }

    /// Attention coefficients of GAT layer `layer_idx` (0 or 1) for input
    /// features `x`, one value per slot of `gt.attn_groups`.
    pub fn attention(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        gt: &GraphTensors,
        x: &Tensor,
        layer_idx: usize,
    ) -> Result<Tensor> {
        let EncoderParams::Gat { layers } = &self.params else {
            return Err(GadError::Config("attention is only defined for GAT encoders".into()));
        };
        let mut h = x.clone();
        for (k, layer) in layers.iter().enumerate() {
            let (out, alpha) = self.gat_layer(store, tape, bp, gt, layer, &h)?;
            if k == layer_idx {
                return Ok(alpha);
            }
            h = out;
        }
        Err(GadError::Config(format!("GAT has 2 layers, asked for layer {layer_idx}")))
    }
}

/// Run every configured encoder on one tape; the feature leaf is shared.
pub fn encode_views(
    encoders: &[ViewEncoder],
    store: &ParamStore,
    tape: &Tape,
    bp: &mut BoundParams,
    gt: &GraphTensors,
    features: &Tensor,
) -> Result<Vec<Tensor>> {
    if encoders.is_empty() {
        return Err(GadError::Config("at least one view encoder is required".into()));
    }
    encoders.iter().map(|e| e.forward(store, tape, bp, gt, features)).collect()
}
