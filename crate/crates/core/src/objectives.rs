//! The three objective families: label-oriented (weighted BCE on known
//! labels), reconstruction-oriented (attribute + structure decoders), and
//! SSL-oriented (local-global contrast with a bilinear discriminator,
//! followed by a fine-tuned linear scorer).
//!
//! Exactly one objective is active per run; they are alternative readings of
//! the same task and do not stack.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::adam::{BoundParams, ParamId, ParamStore};
use crate::autodiff::init::xavier;
use crate::autodiff::matrix::Matrix;
use crate::autodiff::ops::{Broadcast, Op};
use crate::autodiff::sparse::SparseMatrix;
use crate::autodiff::tape::{Tape, Tensor};
use crate::error::{GadError, Result};
use crate::graph::Split;
use crate::rng::stream;

/// Class-balance factor for the weighted cross entropy: a number, or
/// `"auto"` = (#train normals) / (#train anomalies).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum LambdaSpec {
    Fixed(f64),
    Named(String),
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Named("auto".into())
    }
}

impl LambdaSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LambdaSpec::Fixed(v) if *v > 0.0 => Ok(()),
            LambdaSpec::Fixed(v) => Err(GadError::Config(format!("lambda must be positive, got {v}"))),
            LambdaSpec::Named(s) if s == "auto" => Ok(()),
            LambdaSpec::Named(s) => Err(GadError::Config(format!("unknown lambda spec {s:?}"))),
        }
    }

    /// Resolve against the training labels.
    pub fn resolve(&self, y: &[u8], train_idx: &[usize]) -> Result<f64> {
        self.validate()?;
        match self {
            LambdaSpec::Fixed(v) => Ok(*v),
            LambdaSpec::Named(_) => {
                let pos = train_idx.iter().filter(|&&i| y[i] == 1).count();
                let neg = train_idx.len() - pos;
                if pos == 0 {
                    return Err(GadError::Config(
                        "training set has no anomalies; lambda=\"auto\" is undefined, pass an explicit lambda"
                            .into(),
                    ));
                }
                Ok(neg as f64 / pos as f64)
            }
        }
    }
}

fn default_recon_lambda() -> f64 {
    1.0
}

fn default_dense_limit() -> usize {
    5000
}

fn default_embed_dim() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Label {
        #[serde(default)]
        lambda: LambdaSpec,
    },
    Reconstruction {
        #[serde(default = "default_recon_lambda")]
        lambda: f64,
        #[serde(default = "default_dense_limit")]
        dense_limit: usize,
        #[serde(default)]
        row_sampled_structure: bool,
    },
    Ssl {
        #[serde(default = "default_embed_dim")]
        embed_dim: usize,
        #[serde(default)]
        lambda: LambdaSpec,
    },
}

impl ObjectiveConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ObjectiveConfig::Label { .. } => "label",
            ObjectiveConfig::Reconstruction { .. } => "reconstruction",
            ObjectiveConfig::Ssl { .. } => "ssl",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ObjectiveConfig::Label { lambda } => lambda.validate(),
            ObjectiveConfig::Reconstruction { lambda, dense_limit, .. } => {
                if *lambda < 0.0 {
                    return Err(GadError::Config("reconstruction lambda must be >= 0".into()));
                }
                if *dense_limit == 0 {
                    return Err(GadError::Config("dense_limit must be positive".into()));
                }
                Ok(())
            }
            ObjectiveConfig::Ssl { embed_dim, lambda } => {
                if *embed_dim == 0 {
                    return Err(GadError::Config("ssl embed_dim must be positive".into()));
                }
                lambda.validate()
            }
        }
    }
}

/// Two linear maps with a relu between; biases start at zero.
struct Mlp {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl Mlp {
    fn new(
        store: &mut ParamStore,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        seed: u64,
        tag: &str,
    ) -> Mlp {
        let mut weight = |name: &str, r: usize, c: usize| {
            let full = format!("{tag}/{name}");
            let m = xavier(r, c, &mut stream(seed, &format!("init/{full}")));
            store.add(full, m)
        };
        let w1 = weight("w1", in_dim, hidden);
        let w2 = weight("w2", hidden, out_dim);
        let b1 = store.add(format!("{tag}/b1"), Matrix::zeros(1, hidden));
        let b2 = store.add(format!("{tag}/b2"), Matrix::zeros(1, out_dim));
        Mlp { w1, b1, w2, b2 }
    }

    fn ids(&self) -> Vec<ParamId> {
        vec![self.w1, self.b1, self.w2, self.b2]
    }

    fn forward(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        x: &Tensor,
    ) -> Result<Tensor> {
        let w1 = bp.bind(store, tape, self.w1);
        let b1 = bp.bind(store, tape, self.b1);
        let w2 = bp.bind(store, tape, self.w2);
        let b2 = bp.bind(store, tape, self.b2);
        let h = tape.eval(
            Op::Relu,
            &[&tape.eval(
                Op::Add { bcast: Broadcast::Row },
                &[&tape.eval(Op::MatMul, &[x, &w1])?, &b1],
            )?],
        )?;
        tape.eval(Op::Add { bcast: Broadcast::Row }, &[&tape.eval(Op::MatMul, &[&h, &w2])?, &b2])
    }
}

/// Losses and node scores produced by one objective forward pass.
pub struct ObjectiveOutput {
    /// Loss over the training rows, on the tape.
    pub train_loss: Tensor,
    /// Same loss formula over the validation rows, off the tape.
    pub val_loss: f64,
    /// Per-node anomaly score, higher = more anomalous.
    pub scores: Vec<f64>,
}

const BCE_EPS: f64 = 1e-12;

/// Off-tape weighted BCE over a row subset; mirrors the tape primitive.
/// An empty subset contributes no signal and reads as zero loss.
fn weighted_bce_subset(p: &[f64], idx: &[usize], y: &[u8], lambda: f64) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let mut loss = 0.0;
    for &i in idx {
        let pi = p[i].clamp(BCE_EPS, 1.0 - BCE_EPS);
        if y[i] == 1 {
            loss -= lambda * pi.ln();
        } else {
            loss -= (1.0 - pi).ln();
        }
    }
    loss / idx.len() as f64
}

fn gather_const(src: &Matrix, idx: &[usize]) -> Matrix {
    let mut rows = Vec::with_capacity(idx.len());
    for &i in idx {
        rows.push(src.row(i).to_vec());
    }
    Matrix::from_rows(&rows).expect("same width rows")
}

// ---------------------------------------------------------------------------
// Label-oriented
// ---------------------------------------------------------------------------

pub struct LabelHead {
    mlp: Mlp,
}

impl LabelHead {
    pub fn new(store: &mut ParamStore, rep_dim: usize, seed: u64) -> LabelHead {
        LabelHead { mlp: Mlp::new(store, rep_dim, 32, 1, seed, "head/label") }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.mlp.ids()
    }

    /// `p = sigmoid(MLP(X_f))`; loss is the class-weighted BCE of the
    /// training rows. Scores are `p` for every node.
    pub fn forward(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        xf: &Tensor,
        y: &[u8],
        split: &Split,
        lambda: f64,
    ) -> Result<ObjectiveOutput> {
        let p = tape.eval(Op::Sigmoid, &[&self.mlp.forward(store, tape, bp, xf)?])?;
        let p_train =
            tape.eval(Op::GatherRows { indices: Rc::new(split.train_idx.clone()) }, &[&p])?;
        let targets: Vec<f64> = split.train_idx.iter().map(|&i| y[i] as f64).collect();
        let weights: Vec<f64> =
            split.train_idx.iter().map(|&i| if y[i] == 1 { lambda } else { 1.0 }).collect();
        let train_loss = tape.eval(
            Op::BceWithWeights { targets: Rc::new(targets), weights: Rc::new(weights) },
            &[&p_train],
        )?;
        let scores = p.values().to_vec();
        let val_loss = weighted_bce_subset(&scores, &split.val_idx, y, lambda);
        Ok(ObjectiveOutput { train_loss, val_loss, scores })
    }

    /// Scores without a loss: `p` for every node.
    pub fn score(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        xf: &Tensor,
    ) -> Result<Vec<f64>> {
        let p = tape.eval(Op::Sigmoid, &[&self.mlp.forward(store, tape, bp, xf)?])?;
        Ok(p.values().to_vec())
    }
}

/// Hard labels at the 0.5 threshold (label objective only).
pub fn hard_labels(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&p| u8::from(p > 0.5)).collect()
}

// ---------------------------------------------------------------------------
// Reconstruction-oriented
// ---------------------------------------------------------------------------

pub struct ReconHead {
    attr: Mlp,
    stru: Mlp,
    pub lambda: f64,
}

enum StruMode {
    /// Full n x n structure reconstruction on the tape.
    Dense { train: Matrix, val: Matrix },
    /// Structure loss restricted to fixed sampled row sets.
    Sampled { train_rows: Vec<usize>, val_rows: Vec<usize>, train: Matrix, val: Matrix },
}

/// Constant per-run targets for the reconstruction loss.
pub struct ReconTargets {
    features: Matrix,
    adj: SparseMatrix,
    train_features: Matrix,
    val_features: Matrix,
    mode: StruMode,
}

/// Rows of the (implicitly dense) adjacency, gathered from CSR.
fn dense_adj_rows(adj: &SparseMatrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), adj.cols());
    for (k, &i) in rows.iter().enumerate() {
        let (cols, vals) = adj.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            out.set(k, j, v);
        }
    }
    out
}

impl ReconTargets {
    /// Prepare loss targets. Graphs larger than `dense_limit` refuse the
    /// dense route; with `row_sampled` the structure loss instead uses a
    /// fixed sample of rows drawn from the `recon/rows` stream.
    pub fn new(
        features: &Matrix,
        adj: &SparseMatrix,
        split: &Split,
        dense_limit: usize,
        row_sampled: bool,
        seed: u64,
    ) -> Result<ReconTargets> {
        let n = features.rows();
        let mode = if !row_sampled {
            if n > dense_limit {
                return Err(GadError::Config(format!(
                    "reconstruction would densify an {n}x{n} structure matrix (dense_limit={dense_limit}); \
                     enable row_sampled_structure to train on sampled rows"
                )));
            }
            StruMode::Dense {
                train: dense_adj_rows(adj, &split.train_idx),
                val: dense_adj_rows(adj, &split.val_idx),
            }
        } else {
            let mut rng = stream(seed, "recon/rows");
            let sample = |idx: &[usize], rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
                use rand::seq::IndexedRandom;
                let take = idx.len().min(256);
                let mut rows: Vec<usize> =
                    idx.choose_multiple(rng, take).copied().collect();
                rows.sort_unstable();
                rows
            };
            let train_rows = sample(&split.train_idx, &mut rng);
            let val_rows = sample(&split.val_idx, &mut rng);
            StruMode::Sampled {
                train: dense_adj_rows(adj, &train_rows),
                val: dense_adj_rows(adj, &val_rows),
                train_rows,
                val_rows,
            }
        };
        Ok(ReconTargets {
            train_features: gather_const(features, &split.train_idx),
            val_features: gather_const(features, &split.val_idx),
            features: features.clone(),
            adj: adj.clone(),
            mode,
        })
    }
}

impl ReconHead {
    pub fn new(store: &mut ParamStore, rep_dim: usize, feat_dim: usize, lambda: f64, seed: u64) -> ReconHead {
        ReconHead {
            attr: Mlp::new(store, rep_dim, 64, feat_dim, seed, "head/recon.attr"),
            stru: Mlp::new(store, rep_dim, 64, 64, seed, "head/recon.stru"),
            lambda,
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.attr.ids();
        ids.extend(self.stru.ids());
        ids
    }

    /// Decode attributes and structure from `X_f`; the loss is
    /// `||X_attr - X||_F + lambda * ||A_stru - A||_F` over the training rows
    /// (or the sampled structure rows), with no labels involved.
    pub fn forward(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        xf: &Tensor,
        targets: &ReconTargets,
        split: &Split,
    ) -> Result<ObjectiveOutput> {
        let x_attr = self.attr.forward(store, tape, bp, xf)?;
        let z = self.stru.forward(store, tape, bp, xf)?;

        let attr_tr = tape
            .eval(Op::GatherRows { indices: Rc::new(split.train_idx.clone()) }, &[&x_attr])?;
        let attr_target = tape.constant(targets.train_features.clone());
        let attr_loss = tape.eval(Op::FrobeniusNormDiff, &[&attr_tr, &attr_target])?;

        let zt = tape.eval(Op::Transpose, &[&z])?;
        let stru_pred = |rows: &[usize]| -> Result<Tensor> {
            let z_rows = tape.eval(Op::GatherRows { indices: Rc::new(rows.to_vec()) }, &[&z])?;
            tape.eval(Op::Sigmoid, &[&tape.eval(Op::MatMul, &[&z_rows, &zt])?])
        };
        let (stru_loss, val_stru, a_stru_full) = match &targets.mode {
            StruMode::Dense { train, val, .. } => {
                let a_stru = tape.eval(Op::Sigmoid, &[&tape.eval(Op::MatMul, &[&z, &zt])?])?;
                let pred_tr = tape
                    .eval(Op::GatherRows { indices: Rc::new(split.train_idx.clone()) }, &[&a_stru])?;
                let loss =
                    tape.eval(Op::FrobeniusNormDiff, &[&pred_tr, &tape.constant(train.clone())])?;
                let val = frob_rows(&a_stru, &split.val_idx, val);
                (loss, val, Some(a_stru))
            }
            StruMode::Sampled { train_rows, val_rows, train, val } => {
                let pred_tr = stru_pred(train_rows)?;
                let loss =
                    tape.eval(Op::FrobeniusNormDiff, &[&pred_tr, &tape.constant(train.clone())])?;
                let pred_val = stru_pred(val_rows)?;
                let mut s = 0.0;
                for k in 0..val_rows.len() {
                    for j in 0..pred_val.cols() {
                        let d = pred_val.at(k, j) - val.at(k, j);
                        s += d * d;
                    }
                }
                (loss, s.sqrt(), None)
            }
        };
        let train_loss = tape.eval(
            Op::Add { bcast: Broadcast::None },
            &[&attr_loss, &tape.eval(Op::Scale { factor: self.lambda }, &[&stru_loss])?],
        )?;

        let val_loss =
            frob_rows(&x_attr, &split.val_idx, &targets.val_features) + self.lambda * val_stru;
        let scores = self.node_scores(
            &x_attr,
            a_stru_full.as_ref(),
            &z,
            &targets.features,
            &targets.adj,
        );
        Ok(ObjectiveOutput { train_loss, val_loss, scores })
    }

    /// Scores without a loss; structure errors come straight from `z`.
    pub fn score(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        xf: &Tensor,
        features: &Matrix,
        adj: &SparseMatrix,
    ) -> Result<Vec<f64>> {
        let x_attr = self.attr.forward(store, tape, bp, xf)?;
        let z = self.stru.forward(store, tape, bp, xf)?;
        Ok(self.node_scores(&x_attr, None, &z, features, adj))
    }

    /// Per-node `||x_attr_i - x_i|| + lambda * ||a_stru_i - a_i||`. Without a
    /// dense structure matrix the row errors are recomputed from `z` directly.
    fn node_scores(
        &self,
        x_attr: &Tensor,
        a_stru: Option<&Tensor>,
        z: &Tensor,
        features: &Matrix,
        adj: &SparseMatrix,
    ) -> Vec<f64> {
        let n = x_attr.rows();
        let d_h = z.cols();
        let mut scores = Vec::with_capacity(n);
        for i in 0..n {
            let mut sa = 0.0;
            for j in 0..features.cols() {
                let diff = x_attr.at(i, j) - features.at(i, j);
                sa += diff * diff;
            }
            let mut ss = 0.0;
            match a_stru {
                Some(full) => {
                    for j in 0..n {
                        let diff = full.at(i, j) - adj.get(i, j);
                        ss += diff * diff;
                    }
                }
                None => {
                    for j in 0..n {
                        let mut dot = 0.0;
                        for k in 0..d_h {
                            dot += z.at(i, k) * z.at(j, k);
                        }
                        let pred = 1.0 / (1.0 + (-dot).exp());
                        let diff = pred - adj.get(i, j);
                        ss += diff * diff;
                    }
                }
            }
            scores.push(sa.sqrt() + self.lambda * ss.sqrt());
        }
        scores
    }
}

fn frob_rows(pred: &Tensor, idx: &[usize], target: &Matrix) -> f64 {
    let mut s = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        for j in 0..target.cols() {
            let d = pred.at(i, j) - target.at(k, j);
            s += d * d;
        }
    }
    s.sqrt()
}

// ---------------------------------------------------------------------------
// SSL-oriented (local-global contrast, then a fine-tuned linear scorer)
// ---------------------------------------------------------------------------

pub struct SslHead {
    proj_w: ParamId,
    proj_b: ParamId,
    disc_w: ParamId,
    scorer_w: ParamId,
    scorer_b: ParamId,
    pub embed_dim: usize,
}

impl SslHead {
    pub fn new(store: &mut ParamStore, rep_dim: usize, embed_dim: usize, seed: u64) -> SslHead {
        let mut weight = |name: &str, r: usize, c: usize| {
            let full = format!("head/ssl.{name}");
            let m = xavier(r, c, &mut stream(seed, &format!("init/{full}")));
            store.add(full, m)
        };
        let proj_w = weight("proj_w", rep_dim, embed_dim);
        let disc_w = weight("disc_w", embed_dim, embed_dim);
        let scorer_w = weight("scorer_w", embed_dim, 1);
        let proj_b = store.add("head/ssl.proj_b", Matrix::zeros(1, embed_dim));
        let scorer_b = store.add("head/ssl.scorer_b", Matrix::zeros(1, 1));
        SslHead { proj_w, proj_b, disc_w, scorer_w, scorer_b, embed_dim }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.proj_w, self.proj_b, self.disc_w, self.scorer_w, self.scorer_b]
    }

    /// Parameters trained from scratch during fine-tuning (the linear scorer).
    pub fn scorer_ids(&self) -> Vec<ParamId> {
        vec![self.scorer_w, self.scorer_b]
    }

    fn embed(&self, tape: &Tape, x: &Tensor, proj_w: &Tensor, proj_b: &Tensor) -> Result<Tensor> {
        tape.eval(
            Op::Tanh,
            &[&tape.eval(
                Op::Add { bcast: Broadcast::Row },
                &[&tape.eval(Op::MatMul, &[x, proj_w])?, proj_b],
            )?],
        )
    }

    /// Contrastive pretraining pass. `corrupt_perm` row-shuffles `X_f` to
    /// build the negative views; the summary `s` is the sigmoid of the mean
    /// embedding, and `D(h, s) = sigmoid(h^T W_D s)`.
    pub fn contrast_forward(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        xf: &Tensor,
        corrupt_perm: &[usize],
        split: &Split,
    ) -> Result<ObjectiveOutput> {
        if xf.rows() < 2 {
            return Err(GadError::Data(
                "ssl corruption needs at least 2 nodes (the permutation of 1 node is the identity)"
                    .into(),
            ));
        }
        let proj_w = bp.bind(store, tape, self.proj_w);
        let proj_b = bp.bind(store, tape, self.proj_b);
        let h = self.embed(tape, xf, &proj_w, &proj_b)?;
        let corrupted =
            tape.eval(Op::GatherRows { indices: Rc::new(corrupt_perm.to_vec()) }, &[xf])?;
        let h_neg = self.embed(tape, &corrupted, &proj_w, &proj_b)?;

        let summary = tape.eval(Op::Sigmoid, &[&tape.eval(Op::ColumnMean, &[&h])?])?;
        let s_col = tape.eval(Op::Transpose, &[&summary])?;
        let disc_w = bp.bind(store, tape, self.disc_w);
        let ws = tape.eval(Op::MatMul, &[&disc_w, &s_col])?;
        let d_pos = tape.eval(Op::Sigmoid, &[&tape.eval(Op::MatMul, &[&h, &ws])?])?;
        let d_neg = tape.eval(Op::Sigmoid, &[&tape.eval(Op::MatMul, &[&h_neg, &ws])?])?;

        let tr = Rc::new(split.train_idx.clone());
        let pos_tr = tape.eval(Op::GatherRows { indices: Rc::clone(&tr) }, &[&d_pos])?;
        let neg_tr = tape.eval(Op::GatherRows { indices: tr }, &[&d_neg])?;
        let k = split.train_idx.len();
        let ones = Rc::new(vec![1.0; k]);
        let pos_loss = tape.eval(
            Op::BceWithWeights { targets: Rc::new(vec![1.0; k]), weights: Rc::clone(&ones) },
            &[&pos_tr],
        )?;
        let neg_loss = tape.eval(
            Op::BceWithWeights { targets: Rc::new(vec![0.0; k]), weights: ones },
            &[&neg_tr],
        )?;
        let train_loss = tape.eval(
            Op::Scale { factor: 0.5 },
            &[&tape.eval(Op::Add { bcast: Broadcast::None }, &[&pos_loss, &neg_loss])?],
        )?;

        let val_loss = {
            let mut s = 0.0;
            for &i in &split.val_idx {
                let dp = d_pos.at(i, 0).clamp(BCE_EPS, 1.0 - BCE_EPS);
                let dn = d_neg.at(i, 0).clamp(BCE_EPS, 1.0 - BCE_EPS);
                s -= dp.ln() + (1.0 - dn).ln();
            }
            s / (2 * split.val_idx.len()) as f64
        };

        // Pretraining has no anomaly scores yet; the discriminator affinity
        // is reported for inspection only.
        let scores = d_pos.values().to_vec();
        Ok(ObjectiveOutput { train_loss, val_loss, scores })
    }

    /// Fine-tuning pass: a linear scorer on the embedding, trained with the
    /// class-weighted BCE; the rest of the network follows at a reduced rate.
    pub fn finetune_forward(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        xf: &Tensor,
        y: &[u8],
        split: &Split,
        lambda: f64,
    ) -> Result<ObjectiveOutput> {
        let proj_w = bp.bind(store, tape, self.proj_w);
        let proj_b = bp.bind(store, tape, self.proj_b);
        let h = self.embed(tape, xf, &proj_w, &proj_b)?;
        let w = bp.bind(store, tape, self.scorer_w);
        let b = bp.bind(store, tape, self.scorer_b);
        let logits =
            tape.eval(Op::Add { bcast: Broadcast::Row }, &[&tape.eval(Op::MatMul, &[&h, &w])?, &b])?;
        let p = tape.eval(Op::Sigmoid, &[&logits])?;
        let p_train =
            tape.eval(Op::GatherRows { indices: Rc::new(split.train_idx.clone()) }, &[&p])?;
        let targets: Vec<f64> = split.train_idx.iter().map(|&i| y[i] as f64).collect();
        let weights: Vec<f64> =
            split.train_idx.iter().map(|&i| if y[i] == 1 { lambda } else { 1.0 }).collect();
        let train_loss = tape.eval(
            Op::BceWithWeights { targets: Rc::new(targets), weights: Rc::new(weights) },
            &[&p_train],
        )?;
        let scores = p.values().to_vec();
        let val_loss = weighted_bce_subset(&scores, &split.val_idx, y, lambda);
        Ok(ObjectiveOutput { train_loss, val_loss, scores })
    }

    /// Fine-tuned classifier probabilities, no loss.
    pub fn score(
        &self,
        store: &ParamStore,
        tape: &Tape,
        bp: &mut BoundParams,
        xf: &Tensor,
    ) -> Result<Vec<f64>> {
        let proj_w = bp.bind(store, tape, self.proj_w);
        let proj_b = bp.bind(store, tape, self.proj_b);
        let h = self.embed(tape, xf, &proj_w, &proj_b)?;
        let w = bp.bind(store, tape, self.scorer_w);
        let b = bp.bind(store, tape, self.scorer_b);
        let logits =
            tape.eval(Op::Add { bcast: Broadcast::Row }, &[&tape.eval(Op::MatMul, &[&h, &w])?, &b])?;
        let p = tape.eval(Op::Sigmoid, &[&logits])?;
        Ok(p.values().to_vec())
    }
}
