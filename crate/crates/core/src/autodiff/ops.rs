//! Primitive kinds: forward kernels and their vector-Jacobian products.
//!
//! Reductions that run over graph structure (sparse products, attention
//! denominators, neighbor aggregation) fold their addends in a canonical
//! value order so encoder outputs are bit-identical under node relabeling.

use std::rc::Rc;

use crate::autodiff::matrix::{canonical_sum, Matrix};
use crate::autodiff::sparse::SparseMatrix;
use crate::error::{GadError, Result};

/// How the second operand of a binary elementwise op is expanded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Broadcast {
    /// Same shape as the first operand.
    None,
    /// Second operand is 1 x n, repeated across rows.
    Row,
    /// Second operand is m x 1, repeated across columns.
    Col,
}

/// Edge slots grouped by output row; `neighbors[k]` is the source row
/// feeding slot `k`, and `offsets[r]..offsets[r+1]` are the slots of
/// output row `r`.
#[derive(Clone, Debug)]
pub struct EdgeGroups {
    pub offsets: Vec<usize>,
    pub neighbors: Vec<usize>,
}

impl EdgeGroups {
    pub fn num_slots(&self) -> usize {
        self.neighbors.len()
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Every primitive the tape can record.
#[derive(Clone, Debug)]
pub enum Op {
    /// Parameter, constant, or input matrix.
    Leaf,
    MatMul,
    /// Sparse operand is a constant attribute; only the dense input takes gradient.
    SpMM { sparse: Rc<SparseMatrix> },
    Add { bcast: Broadcast },
    Sub { bcast: Broadcast },
    Mul { bcast: Broadcast },
    Div { bcast: Broadcast },
    /// Column j scaled by the constant `weights[j]`.
    ScaleColumns { weights: Rc<Vec<f64>> },
    Scale { factor: f64 },
    /// Inputs `[w (1xm), V_1..V_m]`; output `sum_i w_i * V_i`.
    WeightedSum,
    Relu,
    LeakyRelu { slope: f64 },
    Sigmoid,
    Tanh,
    Abs,
    Sqrt,
    RowSoftmax,
    /// Softmax over contiguous row ranges of an E x 1 input.
    SegmentSoftmax { offsets: Rc<Vec<usize>> },
    GatherRows { indices: Rc<Vec<usize>> },
    /// Inputs `[alpha (Ex1), H (nxd)]`; output row r is
    /// `sum_{k in slots(r)} alpha_k * H[neighbors[k]]`.
    EdgeAggregate { groups: Rc<EdgeGroups> },
    RowMean,
    ColumnMean,
    Sum,
    L2NormColumns,
    ConcatColumns,
    Transpose,
    /// Inputs `[pred, target]`; mean of squared differences.
    Mse,
    /// Inputs `[a, b]`; Frobenius norm of `a - b`.
    FrobeniusNormDiff,
    /// Input `p (Nx1)` of probabilities; targets and per-sample weights are
    /// constant attributes. `-(1/N) * sum_i w_i * (y_i ln p_i + (1-y_i) ln(1-p_i))`.
    BceWithWeights { targets: Rc<Vec<f64>>, weights: Rc<Vec<f64>> },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::SpMM { .. } => "sparse-dense-matmul",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "subtract",
            Op::Mul { .. } => "elementwise-multiply",
            Op::Div { .. } => "elementwise-divide",
            Op::ScaleColumns { .. } => "scale-columns",
            Op::Scale { .. } => "scale",
            Op::WeightedSum => "weighted-sum",
            Op::Relu => "relu",
            Op::LeakyRelu { .. } => "leaky-relu",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Abs => "abs",
            Op::Sqrt => "sqrt",
            Op::RowSoftmax => "row-softmax",
            Op::SegmentSoftmax { .. } => "segment-softmax",
            Op::GatherRows { .. } => "gather-rows",
            Op::EdgeAggregate { .. } => "edge-aggregate",
            Op::RowMean => "row-mean",
            Op::ColumnMean => "column-mean",
            Op::Sum => "sum",
            Op::L2NormColumns => "l2-norm-columns",
            Op::ConcatColumns => "concat-columns",
            Op::Transpose => "transpose",
            Op::Mse => "mean-squared-error",
            Op::FrobeniusNormDiff => "frobenius-norm-diff",
            Op::BceWithWeights { .. } => "binary-cross-entropy-with-weights",
        }
    }
}

/// Read-only view of a recorded tensor during kernel evaluation.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl View<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn to_matrix(self) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.data.to_vec()).expect("view is consistent")
    }
}

fn arity_err(op: &Op, got: usize) -> GadError {
    GadError::shape(op_static_name(op), format!("wrong input count {got}"))
}

// thiserror wants 'static op names; route through Op::name.
fn op_static_name(op: &Op) -> &'static str {
    op.name()
}

fn expect_same_shape(op: &Op, a: View, b: View) -> Result<()> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(GadError::shape(
            op_static_name(op),
            format!("{}x{} vs {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    Ok(())
}

fn bcast_shape_ok(bcast: Broadcast, a: View, b: View) -> bool {
    match bcast {
        Broadcast::None => a.rows == b.rows && a.cols == b.cols,
        Broadcast::Row => b.rows == 1 && b.cols == a.cols,
        Broadcast::Col => b.cols == 1 && b.rows == a.rows,
    }
}

#[inline]
fn bcast_at(bcast: Broadcast, b: View, i: usize, j: usize) -> f64 {
    match bcast {
        Broadcast::None => b.at(i, j),
        Broadcast::Row => b.data[j],
        Broadcast::Col => b.data[i],
    }
}

/// Reduce a full-shape gradient back onto a broadcast operand.
fn reduce_bcast(bcast: Broadcast, full: &Matrix) -> Matrix {
    match bcast {
        Broadcast::None => full.clone(),
        Broadcast::Row => {
            let mut out = Matrix::zeros(1, full.cols());
            for i in 0..full.rows() {
                for j in 0..full.cols() {
                    out.set(0, j, out.at(0, j) + full.at(i, j));
                }
            }
            out
        }
        Broadcast::Col => {
            let mut out = Matrix::zeros(full.rows(), 1);
            for i in 0..full.rows() {
                for j in 0..full.cols() {
                    out.set(i, 0, out.at(i, 0) + full.at(i, j));
                }
            }
            out
        }
    }
}

fn matmul_kernel(a: View, b: View) -> Matrix {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in arow.iter().enumerate() {
            let brow = &b.data[kk * n..(kk + 1) * n];
            for j in 0..n {
                orow[j] += aik * brow[j];
            }
        }
    }
    Matrix::from_vec(m, n, out).expect("matmul shape")
}

fn spmm_kernel(s: &SparseMatrix, x: View) -> Matrix {
    let d = x.cols;
    let mut out = Matrix::zeros(s.rows(), d);
    let mut scratch: Vec<f64> = Vec::new();
    for i in 0..s.rows() {
        let (cols, vals) = s.row(i);
        for c in 0..d {
            scratch.clear();
            scratch.extend(cols.iter().zip(vals).map(|(&j, &v)| v * x.at(j, c)));
            out.set(i, c, canonical_sum(&mut scratch));
        }
    }
    out
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const BCE_EPS: f64 = 1e-12;

/// Evaluate a primitive; shape checks included, finiteness checked by the tape.
pub(crate) fn forward(op: &Op, inputs: &[View]) -> Result<Matrix> {
    match op {
        Op::Leaf => Err(GadError::Tape("leaf nodes are not evaluated".into())),
        Op::MatMul => {
            let [a, b] = two(op, inputs)?;
            if a.cols != b.rows {
                return Err(GadError::shape(
                    op_static_name(op),
                    format!("{}x{} * {}x{}", a.rows, a.cols, b.rows, b.cols),
                ));
            }
            Ok(matmul_kernel(a, b))
        }
        Op::SpMM { sparse } => {
            let [x] = one(op, inputs)?;
            if sparse.cols() != x.rows {
                return Err(GadError::shape(
                    op_static_name(op),
                    format!("sparse {}x{} * dense {}x{}", sparse.rows(), sparse.cols(), x.rows, x.cols),
                ));
            }
            Ok(spmm_kernel(sparse, x))
        }
        Op::Add { bcast } | Op::Sub { bcast } | Op::Mul { bcast } | Op::Div { bcast } => {
            let [a, b] = two(op, inputs)?;
            if !bcast_shape_ok(*bcast, a, b) {
                return Err(GadError::shape(
                    op_static_name(op),
                    format!("{}x{} with {}x{} ({bcast:?})", a.rows, a.cols, b.rows, b.cols),
                ));
            }
            let mut out = Matrix::zeros(a.rows, a.cols);
            for i in 0..a.rows {
                for j in 0..a.cols {
                    let x = a.at(i, j);
                    let y = bcast_at(*bcast, b, i, j);
                    let v = match op {
                        Op::Add { .. } => x + y,
                        Op::Sub { .. } => x - y,
                        Op::Mul { .. } => x * y,
                        _ => x / y,
                    };
                    out.set(i, j, v);
                }
            }
            Ok(out)
        }
        Op::ScaleColumns { weights } => {
            let [a] = one(op, inputs)?;
            if weights.len() != a.cols {
                return Err(GadError::shape(
                    op_static_name(op),
                    format!("{} weights for {} columns", weights.len(), a.cols),
                ));
            }
            let mut out = Matrix::zeros(a.rows, a.cols);
            for i in 0..a.rows {
                for j in 0..a.cols {
                    out.set(i, j, weights[j] * a.at(i, j));
                }
            }
            Ok(out)
        }
        Op::Scale { factor } => {
            let [a] = one(op, inputs)?;
            Ok(a.to_matrix().map(|v| factor * v))
        }
        Op::WeightedSum => {
            if inputs.len() < 2 {
                return Err(arity_err(op, inputs.len()));
            }
            let w = inputs[0];
            let m = inputs.len() - 1;
            if w.rows != 1 || w.cols != m {
                return Err(GadError::shape(
                    op_static_name(op),
                    format!("weights are {}x{} for {m} views", w.rows, w.cols),
                ));
            }
            let first = inputs[1];
            for v in &inputs[2..] {
                expect_same_shape(op, first, *v)?;
            }
            let mut out = Matrix::zeros(first.rows, first.cols);
            for (i, v) in inputs[1..].iter().enumerate() {
                let wi = w.data[i];
                for (o, &x) in out.data_mut().iter_mut().zip(v.data) {
                    *o += wi * x;
                }
            }
            Ok(out)
        }
        Op::Relu => Ok(one(op, inputs)?[0].to_matrix().map(|v| v.max(0.0))),
        Op::LeakyRelu { slope } => {
            let s = *slope;
            Ok(one(op, inputs)?[0].to_matrix().map(|v| if v > 0.0 { v } else { s * v }))
        }
        Op::Sigmoid => Ok(one(op, inputs)?[0].to_matrix().map(stable_sigmoid)),
        Op::Tanh => Ok(one(op, inputs)?[0].to_matrix().map(f64::tanh)),
        Op::Abs => Ok(one(op, inputs)?[0].to_matrix().map(f64::abs)),
        Op::Sqrt => Ok(one(op, inputs)?[0].to_matrix().map(f64::sqrt)),
        Op::RowSoftmax => {
            let [a] = one(op, inputs)?;
            let mut out = Matrix::zeros(a.rows, a.cols);
            for i in 0..a.rows {
                let row = &a.data[i * a.cols..(i + 1) * a.cols];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
                let denom: f64 = exps.iter().sum();
                for (j, e) in exps.into_iter().enumerate() {
                    out.set(i, j, e / denom);
                }
            }
            Ok(out)
        }
        Op::SegmentSoftmax { offsets } => {
            let [a] = one(op, inputs)?;
            segment_bounds_ok(op, offsets, a.rows, a.cols)?;
            let mut out = Matrix::zeros(a.rows, 1);
            let mut exps: Vec<f64> = Vec::new();
            for w in offsets.windows(2) {
                let (s, e) = (w[0], w[1]);
                let seg = &a.data[s..e];
                let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                exps.clear();
                exps.extend(seg.iter().map(|&v| (v - max).exp()));
                let denom = canonical_sum(&mut exps.clone());
                for (k, &ev) in exps.iter().enumerate() {
                    out.set(s + k, 0, ev / denom);
                }
            }
            Ok(out)
        }
        Op::GatherRows { indices } => {
            let [a] = one(op, inputs)?;
            let mut out = Matrix::zeros(indices.len(), a.cols);
            for (k, &i) in indices.iter().enumerate() {
                if i >= a.rows {
                    return Err(GadError::shape(
                        op_static_name(op),
                        format!("row index {i} out of {}", a.rows),
                    ));
                }
                out.data_mut()[k * a.cols..(k + 1) * a.cols]
                    .copy_from_slice(&a.data[i * a.cols..(i + 1) * a.cols]);
            }
            Ok(out)
        }
        Op::EdgeAggregate { groups } => {
            let [alpha, h] = two(op, inputs)?;
            if alpha.cols != 1 || alpha.rows != groups.num_slots() {
                return Err(GadError::shape(
                    op_static_name(op),
                    format!("alpha {}x{} for {} slots", alpha.rows, alpha.cols, groups.num_slots()),
                ));
            }
            if let Some(&bad) = groups.neighbors.iter().find(|&&j| j >= h.rows) {
                return Err(GadError::shape(
                    op_static_name(op),
                    format!("neighbor {bad} out of {}", h.rows),
                ));
            }
            let d = h.cols;
            let mut out = Matrix::zeros(groups.num_rows(), d);
            let mut scratch: Vec<f64> = Vec::new();
            for r in 0..groups.num_rows() {
                let (s, e) = (groups.offsets[r], groups.offsets[r + 1]);
                for c in 0..d {
                    scratch.clear();
                    scratch.extend(
                        (s..e).map(|k| alpha.data[k] * h.at(groups.neighbors[k], c)),
                    );
                    out.set(r, c, canonical_sum(&mut scratch));
                }
            }
            Ok(out)
        }
        Op::RowMean => {
            let [a] = one(op, inputs)?;
            let mut out = Matrix::zeros(a.rows, 1);
            for i in 0..a.rows {
                let s: f64 = a.data[i * a.cols..(i + 1) * a.cols].iter().sum();
                out.set(i, 0, s / a.cols as f64);
            }
            Ok(out)
        }
        Op::ColumnMean => {
            let [a] = one(op, inputs)?;
            let mut out = Matrix::zeros(1, a.cols);
            for i in 0..a.rows {
                for j in 0..a.cols {
                    out.set(0, j, out.at(0, j) + a.at(i, j));
                }
            }
            for j in 0..a.cols {
                out.set(0, j, out.at(0, j) / a.rows as f64);
            }
            Ok(out)
        }
        Op::Sum => {
            let [a] = one(op, inputs)?;
            let s: f64 = a.data.iter().sum();
            Matrix::from_vec(1, 1, vec![s])
        }
        Op::L2NormColumns => {
            let [a] = one(op, inputs)?;
            let mut out = Matrix::zeros(1, a.cols);
            for j in 0..a.cols {
                let mut s = 0.0;
                for i in 0..a.rows {
                    let v = a.at(i, j);
                    s += v * v;
                }
                out.set(0, j, s.sqrt());
            }
            Ok(out)
        }
        Op::ConcatColumns => {
            if inputs.is_empty() {
                return Err(arity_err(op, 0));
            }
            let rows = inputs[0].rows;
            if inputs.iter().any(|v| v.rows != rows) {
                return Err(GadError::shape(op_static_name(op), "row counts differ"));
            }
            let total: usize = inputs.iter().map(|v| v.cols).sum();
            let mut out = Matrix::zeros(rows, total);
            let mut base = 0;
            for v in inputs {
                for i in 0..rows {
                    for j in 0..v.cols {
                        out.set(i, base + j, v.at(i, j));
                    }
                }
                base += v.cols;
            }
            Ok(out)
        }
        Op::Transpose => Ok(one(op, inputs)?[0].to_matrix().transposed()),
        Op::Mse => {
            let [p, t] = two(op, inputs)?;
            expect_same_shape(op, p, t)?;
            let n = (p.rows * p.cols) as f64;
            let s: f64 = p.data.iter().zip(t.data).map(|(a, b)| (a - b) * (a - b)).sum();
            Matrix::from_vec(1, 1, vec![s / n])
        }
        Op::FrobeniusNormDiff => {
            let [a, b] = two(op, inputs)?;
            expect_same_shape(op, a, b)?;
            let s: f64 = a.data.iter().zip(b.data).map(|(x, y)| (x - y) * (x - y)).sum();
            Matrix::from_vec(1, 1, vec![s.sqrt()])
        }
        Op::BceWithWeights { targets, weights } => {
            let [p] = one(op, inputs)?;
            if p.cols != 1 || targets.len() != p.rows || weights.len() != p.rows {
                return Err(GadError::shape(
                    op_static_name(op),
                    format!(
                        "p {}x{}, {} targets, {} weights",
                        p.rows, p.cols, targets.len(), weights.len()
                    ),
                ));
            }
            let n = p.rows as f64;
            let mut loss = 0.0;
            for i in 0..p.rows {
                let pi = p.data[i].clamp(BCE_EPS, 1.0 - BCE_EPS);
                let (y, w) = (targets[i], weights[i]);
                loss -= w * (y * pi.ln() + (1.0 - y) * (1.0 - pi).ln());
            }
            Matrix::from_vec(1, 1, vec![loss / n])
        }
    }
}

fn segment_bounds_ok(op: &Op, offsets: &[usize], rows: usize, cols: usize) -> Result<()> {
    let contiguous = offsets.first() == Some(&0)
        && offsets.last() == Some(&rows)
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if cols != 1 || !contiguous {
        return Err(GadError::shape(
            op_static_name(op),
            format!("segments must cover an {rows}x1 input"),
        ));
    }
    Ok(())
}

fn one<'a>(op: &Op, inputs: &[View<'a>]) -> Result<[View<'a>; 1]> {
    match inputs {
        [a] => Ok([*a]),
        _ => Err(arity_err(op, inputs.len())),
    }
}

fn two<'a>(op: &Op, inputs: &[View<'a>]) -> Result<[View<'a>; 2]> {
    match inputs {
        [a, b] => Ok([*a, *b]),
        _ => Err(arity_err(op, inputs.len())),
    }
}

/// Vector-Jacobian product: gradients of the loss w.r.t. each input, given
/// the gradient w.r.t. the output. `wanted[i]` masks inputs that require it.
pub(crate) fn backward(
    op: &Op,
    inputs: &[View],
    output: View,
    grad: &Matrix,
    wanted: &[bool],
) -> Result<Vec<Option<Matrix>>> {
    let g = grad;
    let mut out: Vec<Option<Matrix>> = vec![None; inputs.len()];
    match op {
        Op::Leaf => {}
        Op::MatMul => {
            let [a, b] = two(op, inputs)?;
            if wanted[0] {
                let bt = b.to_matrix().transposed();
                out[0] = Some(matmul_kernel(view(g), view(&bt)));
            }
            if wanted[1] {
                let at = a.to_matrix().transposed();
                out[1] = Some(matmul_kernel(view(&at), view(g)));
            }
        }
        Op::SpMM { sparse } => {
            if wanted[0] {
                out[0] = Some(spmm_kernel(&sparse.transposed(), view(g)));
            }
        }
        Op::Add { bcast } => {
            if wanted[0] {
                out[0] = Some(g.clone());
            }
            if wanted[1] {
                out[1] = Some(reduce_bcast(*bcast, g));
            }
        }
        Op::Sub { bcast } => {
            if wanted[0] {
                out[0] = Some(g.clone());
            }
            if wanted[1] {
                out[1] = Some(reduce_bcast(*bcast, g).map(|v| -v));
            }
        }
        Op::Mul { bcast } => {
            let [a, b] = two(op, inputs)?;
            if wanted[0] {
                let mut da = Matrix::zeros(a.rows, a.cols);
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        da.set(i, j, g.at(i, j) * bcast_at(*bcast, b, i, j));
                    }
                }
                out[0] = Some(da);
            }
            if wanted[1] {
                let mut full = Matrix::zeros(a.rows, a.cols);
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        full.set(i, j, g.at(i, j) * a.at(i, j));
                    }
                }
                out[1] = Some(reduce_bcast(*bcast, &full));
            }
        }
        Op::Div { bcast } => {
            let [a, b] = two(op, inputs)?;
            if wanted[0] {
                let mut da = Matrix::zeros(a.rows, a.cols);
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        da.set(i, j, g.at(i, j) / bcast_at(*bcast, b, i, j));
                    }
                }
                out[0] = Some(da);
            }
            if wanted[1] {
                let mut full = Matrix::zeros(a.rows, a.cols);
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        let bv = bcast_at(*bcast, b, i, j);
                        full.set(i, j, -g.at(i, j) * a.at(i, j) / (bv * bv));
                    }
                }
                out[1] = Some(reduce_bcast(*bcast, &full));
            }
        }
        Op::ScaleColumns { weights } => {
            if wanted[0] {
                let mut da = Matrix::zeros(g.rows(), g.cols());
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        da.set(i, j, weights[j] * g.at(i, j));
                    }
                }
                out[0] = Some(da);
            }
        }
        Op::Scale { factor } => {
            if wanted[0] {
                let f = *factor;
                out[0] = Some(g.map(|v| f * v));
            }
        }
        Op::WeightedSum => {
            let w = inputs[0];
            if wanted[0] {
                let mut dw = Matrix::zeros(1, w.cols);
                for (i, v) in inputs[1..].iter().enumerate() {
                    let s: f64 = g.data().iter().zip(v.data).map(|(gv, xv)| gv * xv).sum();
                    dw.set(0, i, s);
                }
                out[0] = Some(dw);
            }
            for (i, _) in inputs[1..].iter().enumerate() {
                if wanted[i + 1] {
                    let wi = w.data[i];
                    out[i + 1] = Some(g.map(|v| wi * v));
                }
            }
        }
        Op::Relu => {
            if wanted[0] {
                let x = inputs[0];
                out[0] = Some(masked(g, x, |v| if v > 0.0 { 1.0 } else { 0.0 }));
            }
        }
        Op::LeakyRelu { slope } => {
            if wanted[0] {
                let (x, s) = (inputs[0], *slope);
                out[0] = Some(masked(g, x, |v| if v > 0.0 { 1.0 } else { s }));
            }
        }
        Op::Sigmoid => {
            if wanted[0] {
                out[0] = Some(masked(g, output, |y| y * (1.0 - y)));
            }
        }
        Op::Tanh => {
            if wanted[0] {
                out[0] = Some(masked(g, output, |y| 1.0 - y * y));
            }
        }
        Op::Abs => {
            if wanted[0] {
                let x = inputs[0];
                out[0] = Some(masked(g, x, |v| {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }));
            }
        }
        Op::Sqrt => {
            if wanted[0] {
                out[0] = Some(masked(g, output, |y| if y == 0.0 { 0.0 } else { 0.5 / y }));
            }
        }
        Op::RowSoftmax => {
            if wanted[0] {
                let y = output;
                let mut da = Matrix::zeros(y.rows, y.cols);
                for i in 0..y.rows {
                    let mut dot = 0.0;
                    for j in 0..y.cols {
                        dot += g.at(i, j) * y.at(i, j);
                    }
                    for j in 0..y.cols {
                        da.set(i, j, y.at(i, j) * (g.at(i, j) - dot));
                    }
                }
                out[0] = Some(da);
            }
        }
        Op::SegmentSoftmax { offsets } => {
            if wanted[0] {
                let y = output;
                let mut da = Matrix::zeros(y.rows, 1);
                for w in offsets.windows(2) {
                    let (s, e) = (w[0], w[1]);
                    let mut dot = 0.0;
                    for k in s..e {
                        dot += g.at(k, 0) * y.at(k, 0);
                    }
                    for k in s..e {
                        da.set(k, 0, y.at(k, 0) * (g.at(k, 0) - dot));
                    }
                }
                out[0] = Some(da);
            }
        }
        Op::GatherRows { indices } => {
            if wanted[0] {
                let x = inputs[0];
                let mut da = Matrix::zeros(x.rows, x.cols);
                for (k, &i) in indices.iter().enumerate() {
                    for j in 0..x.cols {
                        da.set(i, j, da.at(i, j) + g.at(k, j));
                    }
                }
                out[0] = Some(da);
            }
        }
        Op::EdgeAggregate { groups } => {
            let [alpha, h] = two(op, inputs)?;
            if wanted[0] {
                let mut da = Matrix::zeros(alpha.rows, 1);
                for r in 0..groups.num_rows() {
                    for k in groups.offsets[r]..groups.offsets[r + 1] {
                        let src = groups.neighbors[k];
                        let mut dot = 0.0;
                        for c in 0..h.cols {
                            dot += g.at(r, c) * h.at(src, c);
                        }
                        da.set(k, 0, dot);
                    }
                }
                out[0] = Some(da);
            }
            if wanted[1] {
                let mut dh = Matrix::zeros(h.rows, h.cols);
                for r in 0..groups.num_rows() {
                    for k in groups.offsets[r]..groups.offsets[r + 1] {
                        let src = groups.neighbors[k];
                        let ak = alpha.data[k];
                        for c in 0..h.cols {
                            dh.set(src, c, dh.at(src, c) + ak * g.at(r, c));
                        }
                    }
                }
                out[1] = Some(dh);
            }
        }
        Op::RowMean => {
            if wanted[0] {
                let x = inputs[0];
                let inv = 1.0 / x.cols as f64;
                let mut da = Matrix::zeros(x.rows, x.cols);
                for i in 0..x.rows {
                    for j in 0..x.cols {
                        da.set(i, j, g.at(i, 0) * inv);
                    }
                }
                out[0] = Some(da);
            }
        }
        Op::ColumnMean => {
            if wanted[0] {
                let x = inputs[0];
                let inv = 1.0 / x.rows as f64;
                let mut da = Matrix::zeros(x.rows, x.cols);
                for i in 0..x.rows {
                    for j in 0..x.cols {
                        da.set(i, j, g.at(0, j) * inv);
                    }
                }
                out[0] = Some(da);
            }
        }
        Op::Sum => {
            if wanted[0] {
                let x = inputs[0];
                out[0] = Some(Matrix::filled(x.rows, x.cols, g.at(0, 0)));
            }
        }
        Op::L2NormColumns => {
            if wanted[0] {
                let (x, y) = (inputs[0], output);
                let mut da = Matrix::zeros(x.rows, x.cols);
                for j in 0..x.cols {
                    let norm = y.at(0, j);
                    if norm == 0.0 {
                        continue;
                    }
                    let gj = g.at(0, j);
                    for i in 0..x.rows {
                        da.set(i, j, gj * x.at(i, j) / norm);
                    }
                }
                out[0] = Some(da);
            }
        }
        Op::ConcatColumns => {
            let mut base = 0;
            for (idx, v) in inputs.iter().enumerate() {
                if wanted[idx] {
                    let mut dv = Matrix::zeros(v.rows, v.cols);
                    for i in 0..v.rows {
                        for j in 0..v.cols {
                            dv.set(i, j, g.at(i, base + j));
                        }
                    }
                    out[idx] = Some(dv);
                }
                base += v.cols;
            }
        }
        Op::Transpose => {
            if wanted[0] {
                out[0] = Some(g.transposed());
            }
        }
        Op::Mse => {
            let [p, t] = two(op, inputs)?;
            let scale = 2.0 * g.at(0, 0) / (p.rows * p.cols) as f64;
            if wanted[0] {
                let mut dp = Matrix::zeros(p.rows, p.cols);
                for i in 0..p.rows {
                    for j in 0..p.cols {
                        dp.set(i, j, scale * (p.at(i, j) - t.at(i, j)));
                    }
                }
                out[0] = Some(dp);
            }
            if wanted[1] {
                let mut dt = Matrix::zeros(p.rows, p.cols);
                for i in 0..p.rows {
                    for j in 0..p.cols {
                        dt.set(i, j, -scale * (p.at(i, j) - t.at(i, j)));
                    }
                }
                out[1] = Some(dt);
            }
        }
        Op::FrobeniusNormDiff => {
            let [a, b] = two(op, inputs)?;
            let norm = output.at(0, 0);
            let scale = if norm == 0.0 { 0.0 } else { g.at(0, 0) / norm };
            if wanted[0] {
                let mut da = Matrix::zeros(a.rows, a.cols);
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        da.set(i, j, scale * (a.at(i, j) - b.at(i, j)));
                    }
                }
                out[0] = Some(da);
            }
            if wanted[1] {
                let mut db = Matrix::zeros(a.rows, a.cols);
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        db.set(i, j, -scale * (a.at(i, j) - b.at(i, j)));
                    }
                }
                out[1] = Some(db);
            }
        }
        Op::BceWithWeights { targets, weights } => {
            if wanted[0] {
                let p = inputs[0];
                let n = p.rows as f64;
                let g0 = g.at(0, 0);
                let mut dp = Matrix::zeros(p.rows, 1);
                for i in 0..p.rows {
                    let pi = p.data[i].clamp(BCE_EPS, 1.0 - BCE_EPS);
                    let (y, w) = (targets[i], weights[i]);
                    dp.set(i, 0, -g0 * w * (y / pi - (1.0 - y) / (1.0 - pi)) / n);
                }
                out[0] = Some(dp);
            }
        }
    }
    Ok(out)
}

#[inline]
fn masked(g: &Matrix, basis: View, f: impl Fn(f64) -> f64) -> Matrix {
    let mut out = Matrix::zeros(g.rows(), g.cols());
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            out.set(i, j, g.at(i, j) * f(basis.at(i, j)));
        }
    }
    out
}

pub(crate) fn view(m: &Matrix) -> View<'_> {
    View { rows: m.rows(), cols: m.cols(), data: m.data() }
}
