//! Define-by-run reverse-mode tape.
//!
//! A fresh [`Tape`] is built for every forward pass. Tensors are immutable
//! handles into the tape arena; [`Tape::backward`] replays the recorded
//! primitives in reverse and returns a gradient per recorded node.

use std::cell::RefCell;
use std::rc::Rc;

use crate::autodiff::matrix::Matrix;
use crate::autodiff::ops::{self, Op, View};
use crate::error::{GadError, Result};

pub type NodeId = usize;

/// A shaped f64 matrix participating in (or constant to) a tape.
#[derive(Clone)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    values: Rc<Vec<f64>>,
    node: Option<NodeId>,
    requires_grad: bool,
}

impl Tensor {
    /// A constant not attached to any tape.
    pub fn constant(m: Matrix) -> Tensor {
        let (rows, cols) = m.shape();
        Tensor { rows, cols, values: Rc::new(m.into_data()), node: None, requires_grad: false }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn node(&self) -> Option<NodeId> {
        self.node
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Scalar value of a 1x1 tensor.
    pub fn scalar(&self) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (1, 1));
        self.values[0]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.values.to_vec()).expect("tensor is consistent")
    }

    fn as_view(&self) -> View<'_> {
        View { rows: self.rows, cols: self.cols, data: &self.values }
    }
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    rows: usize,
    cols: usize,
    values: Rc<Vec<f64>>,
    requires_grad: bool,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Wengert list; rebuilt for every forward pass.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push_leaf(&self, values: Rc<Vec<f64>>, rows: usize, cols: usize, requires_grad: bool) -> NodeId {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node { op: Op::Leaf, inputs: vec![], rows, cols, values, requires_grad });
        inner.nodes.len() - 1
    }

    /// Record a leaf. Leaves with `requires_grad` receive gradients.
    pub fn leaf(&self, m: Matrix, requires_grad: bool) -> Tensor {
        let (rows, cols) = m.shape();
        let values = Rc::new(m.into_data());
        let node = self.push_leaf(Rc::clone(&values), rows, cols, requires_grad);
        Tensor { rows, cols, values, node: Some(node), requires_grad }
    }

    /// Record a constant leaf.
    pub fn constant(&self, m: Matrix) -> Tensor {
        self.leaf(m, false)
    }

    /// Evaluate one primitive and record it.
    ///
    /// Errors on shape mismatches and whenever the output contains a
    /// non-finite value.
    pub fn eval(&self, op: Op, inputs: &[&Tensor]) -> Result<Tensor> {
        if self.inner.borrow().consumed {
            return Err(GadError::Tape("tape already consumed by backward".into()));
        }
        // Constants created off-tape are interned as leaves on first use.
        let ids: Vec<NodeId> = inputs
            .iter()
            .map(|t| match t.node {
                Some(id) => id,
                None => self.push_leaf(Rc::clone(&t.values), t.rows, t.cols, false),
            })
            .collect();
        let views: Vec<View> = inputs.iter().map(|t| t.as_view()).collect();
        let out = ops::forward(&op, &views)?;
        if !out.all_finite() {
            return Err(GadError::NonFinite { op: op.name() });
        }
        let requires_grad = inputs.iter().any(|t| t.requires_grad);
        let (rows, cols) = out.shape();
        let values = Rc::new(out.into_data());
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node {
            op,
            inputs: ids,
            rows,
            cols,
            values: Rc::clone(&values),
            requires_grad,
        });
        let node = inner.nodes.len() - 1;
        Ok(Tensor { rows, cols, values, node: Some(node), requires_grad })
    }

    /// Reverse sweep from a scalar loss. Consumes the tape: a second call
    /// (or further recording) errors.
    pub fn backward(&self, loss: &Tensor) -> Result<GradStore> {
        let loss_node = loss
            .node
            .ok_or_else(|| GadError::Tape("loss tensor is not recorded on this tape".into()))?;
        if loss.shape() != (1, 1) {
            return Err(GadError::Tape(format!(
                "loss must be 1x1, got {}x{}",
                loss.rows, loss.cols
            )));
        }
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(GadError::Tape("tape already consumed by backward".into()));
        }
        inner.consumed = true;

        let n = inner.nodes.len();
        let mut grads: Vec<Option<Matrix>> = (0..n).map(|_| None).collect();
        grads[loss_node] = Some(Matrix::filled(1, 1, 1.0));

        for id in (0..=loss_node).rev() {
            let Some(gout) = grads[id].take() else { continue };
            let node = &inner.nodes[id];
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(gout);
                continue;
            }
            if !node.requires_grad {
                continue;
            }
            let wanted: Vec<bool> =
                node.inputs.iter().map(|&i| inner.nodes[i].requires_grad).collect();
            let views: Vec<View> = node
                .inputs
                .iter()
                .map(|&i| {
                    let nd = &inner.nodes[i];
                    View { rows: nd.rows, cols: nd.cols, data: &nd.values }
                })
                .collect();
            let out_view = View { rows: node.rows, cols: node.cols, data: &node.values };
            let contribs = ops::backward(&node.op, &views, out_view, &gout, &wanted)?;
            for (slot, contrib) in node.inputs.iter().zip(contribs) {
                let Some(c) = contrib else { continue };
                match &mut grads[*slot] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(c.data()) {
                            *a += b;
                        }
                    }
                    g @ None => *g = Some(c),
                }
            }
            // Interior gradients above this point are no longer needed.
        }

        let shapes = inner.nodes.iter().map(|nd| (nd.rows, nd.cols)).collect();
        Ok(GradStore { grads, shapes })
    }
}

/// Gradients per tape node after a backward sweep.
pub struct GradStore {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl GradStore {
    pub fn get(&self, node: NodeId) -> Option<&Matrix> {
        self.grads.get(node).and_then(|g| g.as_ref())
    }

    /// Gradient of a node, zero-filled when the node was never reached.
    pub fn grad_or_zero(&self, node: NodeId) -> Matrix {
        match self.get(node) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[node];
                Matrix::zeros(r, c)
            }
        }
    }

    pub fn grad_of(&self, t: &Tensor) -> Option<Matrix> {
        t.node().map(|id| self.grad_or_zero(id))
    }
}
