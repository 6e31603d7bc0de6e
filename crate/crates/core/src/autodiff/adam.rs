//! Named parameter storage and the Adam optimizer.

use crate::autodiff::matrix::Matrix;
use crate::autodiff::tape::{GradStore, NodeId, Tape, Tensor};
use crate::error::{GadError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

struct Slot {
    name: String,
    value: Matrix,
    m: Matrix,
    v: Matrix,
    lr_mult: f64,
}

/// Owns every trainable matrix of a model plus its Adam moment buffers.
#[derive(Default)]
pub struct ParamStore {
    slots: Vec<Slot>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let (r, c) = value.shape();
        self.slots.push(Slot {
            name: name.into(),
            value,
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
            lr_mult: 1.0,
        });
        ParamId(self.slots.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.slots[id.0].value
    }

    pub fn set_value(&mut self, id: ParamId, value: Matrix) {
        debug_assert_eq!(value.shape(), self.slots[id.0].value.shape());
        self.slots[id.0].value = value;
    }

    /// Per-parameter learning-rate multiplier (fine-tuning uses 0.1 on the encoder).
    pub fn set_lr_mult(&mut self, id: ParamId, mult: f64) {
        self.slots[id.0].lr_mult = mult;
    }

    pub fn snapshot(&self) -> Vec<Matrix> {
        self.slots.iter().map(|s| s.value.clone()).collect()
    }

    pub fn restore(&mut self, snap: &[Matrix]) {
        assert_eq!(snap.len(), self.slots.len(), "snapshot drifted from store");
        for (slot, m) in self.slots.iter_mut().zip(snap) {
            slot.value = m.clone();
        }
    }

    /// Zero the Adam moments (fresh optimizer phase).
    pub fn reset_moments(&mut self) {
        for s in &mut self.slots {
            let (r, c) = s.value.shape();
            s.m = Matrix::zeros(r, c);
            s.v = Matrix::zeros(r, c);
        }
    }

    /// One Adam update with bias correction and coupled (L2-in-gradient)
    /// weight decay. `t` is the 1-based step index.
    pub fn adam_step(
        &mut self,
        grads: &[(ParamId, Matrix)],
        hyper: &AdamHyper,
        t: u64,
    ) -> Result<()> {
        assert!(t >= 1, "Adam step index is 1-based");
        let bc1 = 1.0 - hyper.beta1.powi(t as i32);
        let bc2 = 1.0 - hyper.beta2.powi(t as i32);
        for (id, grad) in grads {
            let slot = &mut self.slots[id.0];
            if grad.shape() != slot.value.shape() {
                return Err(GadError::shape(
                    "adam_step",
                    format!(
                        "param {} is {:?}, grad is {:?}",
                        slot.name,
                        slot.value.shape(),
                        grad.shape()
                    ),
                ));
            }
            let lr = hyper.lr * slot.lr_mult;
            for k in 0..grad.data().len() {
                let g = grad.data()[k] + hyper.weight_decay * slot.value.data()[k];
                let m = hyper.beta1 * slot.m.data()[k] + (1.0 - hyper.beta1) * g;
                let v = hyper.beta2 * slot.v.data()[k] + (1.0 - hyper.beta2) * g * g;
                slot.m.data_mut()[k] = m;
                slot.v.data_mut()[k] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                slot.value.data_mut()[k] -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: 5e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 5e-2 }
    }
}

/// Tracks which tape leaf each parameter was bound to this forward pass.
#[derive(Default)]
pub struct BoundParams {
    pairs: Vec<(ParamId, NodeId)>,
}

impl BoundParams {
    pub fn new() -> Self {
        Self::default()
    }

    /// Put a parameter on the tape as a gradient-taking leaf.
    pub fn bind(&mut self, store: &ParamStore, tape: &Tape, id: ParamId) -> Tensor {
        let t = tape.leaf(store.value(id).clone(), true);
        self.pairs.push((id, t.node().expect("leaf is recorded")));
        t
    }

    /// Gradient per bound parameter; zeros for parameters the loss never reached.
    pub fn grads(&self, store: &GradStore) -> Vec<(ParamId, Matrix)> {
        self.pairs.iter().map(|&(p, n)| (p, store.grad_or_zero(n))).collect()
    }
}
