//! Patience-based early stopping on validation loss.

use crate::autodiff::adam::ParamStore;
use crate::autodiff::matrix::Matrix;
use crate::error::{GadError, Result};

/// Improvements smaller than this do not reset the patience counter.
pub const IMPROVEMENT_TOL: f64 = 1e-6;

pub struct EarlyStopState {
    best_val: f64,
    epochs_since_improvement: usize,
    patience: usize,
    best_snapshot: Option<Vec<Matrix>>,
    pub best_epoch: usize,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> EarlyStopState {
        EarlyStopState {
            best_val: f64::INFINITY,
            epochs_since_improvement: 0,
            patience,
            best_snapshot: None,
            best_epoch: 0,
        }
    }

    pub fn best_val(&self) -> f64 {
        self.best_val
    }

    /// Record this epoch's validation loss; snapshots the parameters on
    /// improvement. Returns `true` when patience ran out and training should
    /// stop. A NaN loss is an immediate error.
    pub fn update(&mut self, epoch: usize, val_loss: f64, store: &ParamStore) -> Result<bool> {
        if val_loss.is_nan() {
            return Err(GadError::Train(format!("validation loss is NaN at epoch {epoch}")));
        }
        if val_loss <= self.best_val - IMPROVEMENT_TOL {
            self.best_val = val_loss;
            self.best_epoch = epoch;
            self.best_snapshot = Some(store.snapshot());
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
        }
        Ok(self.epochs_since_improvement >= self.patience)
    }

    /// Put the best-seen parameters back into the store.
    pub fn restore_best(&self, store: &mut ParamStore) {
        if let Some(snap) = &self.best_snapshot {
            store.restore(snap);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_loss_stops_after_patience() {
        let store = ParamStore::new();
        let mut es = EarlyStopState::new(20);
        assert!(!es.update(1, 1.0, &store).unwrap());
        for epoch in 2..=20 {
            assert!(!es.update(epoch, 1.0, &store).unwrap(), "stopped early at {epoch}");
        }
        assert!(es.update(21, 1.0, &store).unwrap());
        assert_eq!(es.best_epoch, 1);
    }

    #[test]
    fn decreasing_loss_never_stops() {
        let store = ParamStore::new();
        let mut es = EarlyStopState::new(20);
        for epoch in 1..=200 {
            let loss = 1.0 - epoch as f64 * 1e-3;
            assert!(!es.update(epoch, loss, &store).unwrap());
        }
        assert_eq!(es.best_epoch, 200);
    }

    #[test]
    fn dip_then_flat_restores_dip() {
        let mut store = ParamStore::new();
        let id = store.add("w", Matrix::zeros(1, 1));
        let mut es = EarlyStopState::new(3);
        let seq = [1.0, 0.9, 0.8, 0.2, 0.8, 0.8, 0.8];
        let mut stopped_at = None;
        for (k, &loss) in seq.iter().enumerate() {
            let epoch = k + 1;
            store.set_value(id, Matrix::filled(1, 1, epoch as f64));
            if es.update(epoch, loss, &store).unwrap() {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(7));
        es.restore_best(&mut store);
        assert_eq!(store.value(id).at(0, 0), 4.0, "epoch-4 snapshot restored");
        assert_eq!(es.best_epoch, 4);
    }

    #[test]
    fn nan_is_an_error() {
        let store = ParamStore::new();
        let mut es = EarlyStopState::new(5);
        assert!(es.update(1, f64::NAN, &store).is_err());
    }
}
