//! Stratified train/validation/test splitting.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::graph::Graph;
use crate::rng::stream;

/// Disjoint covering node index sets, each sorted ascending.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train_idx.len(), self.val_idx.len(), self.test_idx.len())
    }
}

/// Largest-remainder apportionment of `total` items into three buckets.
/// Remainder ties resolve train > val > test.
fn apportion(total: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let ideal = [total as f64 * ratios.0, total as f64 * ratios.1, total as f64 * ratios.2];
    let mut counts = [ideal[0].floor() as usize, ideal[1].floor() as usize, ideal[2].floor() as usize];
    let mut rem: Vec<(usize, f64)> =
        ideal.iter().enumerate().map(|(k, v)| (k, v - v.floor())).collect();
    rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut short = total - counts.iter().sum::<usize>();
    for (k, _) in rem {
        if short == 0 {
            break;
        }
        counts[k] += 1;
        short -= 1;
    }
    counts
}

/// Split nodes 4:3:3 (or per `ratios`), stratified over the anomaly label.
///
/// Anomalous and normal nodes are shuffled independently and apportioned
/// proportionally, so every set carries close to the global anomaly rate.
pub fn stratified_split(g: &Graph, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let y = g
        .labels
        .as_ref()
        .ok_or_else(|| GadError::Data("stratified_split requires anomaly labels".into()))?;
    let sum = ratios.0 + ratios.1 + ratios.2;
    if !(ratios.0 > 0.0 && ratios.1 > 0.0 && ratios.2 > 0.0 && (sum - 1.0).abs() < 1e-9) {
        return Err(GadError::Config(format!("split ratios {ratios:?} must be positive and sum to 1")));
    }
    let n = g.n();
    if n < 3 {
        return Err(GadError::Data("cannot split fewer than 3 nodes".into()));
    }

    let mut anomalies: Vec<usize> = (0..n).filter(|&i| y[i] == 1).collect();
    let mut normals: Vec<usize> = (0..n).filter(|&i| y[i] == 0).collect();
    for (label, members) in [("anomalous", anomalies.len()), ("normal", normals.len())] {
        if members > 0 && members < 3 {
            log::warn!(
                "{label} class has only {members} member(s); it cannot appear in every split set"
            );
        }
    }

    let mut rng = stream(seed, "split");
    anomalies.shuffle(&mut rng);
    normals.shuffle(&mut rng);

    let global = apportion(n, ratios);
    let anom = apportion(anomalies.len(), ratios);
    // Normals take whatever keeps the global set sizes exact.
    let norm = [global[0] - anom[0], global[1] - anom[1], global[2] - anom[2]];

    let mut sets: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut a_iter = anomalies.into_iter();
    let mut n_iter = normals.into_iter();
    for k in 0..3 {
        sets[k].extend(a_iter.by_ref().take(anom[k]));
        sets[k].extend(n_iter.by_ref().take(norm[k]));
        sets[k].sort_unstable();
    }
    let [train_idx, val_idx, test_idx] = sets;
    Ok(Split { train_idx, val_idx, test_idx, seed })
}
