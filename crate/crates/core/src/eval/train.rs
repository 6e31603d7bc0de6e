//! Full-batch training with early stopping, multi-seed experiments, and the
//! view-count sweep.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::Serialize;

use crate::autodiff::adam::{AdamHyper, BoundParams};
use crate::autodiff::tape::{Tape, Tensor};
use crate::backbones::{EncoderConfig, GraphTensors};
use crate::error::{GadError, Result};
use crate::eval::auc::auc;
use crate::eval::early_stop::EarlyStopState;
use crate::graph::{Graph, Split};
use crate::model::{FusionModel, ModelSpec, ObjectiveHead};
use crate::objectives::{ObjectiveConfig, ObjectiveOutput, ReconTargets};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_lr() -> f64 {
    5e-3
}
fn default_weight_decay() -> f64 {
    5e-2
}
fn default_max_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    20
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            lr: default_lr(),
            weight_decay: default_weight_decay(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub test_auc: f64,
    pub best_val_auc: f64,
    pub epochs_run: usize,
    /// Effective view weights at the end of training.
    pub alpha: Vec<f64>,
    pub curve: Vec<EpochRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub config_hash: String,
    pub config: serde_json::Value,
    pub per_seed: Vec<SeedResult>,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub mean_best_val_auc: f64,
    pub partial: bool,
    pub failed_seeds: Vec<FailedSeed>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FailedSeed {
    pub seed: u64,
    pub error: String,
}

/// Population mean and standard deviation; bit-equal inputs give exactly 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    if values.iter().all(|v| v == &values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct PhaseOutcome {
    epochs: usize,
    best_val_auc: f64,
}

type ForwardFn<'a> =
    dyn FnMut(&FusionModel, &Tape, &mut BoundParams, &Tensor) -> Result<(ObjectiveOutput, Vec<f64>)>
        + 'a;

/// One training phase: per epoch, forward on current parameters, record the
/// validation loss/AUC of those parameters, early-stop check, then backward
/// and one Adam step. The best snapshot is restored on exit.
fn run_phase(
    model: &mut FusionModel,
    gt: &GraphTensors,
    hyper: &Hyper,
    adam: &AdamHyper,
    y: &[u8],
    split: &Split,
    curve: &mut Vec<EpochRecord>,
    epoch_offset: usize,
    forward: &mut ForwardFn,
) -> Result<PhaseOutcome> {
    let val_labels: Vec<u8> = split.val_idx.iter().map(|&i| y[i]).collect();
    let mut es = EarlyStopState::new(hyper.patience);
    let mut best_val_auc = f64::NAN;
    let mut epochs = 0;
    for e in 1..=hyper.max_epochs {
        let tape = Tape::new();
        let mut bp = BoundParams::new();
        let feats = tape.constant(gt.features.clone());
        let (out, _alpha) = forward(model, &tape, &mut bp, &feats)?;

        let val_scores: Vec<f64> = split.val_idx.iter().map(|&i| out.scores[i]).collect();
        let val_auc = auc(&val_scores, &val_labels).unwrap_or(f64::NAN);
        if val_auc.is_finite() && !(val_auc <= best_val_auc) {
            best_val_auc = val_auc;
        }
        epochs = e;
        curve.push(EpochRecord {
            epoch: epoch_offset + e,
            train_loss: out.train_loss.scalar(),
            val_loss: out.val_loss,
            val_auc,
        });
        if es.update(e, out.val_loss, &model.store)? {
            break;
        }
        let grads = tape.backward(&out.train_loss)?;
        model.store.adam_step(&bp.grads(&grads), adam, e as u64)?;
    }
    es.restore_best(&mut model.store);
    Ok(PhaseOutcome { epochs, best_val_auc })
}

/// Train one model on a fixed split. Deterministic per seed: identical
/// inputs give a bit-identical [`SeedResult`].
pub fn train_once(
    g: &Graph,
    split: &Split,
    spec: &ModelSpec,
    hyper: &Hyper,
    seed: u64,
) -> Result<SeedResult> {
    train_model(g, split, spec, hyper, seed).map(|(_, r)| r)
}

/// Like [`train_once`], but also hands back the fitted model so callers can
/// score other graphs with it (the decision-boundary demo does).
pub fn train_model(
    g: &Graph,
    split: &Split,
    spec: &ModelSpec,
    hyper: &Hyper,
    seed: u64,
) -> Result<(FusionModel, SeedResult)> {
    let y_true =
        g.labels.as_ref().ok_or_else(|| GadError::Train("training requires anomaly labels".into()))?;
    // Test labels never enter the training path; they only meet the scores
    // in the final AUC call below.
    let mut y = y_true.clone();
    for &i in &split.test_idx {
        y[i] = 0;
    }

    let gt = GraphTensors::new(g);
    let mut model = FusionModel::new(spec.clone(), g.dim(), g.dim(), seed)?;
    let adam = AdamHyper { lr: hyper.lr, weight_decay: hyper.weight_decay, ..Default::default() };
    let mut curve = Vec::new();

    let (epochs_run, best_val_auc) = match &spec.objective {
        ObjectiveConfig::Label { lambda } => {
            let lam = lambda.resolve(&y, &split.train_idx)?;
            let mut forward = |m: &FusionModel, tape: &Tape, bp: &mut BoundParams, feats: &Tensor| {
                let (xf, alpha) = m.representation(tape, bp, &gt, feats)?;
                let ObjectiveHead::Label(head) = &m.head else { unreachable!() };
                Ok((head.forward(&m.store, tape, bp, &xf, &y, split, lam)?, alpha))
            };
            let out =
                run_phase(&mut model, &gt, hyper, &adam, &y, split, &mut curve, 0, &mut forward)?;
            (out.epochs, out.best_val_auc)
        }
        ObjectiveConfig::Reconstruction { dense_limit, row_sampled_structure, .. } => {
            let targets = ReconTargets::new(
                &g.features,
                &g.adj,
                split,
                *dense_limit,
                *row_sampled_structure,
                seed,
            )?;
            let mut forward = |m: &FusionModel, tape: &Tape, bp: &mut BoundParams, feats: &Tensor| {
                let (xf, alpha) = m.representation(tape, bp, &gt, feats)?;
                let ObjectiveHead::Recon(head) = &m.head else { unreachable!() };
                Ok((head.forward(&m.store, tape, bp, &xf, &targets, split)?, alpha))
            };
            let out =
                run_phase(&mut model, &gt, hyper, &adam, &y, split, &mut curve, 0, &mut forward)?;
            (out.epochs, out.best_val_auc)
        }
        ObjectiveConfig::Ssl { lambda, .. } => {
            // Phase 1: local-global contrast with per-epoch corruption.
            let mut corrupt_rng = stream(seed, "corruption");
            let n = g.n();
            let mut contrast = |m: &FusionModel, tape: &Tape, bp: &mut BoundParams, feats: &Tensor| {
                let (xf, alpha) = m.representation(tape, bp, &gt, feats)?;
                let ObjectiveHead::Ssl(head) = &m.head else { unreachable!() };
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut corrupt_rng);
                Ok((head.contrast_forward(&m.store, tape, bp, &xf, &perm, split)?, alpha))
            };
            let p1 =
                run_phase(&mut model, &gt, hyper, &adam, &y, split, &mut curve, 0, &mut contrast)?;

            // Phase 2: linear scorer at full rate, everything else at 0.1x,
            // fresh optimizer state.
            let lam = lambda.resolve(&y, &split.train_idx)?;
            let ObjectiveHead::Ssl(head) = &model.head else { unreachable!() };
            let scorer: Vec<_> = head.scorer_ids();
            for id in model.representation_param_ids().into_iter().chain(model.head_param_ids()) {
                model.store.set_lr_mult(id, 0.1);
            }
            for id in scorer {
                model.store.set_lr_mult(id, 1.0);
            }
            model.store.reset_moments();
            let mut finetune = |m: &FusionModel, tape: &Tape, bp: &mut BoundParams, feats: &Tensor| {
                let (xf, alpha) = m.representation(tape, bp, &gt, feats)?;
                let ObjectiveHead::Ssl(head) = &m.head else { unreachable!() };
                Ok((head.finetune_forward(&m.store, tape, bp, &xf, &y, split, lam)?, alpha))
            };
            let p2 = run_phase(
                &mut model,
                &gt,
                hyper,
                &adam,
                &y,
                split,
                &mut curve,
                p1.epochs,
                &mut finetune,
            )?;
            (p1.epochs + p2.epochs, p2.best_val_auc)
        }
    };

    model.trained = true;
    let (scores, alpha) = final_scores(&model, &gt, &y, split)?;
    let test_scores: Vec<f64> = split.test_idx.iter().map(|&i| scores[i]).collect();
    let test_labels: Vec<u8> = split.test_idx.iter().map(|&i| y_true[i]).collect();
    let test_auc = auc(&test_scores, &test_labels)?;

    Ok((model, SeedResult { seed, test_auc, best_val_auc, epochs_run, alpha, curve }))
}

/// Score an arbitrary graph with a trained model (its parameters must fit
/// the graph's feature width). Returns per-node scores and the effective
/// view weights.
pub fn score_graph(model: &FusionModel, g: &Graph) -> Result<(Vec<f64>, Vec<f64>)> {
    if !model.trained {
        return Err(GadError::Train("model is not trained; scores would be initialization noise".into()));
    }
    let gt = GraphTensors::new(g);
    score_pass(model, &gt, None)
}

/// Score every node with the trained parameters, per the active objective's
/// rule; also reports the effective view weights.
pub fn final_scores(
    model: &FusionModel,
    gt: &GraphTensors,
    y: &[u8],
    split: &Split,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !model.trained {
        return Err(GadError::Train("model is not trained; scores would be initialization noise".into()));
    }
    score_pass(model, gt, Some((y, split)))
}

/// Forward pass for scoring only. With `supervision` absent, the label and
/// ssl heads still score (they need no labels to do so); reconstruction
/// rebuilds its targets from the graph itself.
pub(crate) fn score_pass(
    model: &FusionModel,
    gt: &GraphTensors,
    supervision: Option<(&[u8], &Split)>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let tape = Tape::new();
    let mut bp = BoundParams::new();
    let feats = tape.constant(gt.features.clone());
    let (xf, alpha) = model.representation(&tape, &mut bp, gt, &feats)?;
    let scores = match &model.head {
        ObjectiveHead::Label(head) => head.score(&model.store, &tape, &mut bp, &xf)?,
        ObjectiveHead::Ssl(head) => head.score(&model.store, &tape, &mut bp, &xf)?,
        ObjectiveHead::Recon(head) => {
            let _ = supervision;
            head.score(&model.store, &tape, &mut bp, &xf, &gt.features, &gt.raw_adj)?
        }
    };
    Ok((scores, alpha))
}

/// Train every seed (optionally in parallel), then aggregate mean and
/// population std of the test AUCs. Seed failures are reported in the
/// result and flag it partial; if every seed fails the whole call errors.
pub fn run_experiment(
    g: &Graph,
    split: &Split,
    spec: &ModelSpec,
    hyper: &Hyper,
    seeds: &[u64],
    workers: usize,
    config: serde_json::Value,
    config_hash: String,
) -> Result<RunResult> {
    if seeds.is_empty() {
        return Err(GadError::Config("at least one seed is required".into()));
    }
    let workers = workers.max(1).min(seeds.len());
    let mut slots: Vec<Option<std::result::Result<SeedResult, String>>> = vec![None; seeds.len()];
    if workers == 1 {
        for (k, &seed) in seeds.iter().enumerate() {
            slots[k] = Some(train_once(g, split, spec, hyper, seed).map_err(|e| e.to_string()));
        }
    } else {
        let results = std::sync::Mutex::new(vec![None; seeds.len()]);
        std::thread::scope(|scope| {
            for w in 0..workers {
                let results = &results;
                scope.spawn(move || {
                    for (k, &seed) in seeds.iter().enumerate().skip(w).step_by(workers) {
                        let r = train_once(g, split, spec, hyper, seed).map_err(|e| e.to_string());
                        results.lock().expect("no poisoned seed threads")[k] = Some(r);
                    }
                });
            }
        });
        slots = results.into_inner().expect("threads joined");
    }

    let mut per_seed = Vec::new();
    let mut failed_seeds = Vec::new();
    for (k, slot) in slots.into_iter().enumerate() {
        match slot.expect("every seed ran") {
            Ok(r) => per_seed.push(r),
            Err(e) => failed_seeds.push(FailedSeed { seed: seeds[k], error: e }),
        }
    }
    if per_seed.is_empty() {
        return Err(GadError::Train(format!(
            "all seeds failed; first error: {}",
            failed_seeds[0].error
        )));
    }
    let aucs: Vec<f64> = per_seed.iter().map(|r| r.test_auc).collect();
    let (mean_auc, std_auc) = mean_std(&aucs);
    let best_vals: Vec<f64> = per_seed.iter().map(|r| r.best_val_auc).collect();
    let (mean_best_val_auc, _) = mean_std(&best_vals);
    Ok(RunResult {
        config_hash,
        config,
        partial: !failed_seeds.is_empty(),
        failed_seeds,
        per_seed,
        mean_auc,
        std_auc,
        mean_best_val_auc,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub count: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// The sampled view combinations, as pool indices.
    pub sampled_combos: Vec<Vec<usize>>,
}

/// For `count` fused views: draw `samples` random size-`count` subsets of
/// the pool, run the experiment on each (memoized per subset), and pool the
/// per-seed test AUCs into one mean/std.
#[allow(clippy::too_many_arguments)]
pub fn sweep_view_count(
    g: &Graph,
    split: &Split,
    pool: &[EncoderConfig],
    count: usize,
    samples: usize,
    base: &ModelSpec,
    hyper: &Hyper,
    seeds: &[u64],
    workers: usize,
    sweep_seed: u64,
) -> Result<SweepPoint> {
    if count == 0 || count > pool.len() {
        return Err(GadError::Config(format!(
            "view count {count} outside 1..={} (pool size)",
            pool.len()
        )));
    }
    let indices: Vec<usize> = (0..pool.len()).collect();
    let mut cache: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    let mut pooled = Vec::new();
    let mut sampled_combos = Vec::new();
    for s in 0..samples {
        let mut rng = stream(sweep_seed, &format!("sweep/count{count}/sample{s}"));
        let mut combo: Vec<usize> = indices.choose_multiple(&mut rng, count).copied().collect();
        combo.sort_unstable();
        if !cache.contains_key(&combo) {
            let spec = ModelSpec {
                views: combo.iter().map(|&i| pool[i].clone()).collect(),
                fusion: base.fusion.clone(),
                objective: base.objective.clone(),
            };
            let run = run_experiment(
                g,
                split,
                &spec,
                hyper,
                seeds,
                workers,
                serde_json::Value::Null,
                String::new(),
            )?;
            cache.insert(combo.clone(), run.per_seed.iter().map(|r| r.test_auc).collect());
        }
        pooled.extend(cache[&combo].iter().copied());
        sampled_combos.push(combo);
    }
    let (mean_auc, std_auc) = mean_std(&pooled);
    Ok(SweepPoint { count, mean_auc, std_auc, sampled_combos })
}
