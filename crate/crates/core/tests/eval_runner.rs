//! AUC against the O(n^2) pairwise oracle, experiment aggregation, and the
//! training loop on a planted-anomaly fixture.

use proptest::prelude::*;
use rand::Rng;

use gad_core::backbones::{BackboneKind, EncoderConfig};
use gad_core::eval::{auc, mean_std, run_experiment, sweep_view_count, train_once, Hyper};
use gad_core::fixtures::planted_fixture;
use gad_core::fusion::FusionConfig;
use gad_core::graph::stratified_split;
use gad_core::model::ModelSpec;
use gad_core::objectives::ObjectiveConfig;
use gad_core::rng::stream;

/// Quadratic scan: every (positive, negative) pair contributes 1, 0.5 on a
/// tie. The canonical definition, independent of any ranking shortcut.
fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        if labels[i] != 1 {
            continue;
        }
        for j in 0..scores.len() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_agrees_with_pairwise_oracle_on_a_thousand_tied_vectors() {
    let mut rng = stream(21, "test/auc");
    for trial in 0..1000 {
        let n = 2 + (trial % 40);
        // Coarse quantization forces plenty of ties.
        let scores: Vec<f64> =
            (0..n).map(|_| (rng.random::<f64>() * 8.0).floor() / 8.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        // Guarantee both classes.
        labels[0] = 1;
        labels[1 % n] = 0;
        let fast = auc(&scores, &labels).unwrap();
        let slow = pairwise_auc(&scores, &labels);
        assert!((fast - slow).abs() <= 1e-12, "trial {trial}: {fast} vs {slow}");
    }
}

#[test]
fn auc_spec_values() {
    assert_eq!(auc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
    assert_eq!(auc(&[0.3, 0.3, 0.3], &[1, 0, 1]).unwrap(), 0.5);
    assert_eq!(auc(&[0.8, 0.7, 0.3], &[1, 0, 1]).unwrap(), 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// AUC only sees the ordering, so strictly monotone transforms leave it
    /// bit-identical.
    #[test]
    fn auc_invariant_under_monotone_transforms(
        raw in proptest::collection::vec((0u8..2, -100i32..100), 4..60),
    ) {
        let mut labels: Vec<u8> = raw.iter().map(|&(l, _)| l).collect();
        labels[0] = 1;
        labels[1] = 0;
        let scores: Vec<f64> = raw.iter().map(|&(_, s)| s as f64 / 7.0).collect();
        let base = auc(&scores, &labels).unwrap();
        let scaled: Vec<f64> = scores.iter().map(|&s| 3.0 * s + 11.0).collect();
        let exped: Vec<f64> = scores.iter().map(|&s| s.exp()).collect();
        let tanhd: Vec<f64> = scores.iter().map(|&s| (s / 50.0).tanh()).collect();
        prop_assert_eq!(auc(&scaled, &labels).unwrap().to_bits(), base.to_bits());
        prop_assert_eq!(auc(&exped, &labels).unwrap().to_bits(), base.to_bits());
        prop_assert_eq!(auc(&tanhd, &labels).unwrap().to_bits(), base.to_bits());
    }
}

// ---------------------------------------------------------------------------
// training loop + experiments
// ---------------------------------------------------------------------------

fn quick_hyper() -> Hyper {
    Hyper { max_epochs: 60, ..Default::default() }
}

fn gcn_label_spec() -> ModelSpec {
    ModelSpec {
        views: vec![EncoderConfig::new(BackboneKind::Gcn).with_hidden(16)],
        fusion: FusionConfig { view_fusion: false, feature_fusion: false, ..Default::default() },
        objective: ObjectiveConfig::Label { lambda: Default::default() },
    }
}

#[test]
fn planted_fixture_beats_random_ranking() {
    let (g, _) = planted_fixture(0).unwrap();
    let split = stratified_split(&g, (0.4, 0.3, 0.3), 0).unwrap();
    let r = train_once(&g, &split, &gcn_label_spec(), &quick_hyper(), 1).unwrap();
    assert!(r.test_auc > 0.5, "test AUC {} should beat random", r.test_auc);
    assert!(r.epochs_run >= 1 && !r.curve.is_empty());
    assert_eq!(r.alpha, vec![1.0]);
}

#[test]
fn identical_seeds_give_bit_identical_results() {
    let (g, _) = planted_fixture(1).unwrap();
    let split = stratified_split(&g, (0.4, 0.3, 0.3), 0).unwrap();
    let hyper = Hyper { max_epochs: 12, ..Default::default() };
    let a = train_once(&g, &split, &gcn_label_spec(), &hyper, 7).unwrap();
    let b = train_once(&g, &split, &gcn_label_spec(), &hyper, 7).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = train_once(&g, &split, &gcn_label_spec(), &hyper, 8).unwrap();
    assert_ne!(a.test_auc.to_bits(), c.test_auc.to_bits());
}

#[test]
fn experiment_aggregates_recompute_from_per_seed_entries() {
    let (g, _) = planted_fixture(2).unwrap();
    let split = stratified_split(&g, (0.4, 0.3, 0.3), 0).unwrap();
    let hyper = Hyper { max_epochs: 15, ..Default::default() };
    let run = run_experiment(
        &g,
        &split,
        &gcn_label_spec(),
        &hyper,
        &[1, 2, 3, 4, 5],
        2,
        serde_json::Value::Null,
        String::new(),
    )
    .unwrap();
    assert_eq!(run.per_seed.len(), 5);
    assert!(!run.partial);
    let aucs: Vec<f64> = run.per_seed.iter().map(|r| r.test_auc).collect();
    let mean = aucs.iter().sum::<f64>() / 5.0;
    let var = aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 5.0;
    assert!((run.mean_auc - mean).abs() <= 1e-15);
    assert!((run.std_auc - var.sqrt()).abs() <= 1e-15);

    // Parallel and sequential execution agree bit-for-bit.
    let run_seq = run_experiment(
        &g,
        &split,
        &gcn_label_spec(),
        &hyper,
        &[1, 2, 3, 4, 5],
        1,
        serde_json::Value::Null,
        String::new(),
    )
    .unwrap();
    assert_eq!(
        serde_json::to_string(&run.per_seed).unwrap(),
        serde_json::to_string(&run_seq.per_seed).unwrap()
    );
}

#[test]
fn single_seed_experiment_has_zero_std() {
    let (g, _) = planted_fixture(3).unwrap();
    let split = stratified_split(&g, (0.4, 0.3, 0.3), 0).unwrap();
    let hyper = Hyper { max_epochs: 8, ..Default::default() };
    let run = run_experiment(
        &g,
        &split,
        &gcn_label_spec(),
        &hyper,
        &[42],
        1,
        serde_json::Value::Null,
        String::new(),
    )
    .unwrap();
    assert_eq!(run.std_auc, 0.0);
    assert_eq!(run.mean_auc, run.per_seed[0].test_auc);
}

#[test]
fn mean_std_of_identical_values_is_exactly_zero() {
    let (m, s) = mean_std(&[0.7234567890123, 0.7234567890123, 0.7234567890123]);
    assert_eq!(m, 0.7234567890123);
    assert_eq!(s, 0.0);
}

#[test]
fn sweep_samples_combinations_from_the_pool() {
    let (g, _) = planted_fixture(4).unwrap();
    let split = stratified_split(&g, (0.4, 0.3, 0.3), 0).unwrap();
    let pool = vec![
        EncoderConfig::new(BackboneKind::Gcn).with_hidden(8),
        EncoderConfig::new(BackboneKind::Gat).with_hidden(8),
        EncoderConfig::new(BackboneKind::Gin).with_hidden(8),
    ];
    let base = ModelSpec {
        views: vec![],
        fusion: FusionConfig { unified_dim: 8, ..Default::default() },
        objective: ObjectiveConfig::Label { lambda: Default::default() },
    };
    let hyper = Hyper { max_epochs: 6, ..Default::default() };

    // count = |pool|: only one combination exists.
    let full = sweep_view_count(&g, &split, &pool, 3, 4, &base, &hyper, &[1], 1, 9).unwrap();
    assert!(full.sampled_combos.iter().all(|c| c == &vec![0, 1, 2]));

    // count = 2: samples come from the 3 possible pairs.
    let pairs = sweep_view_count(&g, &split, &pool, 2, 5, &base, &hyper, &[1], 1, 9).unwrap();
    for combo in &pairs.sampled_combos {
        assert_eq!(combo.len(), 2);
        assert!(combo[0] < combo[1] && combo[1] <= 2);
    }

    // count out of range
    assert!(sweep_view_count(&g, &split, &pool, 4, 2, &base, &hyper, &[1], 1, 9).is_err());
    assert!(sweep_view_count(&g, &split, &pool, 0, 2, &base, &hyper, &[1], 1, 9).is_err());
}

#[test]
fn all_objectives_train_on_a_small_fixture() {
    let (g, _) = planted_fixture(5).unwrap();
    let split = stratified_split(&g, (0.4, 0.3, 0.3), 0).unwrap();
    let hyper = Hyper { max_epochs: 8, ..Default::default() };
    for objective in [
        ObjectiveConfig::Label { lambda: Default::default() },
        ObjectiveConfig::Reconstruction {
            lambda: 1.0,
            dense_limit: 5000,
            row_sampled_structure: false,
        },
        ObjectiveConfig::Ssl { embed_dim: 16, lambda: Default::default() },
    ] {
        let spec = ModelSpec {
            views: vec![EncoderConfig::new(BackboneKind::Gcn).with_hidden(16)],
            fusion: FusionConfig {
                view_fusion: false,
                feature_fusion: false,
                ..Default::default()
            },
            objective,
        };
        let r = train_once(&g, &split, &spec, &hyper, 3).unwrap();
        assert!(r.test_auc.is_finite());
        assert!(r.curve.iter().all(|e| e.train_loss.is_finite() && e.val_loss.is_finite()));
    }
}

#[test]
fn row_sampled_structure_mode_trains() {
    let (g, _) = planted_fixture(6).unwrap();
    let split = stratified_split(&g, (0.4, 0.3, 0.3), 0).unwrap();
    // Force the sampled route by setting the dense limit below n.
    let spec = ModelSpec {
        views: vec![EncoderConfig::new(BackboneKind::Gcn).with_hidden(16)],
        fusion: FusionConfig { view_fusion: false, feature_fusion: false, ..Default::default() },
        objective: ObjectiveConfig::Reconstruction {
            lambda: 0.5,
            dense_limit: 100,
            row_sampled_structure: true,
        },
    };
    let hyper = Hyper { max_epochs: 5, ..Default::default() };
    let r = train_once(&g, &split, &spec, &hyper, 1).unwrap();
    assert!(r.test_auc.is_finite());

    // Without the flag, the same limit is an instructive error.
    let spec_err = ModelSpec {
        objective: ObjectiveConfig::Reconstruction {
            lambda: 0.5,
            dense_limit: 100,
            row_sampled_structure: false,
        },
        ..spec
    };
    let err = train_once(&g, &split, &spec_err, &hyper, 1).unwrap_err();
    assert!(err.to_string().contains("row_sampled_structure"));
}
