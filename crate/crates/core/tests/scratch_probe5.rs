//! Temporary calibration probe #5; deleted before finalization.

use gad_core::backbones::{BackboneKind, EncoderConfig};
use gad_core::eval::{run_experiment, sweep_view_count, Hyper};
use gad_core::fixtures::benchmark_fixture;
use gad_core::fusion::FusionConfig;
use gad_core::graph::stratified_split;
use gad_core::model::ModelSpec;
use gad_core::objectives::ObjectiveConfig;

#[test]
#[ignore]
fn probe5() {
    let h = 48;
    use BackboneKind::*;
    let t0 = std::time::Instant::now();
    for fixture_seed in [4u64, 5, 7] {
        let g = benchmark_fixture(fixture_seed, 1.3).unwrap();
        let split = stratified_split(&g, (0.4, 0.3, 0.3), 0).unwrap();

        // criterion 6: objectives with single GCN
        for (name, obj) in [
            ("label", ObjectiveConfig::Label { lambda: Default::default() }),
            ("recon", ObjectiveConfig::Reconstruction { lambda: 1.0, dense_limit: 5000, row_sampled_structure: false }),
            ("ssl  ", ObjectiveConfig::Ssl { embed_dim: 48, lambda: Default::default() }),
        ] {
            let spec = ModelSpec {
                views: vec![EncoderConfig::new(Gcn).with_hidden(h)],
                fusion: FusionConfig { view_fusion: false, feature_fusion: false, ..Default::default() },
                objective: obj,
            };
            let r = run_experiment(&g, &split, &spec, &Hyper::default(), &[0, 1, 2, 3, 4], 5, serde_json::Value::Null, String::new()).unwrap();
            println!("f={fixture_seed} {name}: {:.4} +/- {:.4}", r.mean_auc, r.std_auc);
        }

        // criterion 7: sweep stds
        let pool = vec![
            EncoderConfig::new(Gcn).with_hidden(h),
            EncoderConfig::new(Gat).with_hidden(h),
            EncoderConfig::new(Gin).with_hidden(h),
        ];
        let base = ModelSpec {
            views: vec![],
            fusion: FusionConfig { view_fusion: true, feature_fusion: true, unified_dim: h, ..Default::default() },
            objective: ObjectiveConfig::Label { lambda: Default::default() },
        };
        let p1 = sweep_view_count(&g, &split, &pool, 1, 5, &base, &Hyper::default(), &[0,1,2,3,4], 5, 17).unwrap();
        let p3 = sweep_view_count(&g, &split, &pool, 3, 5, &base, &Hyper::default(), &[0,1,2,3,4], 5, 17).unwrap();
        println!("f={fixture_seed} sweep std count1 {:.4} count3 {:.4}  [{:?}]", p1.std_auc, p3.std_auc, t0.elapsed());
    }
}
