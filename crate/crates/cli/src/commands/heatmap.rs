//! `gad heatmap`: detection rate over a grid of frozen view-weight pairs,
//! plus the learned-weight run for comparison.

use std::collections::HashMap;
use std::path::Path;

use gad_core::eval::run_experiment;
use gad_core::model::ModelSpec;
use gad_core::{GadError, Result};

use crate::commands::{csv_with_hash, fmt_f64, prepare_graph, split_for, write_text};
use crate::config::{ExperimentConfig, ViewConfig};

pub fn run(config: &ExperimentConfig, out: &Path) -> Result<()> {
    if config.views.len() != 2 {
        return Err(GadError::Config(format!(
            "heatmap needs exactly 2 views, config has {}",
            config.views.len()
        )));
    }
    let (g, _) = prepare_graph(config)?;
    let split = split_for(config, &g)?;
    let views: Vec<_> = config.views.iter().map(ViewConfig::to_encoder).collect();

    let run_with = |fixed: Option<Vec<f64>>| -> Result<gad_core::eval::RunResult> {
        let spec = ModelSpec {
            views: views.clone(),
            fusion: config.fusion.to_fusion(fixed),
            objective: config.objective.clone(),
        };
        run_experiment(
            &g,
            &split,
            &spec,
            &config.hyper,
            &config.seeds,
            config.workers,
            serde_json::Value::Null,
            config.hash(),
        )
    };

    // Weight pairs scale-invariantly: (w1, w2) and (c*w1, c*w2) are the same
    // model, so grid points are cached by their normalized first weight.
    let step = config.heatmap.grid_step;
    let ticks: Vec<f64> = {
        let mut t = Vec::new();
        let mut v: f64 = 0.0;
        while v < 1.0 + 1e-12 {
            t.push((v * 1e9).round() / 1e9);
            v += step;
        }
        t
    };
    let mut cache: HashMap<u64, (f64, f64)> = HashMap::new();
    let mut rows = Vec::new();
    for &w1 in &ticks {
        for &w2 in &ticks {
            if w1 == 0.0 && w2 == 0.0 {
                continue;
            }
            let key = (w1 / (w1 + w2)).to_bits();
            let (mean, std) = match cache.get(&key) {
                Some(&v) => v,
                None => {
                    let r = run_with(Some(vec![w1, w2]))?;
                    cache.insert(key, (r.mean_auc, r.std_auc));
                    (r.mean_auc, r.std_auc)
                }
            };
            rows.push(format!("{},{},{},{}", fmt_f64(w1), fmt_f64(w2), fmt_f64(mean), fmt_f64(std)));
        }
    }

    let learned = run_with(None)?;
    let alpha = &learned.per_seed[0].alpha;
    let meta = vec![
        "weights normalized by w1+w2 before use".to_string(),
        format!(
            "learned_alpha={} learned_mean_auc={}",
            serde_json::to_string(alpha).expect("alpha serializes"),
            fmt_f64(learned.mean_auc)
        ),
    ];
    let csv = csv_with_hash(&config.hash(), &meta, "w1,w2,mean_auc,std_auc", &rows);
    write_text(&out.join("heatmap.csv"), &csv)?;
    println!(
        "heatmap: {} grid rows ({} trained points), learned-alpha AUC {:.4}",
        rows.len(),
        cache.len(),
        learned.mean_auc
    );
    Ok(())
}
