//! `gad sweep-views`: detection rate and stability versus the number of
//! fused views, sampled from a method pool.

use std::path::Path;

use gad_core::backbones::BackboneKind;
use gad_core::eval::sweep_view_count;
use gad_core::model::ModelSpec;
use gad_core::{GadError, Result};

use crate::commands::{csv_with_hash, fmt_f64, prepare_graph, split_for, write_text};
use crate::config::{ExperimentConfig, ViewConfig};

pub fn run(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let (g, _) = prepare_graph(config)?;
    let split = split_for(config, &g)?;

    let template = config.views.first().cloned().unwrap_or_default();
    let pool: Vec<ViewConfig> = config.sweep.pool.clone().unwrap_or_else(|| {
        [BackboneKind::Gcn, BackboneKind::Gat, BackboneKind::Gin]
            .into_iter()
            .map(|kind| ViewConfig { kind, ..template.clone() })
            .collect()
    });
    let encoders: Vec<_> = pool.iter().map(ViewConfig::to_encoder).collect();
    let counts: Vec<usize> =
        config.sweep.counts.clone().unwrap_or_else(|| (1..=pool.len()).collect());
    for &c in &counts {
        if c == 0 || c > pool.len() {
            return Err(GadError::Config(format!(
                "sweep count {c} outside 1..={} (pool size)",
                pool.len()
            )));
        }
    }

    let base = ModelSpec {
        views: vec![],
        fusion: config.fusion.to_fusion(None),
        objective: config.objective.clone(),
    };
    let mut rows = Vec::new();
    for &count in &counts {
        let point = sweep_view_count(
            &g,
            &split,
            &encoders,
            count,
            config.sweep.samples,
            &base,
            &config.hyper,
            &config.seeds,
            config.workers,
            config.sweep.sweep_seed,
        )?;
        println!(
            "views={count}: mean AUC {:.4} +/- {:.4} over {} sample(s)",
            point.mean_auc,
            point.std_auc,
            point.sampled_combos.len()
        );
        rows.push(format!("{count},{},{}", fmt_f64(point.mean_auc), fmt_f64(point.std_auc)));
    }

    let pool_names: Vec<&str> = pool.iter().map(|v| v.kind.name()).collect();
    let meta = vec![format!("pool={}", pool_names.join("+")), format!("samples={}", config.sweep.samples)];
    let csv = csv_with_hash(&config.hash(), &meta, "count,mean_auc,std_auc", &rows);
    write_text(&out.join("sweep.csv"), &csv)?;
    Ok(())
}
