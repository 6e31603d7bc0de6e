//! `gad train`: multi-seed training with JSON results and per-epoch CSV
//! curves. `--combos` evaluates several view combinations and keeps the one
//! with the best mean validation AUC.

use std::path::Path;

use gad_core::backbones::BackboneKind;
use gad_core::eval::{run_experiment, RunResult};
use gad_core::model::ModelSpec;
use gad_core::{GadError, Graph, Result};

use crate::commands::{csv_with_hash, fmt_f64, prepare_graph, split_for, write_json, write_text};
use crate::config::{ExperimentConfig, ViewConfig};

pub fn run(config: &ExperimentConfig, out: &Path, combos: Option<&str>) -> Result<()> {
    let (g, _) = prepare_graph(config)?;
    let split = split_for(config, &g)?;

    match combos {
        None => {
            let result = run_one(config, &g, &split, &config.model_spec())?;
            persist(config, out, &result)?;
            summarize(&result);
            if result.partial {
                return Err(GadError::Train(format!(
                    "{} of {} seeds failed; partial results written to {}",
                    result.failed_seeds.len(),
                    config.seeds.len(),
                    out.display()
                )));
            }
            Ok(())
        }
        Some(spec_text) => {
            let combos = parse_combos(spec_text, config)?;
            let mut best: Option<(usize, RunResult)> = None;
            let mut summaries = Vec::new();
            for (i, views) in combos.iter().enumerate() {
                let spec = ModelSpec {
                    views: views.iter().map(ViewConfig::to_encoder).collect(),
                    fusion: config.fusion.to_fusion(None),
                    objective: config.objective.clone(),
                };
                let result = run_one(config, &g, &split, &spec)?;
                let names: Vec<&str> = views.iter().map(|v| v.kind.name()).collect();
                println!(
                    "combo [{}]: test AUC {:.4} +/- {:.4} (val {:.4})",
                    names.join(","),
                    result.mean_auc,
                    result.std_auc,
                    result.mean_best_val_auc
                );
                summaries.push(serde_json::json!({
                    "views": names,
                    "mean_auc": result.mean_auc,
                    "std_auc": result.std_auc,
                    "mean_best_val_auc": result.mean_best_val_auc,
                }));
                write_json(&out.join(format!("combo_{i}.json")), &serde_json::to_value(&result).unwrap())?;
                let better = match &best {
                    None => true,
                    Some((_, b)) => result.mean_best_val_auc > b.mean_best_val_auc,
                };
                if better {
                    best = Some((i, result));
                }
            }
            let (winner, result) = best.expect("at least one combo");
            write_json(
                &out.join("combos.json"),
                &serde_json::json!({
                    "config_hash": config.hash(),
                    "selection": "best mean validation AUC",
                    "selected_combo": winner,
                    "combos": summaries,
                }),
            )?;
            persist(config, out, &result)?;
            summarize(&result);
            Ok(())
        }
    }
}

fn run_one(
    config: &ExperimentConfig,
    g: &Graph,
    split: &gad_core::Split,
    spec: &ModelSpec,
) -> Result<RunResult> {
    run_experiment(
        g,
        split,
        spec,
        &config.hyper,
        &config.seeds,
        config.workers,
        config.echo(),
        config.hash(),
    )
}

fn persist(config: &ExperimentConfig, out: &Path, result: &RunResult) -> Result<()> {
    write_json(&out.join("run_result.json"), &serde_json::to_value(result).expect("serializes"))?;
    for seed_result in &result.per_seed {
        let rows: Vec<String> = seed_result
            .curve
            .iter()
            .map(|e| {
                format!(
                    "{},{},{},{}",
                    e.epoch,
                    fmt_f64(e.train_loss),
                    fmt_f64(e.val_loss),
                    fmt_f64(e.val_auc)
                )
            })
            .collect();
        let csv = csv_with_hash(
            &config.hash(),
            &[format!("seed={}", seed_result.seed)],
            "epoch,train_loss,val_loss,val_auc",
            &rows,
        );
        write_text(&out.join(format!("curves_seed{}.csv", seed_result.seed)), &csv)?;
    }
    Ok(())
}

fn summarize(result: &RunResult) {
    println!(
        "test AUC {:.4} +/- {:.4} over {} seed(s); best-val AUC {:.4}",
        result.mean_auc,
        result.std_auc,
        result.per_seed.len(),
        result.mean_best_val_auc
    );
}

/// Parse `"gat,gin;gcn,gat,gin"` into view lists; hidden width and slopes
/// come from the first configured view.
fn parse_combos(text: &str, config: &ExperimentConfig) -> Result<Vec<Vec<ViewConfig>>> {
    let template = config.views.first().cloned().unwrap_or_default();
    let mut combos = Vec::new();
    for group in text.split(';').filter(|s| !s.trim().is_empty()) {
        let mut views = Vec::new();
        for name in group.split(',') {
            let kind = match name.trim() {
                "gcn" => BackboneKind::Gcn,
                "gat" => BackboneKind::Gat,
                "gin" => BackboneKind::Gin,
                other => {
                    return Err(GadError::Config(format!(
                        "unknown backbone {other:?} in --combos (expected gcn, gat, gin)"
                    )))
                }
            };
            views.push(ViewConfig { kind, ..template.clone() });
        }
        if views.is_empty() {
            return Err(GadError::Config("empty combo in --combos".into()));
        }
        combos.push(views);
    }
    if combos.is_empty() {
        return Err(GadError::Config("--combos lists no combinations".into()));
    }
    Ok(combos)
}
