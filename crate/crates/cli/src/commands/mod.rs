//! Subcommand implementations and shared output plumbing.

pub mod demo;
pub mod heatmap;
pub mod inject;
pub mod sweep;
pub mod train;

use std::path::Path;

use gad_core::graph::{load_graph, stratified_split, Split};
use gad_core::inject::{make_synthetic, minimal_class_labels, InjectionReport};
use gad_core::{GadError, Graph, Result};

use crate::config::{AnomalyMode, ExperimentConfig};

pub const SPLIT_RATIOS: (f64, f64, f64) = (0.4, 0.3, 0.3);

/// Load the configured dataset and apply the anomaly mode in memory.
pub fn prepare_graph(config: &ExperimentConfig) -> Result<(Graph, Option<InjectionReport>)> {
    let g = load_graph(config.dataset_dir()?)?;
    apply_anomaly_mode(&g, &config.anomaly)
}

pub fn apply_anomaly_mode(
    g: &Graph,
    mode: &AnomalyMode,
) -> Result<(Graph, Option<InjectionReport>)> {
    match mode {
        AnomalyMode::Organic => {
            if g.labels.is_none() {
                return Err(GadError::Config(
                    "anomaly mode is \"organic\" but the dataset ships no labels.csv".into(),
                ));
            }
            Ok((g.clone(), None))
        }
        AnomalyMode::Minimal => {
            if g.class_labels.is_none() {
                return Err(GadError::Config(
                    "anomaly mode is \"minimal\" but the dataset ships no classes.csv".into(),
                ));
            }
            let (out, report) = minimal_class_labels(g)?;
            Ok((out, Some(report)))
        }
        AnomalyMode::Synthetic { ratio, clique_size, candidate_pool, seed } => {
            let (out, report) = make_synthetic(g, *ratio, *clique_size, *candidate_pool, *seed)?;
            Ok((out, Some(report)))
        }
    }
}

pub fn split_for(config: &ExperimentConfig, g: &Graph) -> Result<Split> {
    stratified_split(g, SPLIT_RATIOS, config.split_seed)
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| GadError::Io { path: parent.display().to_string(), source: e })?;
    }
    std::fs::write(path, contents)
        .map_err(|e| GadError::Io { path: path.display().to_string(), source: e })
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    write_text(path, &text)
}

/// CSV with the provenance header line every output carries.
pub fn csv_with_hash(hash: &str, extra_meta: &[String], header: &str, rows: &[String]) -> String {
    let mut out = format!("# config_hash={hash}\n");
    for m in extra_meta {
        out.push_str(&format!("# {m}\n"));
    }
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

/// Format an f64 losslessly for CSV (shortest round-trip form).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
