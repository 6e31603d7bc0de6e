//! `gad inject`: materialize an anomaly-injected dataset directory.

use std::path::Path;

use gad_core::graph::write_graph;
use gad_core::{GadError, Result};

use crate::commands::{apply_anomaly_mode, write_json};
use crate::config::{AnomalyMode, ExperimentConfig};

pub fn run(config: &ExperimentConfig, out: &Path) -> Result<()> {
    if matches!(config.anomaly, AnomalyMode::Organic) {
        return Err(GadError::Config(
            "anomaly mode \"organic\" injects nothing; choose \"minimal\" or \"synthetic\"".into(),
        ));
    }
    let g = gad_core::graph::load_graph(config.dataset_dir()?)?;
    let (injected, report) = apply_anomaly_mode(&g, &config.anomaly)?;
    let report = report.expect("non-organic modes always report");

    let dataset_dir = out.join("dataset");
    write_graph(&injected, &dataset_dir)?;

    let mut doc = serde_json::to_value(&report).expect("report serializes");
    doc.as_object_mut()
        .expect("report is an object")
        .insert("config_hash".into(), serde_json::Value::String(config.hash()));
    write_json(&out.join("injection_report.json"), &doc)?;

    println!(
        "injected {} anomalies ({} new edges) into {} -> {}",
        report.anomalies.len(),
        report.edges_added,
        injected.name,
        dataset_dir.display()
    );
    Ok(())
}
