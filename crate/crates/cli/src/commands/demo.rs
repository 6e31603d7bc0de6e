//! `gad demo-boundary`: train on a sampled point cloud (tight Gaussian
//! cluster vs. uniform anomalies), then score a dense grid attached to the
//! cloud by kNN, for external contour plotting.

use std::path::Path;

use gad_core::eval::{score_graph, train_model};
use gad_core::fixtures::point_cloud;
use gad_core::graph::{attach_points, knn_graph, stratified_split};
use gad_core::{Matrix, Result};

use crate::commands::{csv_with_hash, fmt_f64, write_text, SPLIT_RATIOS};
use crate::config::ExperimentConfig;

pub fn run(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let d = &config.demo;
    let (points, labels) = point_cloud(d.n_normal, d.n_anomalous, d.sigma, d.range, d.demo_seed);
    let mut graph = knn_graph(&points, d.k)?;
    graph.labels = Some(labels.clone());
    graph.name = "point-cloud-demo".into();

    let split = stratified_split(&graph, SPLIT_RATIOS, config.split_seed)?;
    let seed = config.seeds[0];
    let (model, result) = train_model(&graph, &split, &config.model_spec(), &config.hyper, seed)?;
    println!(
        "demo training: test AUC {:.4} after {} epoch(s) (seed {seed})",
        result.test_auc, result.epochs_run
    );

    // Grid points join the graph through their k nearest sample points and
    // are scored with the trained parameters.
    let res = d.grid_resolution;
    let mut grid_rows = Vec::with_capacity(res * res);
    for iy in 0..res {
        for ix in 0..res {
            let x = -d.range + 2.0 * d.range * ix as f64 / (res - 1) as f64;
            let y = -d.range + 2.0 * d.range * iy as f64 / (res - 1) as f64;
            grid_rows.push(vec![x, y]);
        }
    }
    let grid = Matrix::from_rows(&grid_rows)?;
    let extended = attach_points(&graph, &grid, d.k)?;
    let (scores, _) = score_graph(&model, &extended)?;
    let grid_scores = &scores[graph.n()..];

    let rows: Vec<String> = grid_rows
        .iter()
        .zip(grid_scores)
        .map(|(p, &s)| format!("{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(s)))
        .collect();
    let meta = vec![
        format!("n_normal={} n_anomalous={} k={} seed={seed}", d.n_normal, d.n_anomalous, d.k),
        format!("train_test_auc={}", fmt_f64(result.test_auc)),
    ];
    write_text(&out.join("boundary.csv"), &csv_with_hash(&config.hash(), &meta, "x,y,score", &rows))?;

    // The sampled cloud with its labels and scores, for overlay plots.
    let cloud_rows: Vec<String> = (0..graph.n())
        .map(|i| {
            format!(
                "{},{},{},{}",
                fmt_f64(points.at(i, 0)),
                fmt_f64(points.at(i, 1)),
                labels[i],
                fmt_f64(scores[i])
            )
        })
        .collect();
    write_text(
        &out.join("points.csv"),
        &csv_with_hash(&config.hash(), &[], "x,y,label,score", &cloud_rows),
    )?;
    println!("boundary grid {}x{} written to {}", res, res, out.join("boundary.csv").display());
    Ok(())
}
