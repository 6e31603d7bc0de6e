//! Plain-text dataset directories.
//!
//! A dataset is a directory holding:
//!   - `meta.json`     — `{"name": ..., "n": ..., "d": ...}`, exactly these keys
//!   - `edges.tsv`     — two 0-based integer columns, whitespace separated
//!   - `features.csv`  — n rows of d comma-separated floats
//!   - `labels.csv`    — optional, one 0/1 integer per line
//!   - `classes.csv`   — optional, one integer class id per line

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::matrix::Matrix;
use crate::error::{GadError, Result};
use crate::graph::Graph;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    name: String,
    n: usize,
    d: usize,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| GadError::Io { path: path.display().to_string(), source: e })
}

fn data_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> GadError {
    GadError::Data(format!("{}:{line}: {msg}", path.display()))
}

pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let meta: Meta = serde_json::from_str(&read_to_string(&dir.join("meta.json"))?)
        .map_err(|e| GadError::Data(format!("{}: {e}", dir.join("meta.json").display())))?;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (ln, line) in read_to_string(&edges_path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split_whitespace();
        let (a, b) = match (cells.next(), cells.next(), cells.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(data_err(&edges_path, ln + 1, "expected two columns")),
        };
        let a: usize =
            a.parse().map_err(|_| data_err(&edges_path, ln + 1, format!("bad index {a:?}")))?;
        let b: usize =
            b.parse().map_err(|_| data_err(&edges_path, ln + 1, format!("bad index {b:?}")))?;
        if a >= meta.n || b >= meta.n {
            return Err(data_err(&edges_path, ln + 1, format!("node index >= n={}", meta.n)));
        }
        edges.push((a, b));
    }

    let feat_path = dir.join("features.csv");
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in read_to_string(&feat_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| data_err(&feat_path, ln + 1, format!("non-numeric cell {c:?}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != meta.d {
            return Err(data_err(&feat_path, ln + 1, format!("{} cells, expected d={}", row.len(), meta.d)));
        }
        rows.push(row);
    }
    if rows.len() != meta.n {
        return Err(GadError::Data(format!(
            "{}: {} feature rows, meta says n={}",
            feat_path.display(),
            rows.len(),
            meta.n
        )));
    }
    let features = Matrix::from_rows(&rows)?;

    let labels = read_int_column(&dir.join("labels.csv"), meta.n)?
        .map(|v| {
            if v.iter().any(|&x| x > 1) {
                Err(GadError::Data(format!("{}: labels must be 0/1", dir.join("labels.csv").display())))
            } else {
                Ok(v.into_iter().map(|x| x as u8).collect::<Vec<u8>>())
            }
        })
        .transpose()?;
    let class_labels = read_int_column(&dir.join("classes.csv"), meta.n)?;

    Graph::new(meta.name, features, &edges, labels, class_labels)
}

fn read_int_column(path: &Path, n: usize) -> Result<Option<Vec<usize>>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(n);
    for (ln, line) in read_to_string(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: usize =
            line.parse().map_err(|_| data_err(path, ln + 1, format!("bad integer {line:?}")))?;
        out.push(v);
    }
    if out.len() != n {
        return Err(GadError::Data(format!("{}: {} rows, expected {n}", path.display(), out.len())));
    }
    Ok(Some(out))
}

/// Write a graph as a dataset directory (creates it if needed).
/// `load_graph(write_graph(g))` round-trips the node count, edge set,
/// features, and labels exactly.
pub fn write_graph(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| GadError::Io { path: dir.display().to_string(), source: e })?;
    let write = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| GadError::Io { path: path.display().to_string(), source: e })
    };

    let meta = Meta { name: g.name.clone(), n: g.n(), d: g.dim() };
    write("meta.json", serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n")?;

    let mut edges = String::new();
    for (a, b) in g.edge_set() {
        edges.push_str(&format!("{a}\t{b}\n"));
    }
    write("edges.tsv", edges)?;

    let mut feats = String::new();
    for i in 0..g.n() {
        let row: Vec<String> = g.features.row(i).iter().map(|v| format!("{v}")).collect();
        feats.push_str(&row.join(","));
        feats.push('\n');
    }
    write("features.csv", feats)?;

    if let Some(y) = &g.labels {
        let mut s = String::new();
        for v in y {
            s.push_str(&format!("{v}\n"));
        }
        write("labels.csv", s)?;
    }
    if let Some(c) = &g.class_labels {
        let mut s = String::new();
        for v in c {
            s.push_str(&format!("{v}\n"));
        }
        write("classes.csv", s)?;
    }
    Ok(())
}
