//! Anomaly construction: minimal-class relabeling, clique (structural)
//! injection, and farthest-of-k feature swaps (attribute) injection.
//!
//! All operations are pure: they return a new graph plus a report of what
//! changed, and are deterministic per `(graph, params, seed)`.

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::graph::Graph;
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyKind {
    Structural,
    Attribute,
    MinimalClass,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InjectedAnomaly {
    pub id: usize,
    pub kind: AnomalyKind,
}

/// A target whose features were swapped, with the candidate pool that was
/// scanned; kept so the farthest-candidate property can be re-checked.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttributeSwap {
    pub target: usize,
    pub candidates: Vec<usize>,
    pub chosen: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct InjectionParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clique_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_pool: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InjectionReport {
    pub anomalies: Vec<InjectedAnomaly>,
    pub edges_added: usize,
    pub params: InjectionParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attribute_swaps: Vec<AttributeSwap>,
}

impl InjectionReport {
    pub fn anomaly_ids(&self) -> Vec<usize> {
        self.anomalies.iter().map(|a| a.id).collect()
    }
}

/// Relabel the least-frequent original class as the anomaly class.
/// A tie for the smallest class resolves to the lowest class id.
pub fn minimal_class_labels(g: &Graph) -> Result<(Graph, InjectionReport)> {
    let classes = g
        .class_labels
        .as_ref()
        .ok_or_else(|| GadError::Data("minimal-class labeling requires class labels".into()))?;
    let max_class = *classes.iter().max().expect("non-empty class labels");
    let mut counts = vec![0usize; max_class + 1];
    for &c in classes {
        counts[c] += 1;
    }
    let present: Vec<usize> = (0..=max_class).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(GadError::Data("minimal-class labeling requires at least 2 classes".into()));
    }
    let min_count = present.iter().map(|&c| counts[c]).min().expect("non-empty");
    let ties: Vec<usize> = present.iter().copied().filter(|&c| counts[c] == min_count).collect();
    if ties.len() > 1 {
        log::warn!("classes {ties:?} tie for smallest ({min_count} nodes); using class {}", ties[0]);
    }
    let anomalous_class = ties[0];

    let labels: Vec<u8> = classes.iter().map(|&c| u8::from(c == anomalous_class)).collect();
    let anomalies = (0..g.n())
        .filter(|&i| labels[i] == 1)
        .map(|id| InjectedAnomaly { id, kind: AnomalyKind::MinimalClass })
        .collect();
    let mut out = g.clone();
    out.labels = Some(labels);
    let report = InjectionReport {
        anomalies,
        edges_added: 0,
        params: InjectionParams::default(),
        attribute_swaps: vec![],
    };
    Ok((out, report))
}

fn eligible_targets(g: &Graph) -> Vec<usize> {
    match &g.labels {
        Some(y) => (0..g.n()).filter(|&i| y[i] == 0).collect(),
        None => (0..g.n()).collect(),
    }
}

fn with_labels_set(g: &Graph, ids: &[usize]) -> Vec<u8> {
    let mut y = g.labels.clone().unwrap_or_else(|| vec![0; g.n()]);
    for &i in ids {
        y[i] = 1;
    }
    y
}

/// Turn `num_cliques` disjoint groups of `m` non-anomalous nodes into
/// cliques and label every member anomalous.
pub fn inject_structural(
    g: &Graph,
    clique_size: usize,
    num_cliques: usize,
    seed: u64,
) -> Result<(Graph, InjectionReport)> {
    if clique_size < 2 {
        return Err(GadError::Config("clique size must be at least 2".into()));
    }
    let mut eligible = eligible_targets(g);
    let need = clique_size * num_cliques;
    if need > eligible.len() {
        return Err(GadError::Data(format!(
            "structural injection needs {need} non-anomalous nodes, only {} available",
            eligible.len()
        )));
    }
    let mut rng = stream(seed, "injection/structural");
    eligible.shuffle(&mut rng);
    let targets: Vec<usize> = eligible.into_iter().take(need).collect();

    let mut edges = g.edge_set();
    let mut edges_added = 0;
    for clique in targets.chunks(clique_size) {
        for (ai, &a) in clique.iter().enumerate() {
            for &b in &clique[ai + 1..] {
                if edges.insert((a.min(b), a.max(b))) {
                    edges_added += 1;
                }
            }
        }
    }
    let edge_list: Vec<(usize, usize)> = edges.into_iter().collect();
    let labels = with_labels_set(g, &targets);
    let out = Graph::new(
        g.name.clone(),
        g.features.clone(),
        &edge_list,
        Some(labels),
        g.class_labels.clone(),
    )?;
    let mut anomalies: Vec<InjectedAnomaly> = targets
        .into_iter()
        .map(|id| InjectedAnomaly { id, kind: AnomalyKind::Structural })
        .collect();
    anomalies.sort_by_key(|a| a.id);
    let report = InjectionReport {
        anomalies,
        edges_added,
        params: InjectionParams { clique_size: Some(clique_size), seed: Some(seed), ..Default::default() },
        attribute_swaps: vec![],
    };
    Ok((out, report))
}

/// For each sampled target, swap its features with the farthest of `k`
/// randomly sampled candidates (Euclidean distance, original features).
pub fn inject_attribute(
    g: &Graph,
    num_targets: usize,
    candidate_pool: usize,
    seed: u64,
) -> Result<(Graph, InjectionReport)> {
    if candidate_pool == 0 {
        return Err(GadError::Config("candidate pool must be at least 1".into()));
    }
    let n = g.n();
    let k = if candidate_pool > n - 1 {
        log::warn!("candidate pool {candidate_pool} exceeds n-1={}; clamping", n - 1);
        n - 1
    } else {
        candidate_pool
    };
    let mut eligible = eligible_targets(g);
    if num_targets > eligible.len() {
        return Err(GadError::Data(format!(
            "attribute injection needs {num_targets} non-anomalous nodes, only {} available",
            eligible.len()
        )));
    }
    let mut rng = stream(seed, "injection/attribute");
    eligible.shuffle(&mut rng);
    let targets: Vec<usize> = eligible.into_iter().take(num_targets).collect();

    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    // All distances and replacement rows come from the pre-injection features.
    let original = g.features.clone();
    let mut features = g.features.clone();
    let mut swaps = Vec::with_capacity(targets.len());
    let others: Vec<usize> = (0..n).collect();
    for &t in &targets {
        let candidates: Vec<usize> = others
            .iter()
            .filter(|&&j| j != t)
            .copied()
            .collect::<Vec<_>>()
            .choose_multiple(&mut rng, k)
            .copied()
            .collect();
        let chosen = *candidates
            .iter()
            .max_by(|&&a, &&b| {
                dist2(original.row(a), original.row(t))
                    .total_cmp(&dist2(original.row(b), original.row(t)))
                    .then(b.cmp(&a))
            })
            .expect("k >= 1");
        for j in 0..original.cols() {
            features.set(t, j, original.at(chosen, j));
        }
        swaps.push(AttributeSwap { target: t, candidates, chosen });
    }

    let labels = with_labels_set(g, &targets);
    let edge_list: Vec<(usize, usize)> = g.edge_set().into_iter().collect();
    let out =
        Graph::new(g.name.clone(), features, &edge_list, Some(labels), g.class_labels.clone())?;
    let mut anomalies: Vec<InjectedAnomaly> =
        targets.into_iter().map(|id| InjectedAnomaly { id, kind: AnomalyKind::Attribute }).collect();
    anomalies.sort_by_key(|a| a.id);
    let report = InjectionReport {
        anomalies,
        edges_added: 0,
        params: InjectionParams { candidate_pool: Some(k), seed: Some(seed), ..Default::default() },
        attribute_swaps: swaps,
    };
    Ok((out, report))
}

/// Plant `round(ratio * n)` anomalies, split as evenly as possible between
/// whole cliques of size `clique_size` and attribute swaps; the structural
/// share rounds down to a multiple of the clique size and the remainder
/// becomes attribute anomalies. Structural and attribute targets never overlap.
pub fn make_synthetic(
    g: &Graph,
    ratio: f64,
    clique_size: usize,
    candidate_pool: usize,
    seed: u64,
) -> Result<(Graph, InjectionReport)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(GadError::Config(format!("anomaly ratio {ratio} outside [0, 1]")));
    }
    if g.anomaly_count() > 0 {
        return Err(GadError::Data("synthetic injection expects an unlabeled or all-normal graph".into()));
    }
    let total = (ratio * g.n() as f64).round() as usize;
    let params = InjectionParams {
        clique_size: Some(clique_size),
        candidate_pool: Some(candidate_pool),
        ratio: Some(ratio),
        seed: Some(seed),
    };
    if total == 0 {
        let mut out = g.clone();
        out.labels = Some(g.labels.clone().unwrap_or_else(|| vec![0; g.n()]));
        return Ok((out, InjectionReport {
            anomalies: vec![],
            edges_added: 0,
            params,
            attribute_swaps: vec![],
        }));
    }
    if total < clique_size {
        log::warn!(
            "anomaly budget {total} is smaller than one clique of {clique_size}; all anomalies become attribute swaps"
        );
    }
    let num_cliques = (total / 2) / clique_size;
    let structural = num_cliques * clique_size;
    let attribute = total - structural;

    let (g1, rep1) = if num_cliques > 0 {
        inject_structural(g, clique_size, num_cliques, seed)?
    } else {
        let mut out = g.clone();
        out.labels = Some(g.labels.clone().unwrap_or_else(|| vec![0; g.n()]));
        (out, InjectionReport {
            anomalies: vec![],
            edges_added: 0,
            params: InjectionParams::default(),
            attribute_swaps: vec![],
        })
    };
    let (g2, rep2) = inject_attribute(&g1, attribute, candidate_pool, seed)?;

    let mut anomalies = rep1.anomalies;
    anomalies.extend(rep2.anomalies);
    anomalies.sort_by_key(|a| a.id);
    let report = InjectionReport {
        anomalies,
        edges_added: rep1.edges_added,
        params,
        attribute_swaps: rep2.attribute_swaps,
    };
    Ok((g2, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::matrix::Matrix;

    fn plain_graph(n: usize, d: usize) -> Graph {
        let mut feats = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                feats.set(i, j, ((i * 31 + j * 7) % 13) as f64 / 13.0);
            }
        }
        Graph::new("fixture", feats, &[], None, None).unwrap()
    }

    #[test]
    fn minimal_class_picks_smallest() {
        let mut g = plain_graph(8, 2);
        g.class_labels = Some(vec![0, 0, 0, 0, 0, 1, 1, 1]);
        let (out, rep) = minimal_class_labels(&g).unwrap();
        assert_eq!(out.anomaly_count(), 3);
        assert_eq!(rep.anomaly_ids(), vec![5, 6, 7]);
        assert!((out.anomaly_ratio() - 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn minimal_class_tie_breaks_low() {
        let mut g = plain_graph(4, 2);
        g.class_labels = Some(vec![2, 2, 5, 5]);
        let (out, _) = minimal_class_labels(&g).unwrap();
        let y = out.labels.unwrap();
        assert_eq!(y, vec![1, 1, 0, 0]);
    }

    #[test]
    fn clique_on_edgeless_graph() {
        let g = plain_graph(10, 2);
        let (out, rep) = inject_structural(&g, 3, 1, 0).unwrap();
        assert_eq!(rep.edges_added, 3);
        assert_eq!(out.num_edges(), 3);
        assert_eq!(out.anomaly_count(), 3);
        for a in &rep.anomalies {
            assert_eq!(a.kind, AnomalyKind::Structural);
        }
    }

    #[test]
    fn structural_determinism_and_edge_bound() {
        let g = plain_graph(40, 3);
        let (a, rep_a) = inject_structural(&g, 5, 2, 9).unwrap();
        let (b, rep_b) = inject_structural(&g, 5, 2, 9).unwrap();
        assert_eq!(rep_a.anomaly_ids(), rep_b.anomaly_ids());
        assert_eq!(a.edge_set(), b.edge_set());
        assert_eq!(rep_a.anomalies.len(), 10);
        assert!(rep_a.edges_added <= 20);
        // Edge diff is exactly what the report claims.
        assert_eq!(a.edge_set().difference(&g.edge_set()).count(), rep_a.edges_added);
    }

    #[test]
    fn attribute_swap_takes_farthest_candidate() {
        let g = plain_graph(30, 4);
        let (out, rep) = inject_attribute(&g, 6, 5, 4).unwrap();
        let d2 = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        };
        for swap in &rep.attribute_swaps {
            let old = g.features.row(swap.target);
            let new = out.features.row(swap.target);
            for &c in &swap.candidates {
                assert!(d2(new, old) >= d2(g.features.row(c), old));
            }
        }
        assert_eq!(out.anomaly_count(), 6);
    }

    #[test]
    fn attribute_zero_targets_is_identity() {
        let g = plain_graph(5, 2);
        let (out, rep) = inject_attribute(&g, 0, 3, 0).unwrap();
        assert_eq!(out.features, g.features);
        assert!(rep.anomalies.is_empty());
    }

    #[test]
    fn synthetic_split_rule() {
        let g = plain_graph(100, 3);
        let (out, rep) = make_synthetic(&g, 0.1, 5, 10, 7).unwrap();
        assert_eq!(rep.anomalies.len(), 10);
        let structural =
            rep.anomalies.iter().filter(|a| a.kind == AnomalyKind::Structural).count();
        let attribute = rep.anomalies.iter().filter(|a| a.kind == AnomalyKind::Attribute).count();
        assert_eq!(structural, 5);
        assert_eq!(attribute, 5);
        assert_eq!(out.anomaly_count(), 10);
        // Reported ids are exactly the set of flipped labels.
        let y = out.labels.as_ref().unwrap();
        let flipped: Vec<usize> = (0..out.n()).filter(|&i| y[i] == 1).collect();
        assert_eq!(rep.anomaly_ids(), flipped);
    }

    #[test]
    fn synthetic_zero_ratio_is_identity() {
        let g = plain_graph(20, 2);
        let (out, rep) = make_synthetic(&g, 0.0, 5, 10, 0).unwrap();
        assert_eq!(out.anomaly_count(), 0);
        assert!(rep.anomalies.is_empty());
        assert_eq!(out.edge_set(), g.edge_set());
    }

    #[test]
    fn injection_never_removes_edges() {
        let mut feats = Matrix::zeros(30, 2);
        for i in 0..30 {
            feats.set(i, 0, i as f64);
        }
        let edges: Vec<(usize, usize)> = (0..29).map(|i| (i, i + 1)).collect();
        let g = Graph::new("chain", feats, &edges, None, None).unwrap();
        let (out, _) = make_synthetic(&g, 0.2, 3, 4, 3).unwrap();
        assert!(out.edge_set().is_superset(&g.edge_set()));
        assert!(out.num_edges() >= g.num_edges());
    }
}
