//! Experiment configuration: a single JSON document shared by every
//! subcommand. Unknown keys are rejected at every level, and the sha-256 of
//! the normalized document stamps every output file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gad_core::backbones::{BackboneKind, EncoderConfig};
use gad_core::eval::Hyper;
use gad_core::fusion::FusionConfig;
use gad_core::model::ModelSpec;
use gad_core::objectives::ObjectiveConfig;
use gad_core::{GadError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset directory (edges.tsv / features.csv / meta.json ...).
    /// Not used by `demo-boundary`, which samples its own points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_dir: Option<PathBuf>,
    #[serde(default)]
    pub anomaly: AnomalyMode,
    #[serde(default = "default_views")]
    pub views: Vec<ViewConfig>,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default = "default_objective")]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub hyper: Hyper,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub heatmap: HeatmapSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub demo: DemoSection,
}

fn default_views() -> Vec<ViewConfig> {
    vec![ViewConfig { kind: BackboneKind::Gcn, ..ViewConfig::default() }]
}

fn default_objective() -> ObjectiveConfig {
    ObjectiveConfig::Label { lambda: Default::default() }
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum AnomalyMode {
    /// Labels ship with the dataset.
    #[default]
    Organic,
    /// Smallest original class becomes the anomaly class.
    Minimal,
    /// Injected cliques plus farthest-of-k feature swaps.
    Synthetic {
        #[serde(default = "default_ratio")]
        ratio: f64,
        #[serde(default = "default_clique")]
        clique_size: usize,
        #[serde(default = "default_pool")]
        candidate_pool: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_ratio() -> f64 {
    0.1
}
fn default_clique() -> usize {
    15
}
fn default_pool() -> usize {
    50
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    pub kind: BackboneKind,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default)]
    pub gin_eps: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig { kind: BackboneKind::Gcn, hidden_dim: 64, leaky_slope: 0.2, gin_eps: 0.0 }
    }
}

fn default_hidden() -> usize {
    64
}
fn default_slope() -> f64 {
    0.2
}

impl ViewConfig {
    pub fn to_encoder(&self) -> EncoderConfig {
        EncoderConfig {
            kind: self.kind,
            hidden_dim: self.hidden_dim,
            leaky_slope: self.leaky_slope,
            gin_eps: self.gin_eps,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    #[serde(default = "truthy")]
    pub view_fusion: bool,
    #[serde(default = "truthy")]
    pub feature_fusion: bool,
    #[serde(default = "default_hidden")]
    pub unified_dim: usize,
    #[serde(default)]
    pub gradient_through_weights: bool,
}

fn truthy() -> bool {
    true
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection {
            view_fusion: true,
            feature_fusion: true,
            unified_dim: 64,
            gradient_through_weights: false,
        }
    }
}

impl FusionSection {
    pub fn to_fusion(&self, fixed_view_weights: Option<Vec<f64>>) -> FusionConfig {
        FusionConfig {
            view_fusion: self.view_fusion || fixed_view_weights.is_some(),
            feature_fusion: self.feature_fusion,
            unified_dim: self.unified_dim,
            fixed_view_weights,
            gradient_through_weights: self.gradient_through_weights,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapSection {
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

fn default_grid_step() -> f64 {
    0.1
}

impl Default for HeatmapSection {
    fn default() -> Self {
        HeatmapSection { grid_step: default_grid_step() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// View counts to evaluate; defaults to 1..=pool size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Method pool; defaults to one of each backbone kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<Vec<ViewConfig>>,
    #[serde(default)]
    pub sweep_seed: u64,
}

fn default_samples() -> usize {
    5
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { counts: None, samples: 5, pool: None, sweep_seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSection {
    #[serde(default = "default_n_normal")]
    pub n_normal: usize,
    #[serde(default = "default_n_anomalous")]
    pub n_anomalous: usize,
    #[serde(default = "default_knn")]
    pub k: usize,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_range")]
    pub range: f64,
    #[serde(default)]
    pub demo_seed: u64,
}

fn default_n_normal() -> usize {
    400
}
fn default_n_anomalous() -> usize {
    100
}
fn default_knn() -> usize {
    5
}
fn default_grid_resolution() -> usize {
    100
}
fn default_sigma() -> f64 {
    0.3
}
fn default_range() -> f64 {
    7.0
}

impl Default for DemoSection {
    fn default() -> Self {
        DemoSection {
            n_normal: 400,
            n_anomalous: 100,
            k: 5,
            grid_resolution: 100,
            sigma: 0.3,
            range: 7.0,
            demo_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GadError::Io { path: path.display().to_string(), source: e })?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| GadError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(GadError::Config("views must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(GadError::Config("seeds must not be empty".into()));
        }
        if self.workers == 0 {
            return Err(GadError::Config("workers must be at least 1".into()));
        }
        self.objective.validate()?;
        if let AnomalyMode::Synthetic { ratio, clique_size, candidate_pool, .. } = &self.anomaly {
            if !(0.0..=1.0).contains(ratio) {
                return Err(GadError::Config(format!("synthetic ratio {ratio} outside [0, 1]")));
            }
            if *clique_size < 2 || *candidate_pool == 0 {
                return Err(GadError::Config("clique_size >= 2 and candidate_pool >= 1 required".into()));
            }
        }
        if !(self.heatmap.grid_step > 0.0 && self.heatmap.grid_step <= 1.0) {
            return Err(GadError::Config("heatmap.grid_step must lie in (0, 1]".into()));
        }
        if self.demo.k == 0 || self.demo.grid_resolution < 2 {
            return Err(GadError::Config("demo.k >= 1 and demo.grid_resolution >= 2 required".into()));
        }
        if self.hyper.max_epochs == 0 || self.hyper.patience == 0 {
            return Err(GadError::Config("hyper.max_epochs and hyper.patience must be positive".into()));
        }
        Ok(())
    }

    pub fn dataset_dir(&self) -> Result<&Path> {
        self.dataset_dir
            .as_deref()
            .ok_or_else(|| GadError::Config("config needs a dataset_dir for this command".into()))
    }

    /// Model spec as configured (learnable fusion weights).
    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            views: self.views.iter().map(ViewConfig::to_encoder).collect(),
            fusion: self.fusion.to_fusion(None),
            objective: self.objective.clone(),
        }
    }

    /// Normalized JSON rendering of the experiment definition. Where outputs
    /// land and how many workers ran are execution placement, not identity,
    /// so they are normalized away: reruns of the same experiment hash the
    /// same regardless of --out/--workers.
    pub fn echo(&self) -> serde_json::Value {
        let mut normalized = self.clone();
        normalized.output_dir = default_output_dir();
        normalized.workers = default_workers();
        serde_json::to_value(&normalized).expect("config serializes")
    }

    /// sha-256 over the normalized rendering, hex-encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.echo()).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
