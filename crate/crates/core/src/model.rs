//! Full detection model: per-view encoders, fusion stack, objective head.

use crate::autodiff::adam::{BoundParams, ParamId, ParamStore};
use crate::autodiff::tape::{Tape, Tensor};
use crate::backbones::{encode_views, EncoderConfig, GraphTensors, ViewEncoder};
use crate::error::{GadError, Result};
use crate::fusion::{FusionConfig, FusionParams};
use crate::objectives::{LabelHead, ObjectiveConfig, ReconHead, SslHead};

/// What to build: views, fusion flags, objective.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub views: Vec<EncoderConfig>,
    pub fusion: FusionConfig,
    pub objective: ObjectiveConfig,
}

pub enum ObjectiveHead {
    Label(LabelHead),
    Recon(ReconHead),
    Ssl(SslHead),
}

/// Assembled model owning every parameter via its [`ParamStore`].
pub struct FusionModel {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub encoders: Vec<ViewEncoder>,
    pub fusion: FusionParams,
    pub head: ObjectiveHead,
    /// Set by the trainer once fitting finished; scoring requires it.
    pub trained: bool,
}

impl FusionModel {
    /// Build and initialize for a graph with `in_dim` features. All parameter
    /// streams are namespaced under `run_seed`.
    pub fn new(spec: ModelSpec, in_dim: usize, feat_dim: usize, run_seed: u64) -> Result<FusionModel> {
        if spec.views.is_empty() {
            return Err(GadError::Config("at least one view is required".into()));
        }
        spec.objective.validate()?;
        let rep_dim = if spec.fusion.view_fusion {
            spec.fusion.unified_dim
        } else {
            let h = spec.views[0].hidden_dim;
            if spec.views.iter().any(|v| v.hidden_dim != h) {
                return Err(GadError::Config(
                    "with view fusion disabled all views must share hidden_dim".into(),
                ));
            }
            h
        };
        if spec.fusion.feature_fusion && rep_dim < 2 {
            return Err(GadError::Config("feature fusion needs a representation width >= 2".into()));
        }

        let mut store = ParamStore::new();
        let encoders: Vec<ViewEncoder> = spec
            .views
            .iter()
            .enumerate()
            .map(|(i, cfg)| ViewEncoder::new(&mut store, cfg, in_dim, run_seed, &format!("view{i}")))
            .collect();
        let view_dims: Vec<usize> = spec.views.iter().map(|v| v.hidden_dim).collect();
        let fusion = FusionParams::new(&mut store, &spec.fusion, &view_dims, run_seed)?;
        let head = match &spec.objective {
            ObjectiveConfig::Label { .. } => {
                ObjectiveHead::Label(LabelHead::new(&mut store, rep_dim, run_seed))
            }
            ObjectiveConfig::Reconstruction { lambda, .. } => {
                ObjectiveHead::Recon(ReconHead::new(&mut store, rep_dim, feat_dim, *lambda, run_seed))
            }
            ObjectiveConfig::Ssl { embed_dim, .. } => {
                ObjectiveHead::Ssl(SslHead::new(&mut store, rep_dim, *embed_dim, run_seed))
            }
        };
        Ok(FusionModel { spec, store, encoders, fusion, head, trained: false })
    }

    /// Views -> view fusion -> feature fusion. Returns `X_f` plus the
    /// effective view weights of this pass.
    pub fn representation(
        &self,
        tape: &Tape,
        bp: &mut BoundParams,
        gt: &GraphTensors,
        features: &Tensor,
    ) -> Result<(Tensor, Vec<f64>)> {
        let views = encode_views(&self.encoders, &self.store, tape, bp, gt, features)?;
        let (xv, alpha) = self.fusion.view_fusion(&self.store, tape, bp, &views)?;
        let xf = self.fusion.feature_fusion(tape, &xv)?;
        Ok((xf, alpha))
    }

    /// Everything upstream of the objective head.
    pub fn representation_param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.encoders.iter().flat_map(|e| e.param_ids()).collect();
        ids.extend(self.fusion.param_ids());
        ids
    }

    pub fn head_param_ids(&self) -> Vec<ParamId> {
        match &self.head {
            ObjectiveHead::Label(h) => h.param_ids(),
            ObjectiveHead::Recon(h) => h.param_ids(),
            ObjectiveHead::Ssl(h) => h.param_ids(),
        }
    }
}
