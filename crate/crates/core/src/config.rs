//! Run configuration: every module default in one validated, serializable
//! struct. Unknown keys in config files are rejected.

use crate::detect::Roi;
use crate::error::{Error, Result};
use crate::gnn::LossWeights;
use crate::graph::GraphConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Confidence gate applied before NMS.
    pub conf_threshold: f64,
    /// IoU threshold for class-wise NMS.
    pub nms_iou: f64,
    /// Optional static region of interest; None keeps the full frame.
    pub roi: Option<Roi>,
    /// Bounding-box refinement clamp on w/h; 1.0 is a no-op for
    /// normalized boxes.
    pub max_box_size: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            conf_threshold: 0.25,
            nms_iou: 0.5,
            roi: None,
            max_box_size: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Association gate: pairs with zero IoU and center distance beyond this
    /// are forbidden.
    pub tau_gate: f64,
    /// Weight of the embedding-cosine term in the association cost.
    pub beta: f64,
    /// Retire a track after this many consecutive missed frames.
    pub t_max: u64,
    /// Weight on the newly observed embedding when updating a track's stored
    /// embedding.
    pub smoothing_alpha: f64,
    /// Weight on the newly measured velocity when updating a track's motion
    /// state; 1.0 uses the raw per-frame difference.
    pub velocity_alpha: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            tau_gate: 0.2,
            beta: 0.5,
            t_max: 10,
            smoothing_alpha: 0.7,
            velocity_alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnConfig {
    /// Hidden layer widths; the input width follows from the stream.
    pub hidden_dims: Vec<usize>,
    pub lambda_det: f64,
    pub lambda_track: f64,
    pub lambda_reg: f64,
    pub learning_rate: f64,
    /// Classical momentum; 0 disables it.
    pub momentum: f64,
    pub epochs: usize,
    /// Halve the learning rate after this many epochs without improvement;
    /// 0 disables the schedule.
    pub plateau_patience: usize,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            hidden_dims: vec![32, 32],
            lambda_det: 1.0,
            lambda_track: 1.0,
            lambda_reg: 0.1,
            learning_rate: 1e-3,
            momentum: 0.0,
            epochs: 50,
            plateau_patience: 0,
        }
    }
}

impl GnnConfig {
    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_det: self.lambda_det,
            lambda_track: self.lambda_track,
            lambda_reg: self.lambda_reg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageConfig {
    pub width: f64,
    pub height: f64,
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig {
            width: 1920.0,
            height: 1080.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub detect: DetectConfig,
    pub graph: GraphConfig,
    pub tracker: TrackerConfig,
    pub gnn: GnnConfig,
    pub image: ImageConfig,
    /// IoU threshold for evaluation matching and identity correspondence.
    pub eval_iou: f64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialize config")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.detect.conf_threshold) {
            return fail(format!(
                "detect.conf_threshold {} outside [0,1]",
                self.detect.conf_threshold
            ));
        }
        if !(self.detect.nms_iou > 0.0 && self.detect.nms_iou <= 1.0) {
            return fail(format!("detect.nms_iou {} outside (0,1]", self.detect.nms_iou));
        }
        if self.detect.max_box_size <= 0.0 {
            return fail("detect.max_box_size must be positive".into());
        }
        if let Some(roi) = &self.detect.roi {
            if !roi.is_valid() {
                return fail("detect.roi must have positive area within [0,1]^2".into());
            }
        }
        if self.graph.sigma_d <= 0.0 || self.graph.sigma_v <= 0.0 {
            return fail("graph.sigma_d and graph.sigma_v must be positive".into());
        }
        if self.graph.tau_dist <= 0.0 || self.graph.tau_vel <= 0.0 {
            return fail("graph.tau_dist and graph.tau_vel must be positive".into());
        }
        if self.graph.motion_scale <= 0.0 {
            return fail("graph.motion_scale must be positive".into());
        }
        if self.tracker.tau_gate <= 0.0 {
            return fail("tracker.tau_gate must be positive".into());
        }
        if self.tracker.beta < 0.0 {
            return fail("tracker.beta must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.tracker.smoothing_alpha) {
            return fail("tracker.smoothing_alpha outside [0,1]".into());
        }
        if !(self.tracker.velocity_alpha > 0.0 && self.tracker.velocity_alpha <= 1.0) {
            return fail("tracker.velocity_alpha outside (0,1]".into());
        }
        if self.gnn.hidden_dims.is_empty() || self.gnn.hidden_dims.contains(&0) {
            return fail("gnn.hidden_dims must be non-empty positive widths".into());
        }
        if self.gnn.lambda_det < 0.0 || self.gnn.lambda_track < 0.0 || self.gnn.lambda_reg < 0.0 {
            return fail("gnn lambda weights must be non-negative".into());
        }
        if self.gnn.learning_rate <= 0.0 {
            return fail("gnn.learning_rate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.gnn.momentum) {
            return fail("gnn.momentum outside [0,1)".into());
        }
        if self.image.width <= 0.0 || self.image.height <= 0.0 {
            return fail("image size must be positive".into());
        }
        if !(self.eval_iou > 0.0 && self.eval_iou <= 1.0) {
            return fail(format!("eval_iou {} outside (0,1]", self.eval_iou));
        }
        Ok(())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            detect: DetectConfig::default(),
            graph: GraphConfig::default(),
            tracker: TrackerConfig::default(),
            gnn: GnnConfig::default(),
            image: ImageConfig::default(),
            eval_iou: 0.5,
        }
    }
}
