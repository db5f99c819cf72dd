use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::AlignConfig;
use crate::error::{Error, Result};
use crate::geometry::FloorPlanMode;
use crate::layout::OptimizerConfig;
use crate::matching::LossMode;
use crate::scene_graph::GraphRules;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchingConfig {
    /// Add the point-scorer term when the bundle ships weights.
    pub use_scorer: bool,
    /// Objective used when scoring against known truths.
    pub loss: LossMode,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        Self {
            use_scorer: true,
            loss: LossMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloorConfig {
    /// How to outline the floor when the manifest has no polygon.
    pub mode: FloorPlanMode,
}

impl Default for FloorConfig {
    fn default() -> Self {
        Self {
            mode: FloorPlanMode::Hull,
        }
    }
}

/// Everything the pipeline reads besides the bundle. Missing sections take
/// their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub matching: MatchingConfig,
    pub alignment: AlignConfig,
    /// Scene-graph relation thresholds.
    pub thresholds: GraphRules,
    pub optimizer: OptimizerConfig,
    pub floor: FloorConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.alignment.yaw_candidates()?;
        self.optimizer.validate()
    }
}
