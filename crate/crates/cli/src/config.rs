//! Declarative experiment file (TOML, or JSON by extension).

use std::path::Path;

use scale_opt::optimizer::OptimizerConfig;
use scale_opt::stereo::MatchConfig;
use scale_opt::synthetic::SceneConfig;
use scale_opt::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub points: usize,
    /// Relative log-normal sigma applied to exported inverse depths.
    pub inv_depth_noise: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            points: 2000,
            inv_depth_noise: 0.0,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required by `synth` and `bench`; other commands ignore it.
    pub scene: Option<SceneConfig>,
    pub sampling: SamplingConfig,
    pub optimizer: OptimizerConfig,
    pub matching: MatchConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.into(),
                line: e.line(),
                msg: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| {
                let line = e
                    .span()
                    .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                    .unwrap_or(0);
                Error::Parse {
                    path: path.into(),
                    line,
                    msg: e.message().to_string(),
                }
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(scene) = &self.scene {
            scene.validate()?;
        }
        if self.sampling.points == 0 {
            return Err(Error::Config("sampling.points must be at least 1".into()));
        }
        if !(self.sampling.inv_depth_noise >= 0.0 && self.sampling.inv_depth_noise.is_finite()) {
            return Err(Error::Config("sampling.inv_depth_noise must be ≥ 0".into()));
        }
        self.optimizer.validate()?;
        self.matching.validate()
    }

    pub fn scene_or_standard(&self) -> SceneConfig {
        self.scene.clone().unwrap_or_else(SceneConfig::standard)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
