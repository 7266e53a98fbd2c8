//! Run configuration shared by the CLI and the evaluation harness.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{ClusterSpace, SkinOptions, UndertoneRefs, UndertoneThresholds};
use crate::cluster::ClusterConfig;
use crate::delta_e::DistanceMetric;
use crate::error::{Error, Result};
use crate::scale::{load_tone_scale, BundledScale, ToneScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Skin,
    #[serde(rename = "skin2stage")]
    SkinTwoStage,
    Hair,
    Iris,
    Undertone,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] = [
        Pipeline::Skin,
        Pipeline::SkinTwoStage,
        Pipeline::Hair,
        Pipeline::Iris,
        Pipeline::Undertone,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Skin => "skin",
            Pipeline::SkinTwoStage => "skin2stage",
            Pipeline::Hair => "hair",
            Pipeline::Iris => "iris",
            Pipeline::Undertone => "undertone",
        }
    }

    pub fn bundled_scale(self) -> BundledScale {
        match self {
            Pipeline::Skin | Pipeline::SkinTwoStage => BundledScale::Skin,
            Pipeline::Hair => BundledScale::Hair,
            Pipeline::Iris => BundledScale::Iris,
            Pipeline::Undertone => BundledScale::Undertone,
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown pipeline {s:?}")))
    }
}

/// Undertone decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UndertoneStrategy {
    #[default]
    DeltaE,
    Cosine,
}

impl FromStr for UndertoneStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deltae" | "delta-e" => Ok(Self::DeltaE),
            "cosine" => Ok(Self::Cosine),
            _ => Err(Error::InvalidParameter(format!(
                "unknown undertone strategy {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub blur: bool,
    pub kernel_divisor: u32,
    pub gamma: f64,
    /// Overrides the scale file's metric when set.
    pub metric: Option<DistanceMetric>,
    pub space: ClusterSpace,
    pub two_stage: bool,
    pub scale_path: Option<PathBuf>,
    pub thresholds_path: Option<PathBuf>,
    pub close_radius: u32,
    pub initial_k: usize,
    pub max_k: usize,
    pub strategy: UndertoneStrategy,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cluster = ClusterConfig::default();
        Self {
            seed: 42,
            blur: true,
            kernel_divisor: 20,
            gamma: 1.0,
            metric: None,
            space: ClusterSpace::Hsv,
            two_stage: false,
            scale_path: None,
            thresholds_path: None,
            close_radius: 2,
            initial_k: cluster.initial_k,
            max_k: cluster.max_k,
            strategy: UndertoneStrategy::DeltaE,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.scale_path, &mut cfg.thresholds_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_divisor == 0 {
            return Err(Error::InvalidParameter(
                "kernel_divisor must be positive".into(),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.close_radius == 0 {
            return Err(Error::InvalidParameter(
                "close_radius must be at least 1".into(),
            ));
        }
        self.cluster().validate()
    }

    pub fn cluster(&self) -> ClusterConfig {
        ClusterConfig {
            initial_k: self.initial_k,
            max_k: self.max_k,
            seed: self.seed,
            ..ClusterConfig::default()
        }
    }

    pub fn skin_options(&self) -> SkinOptions {
        SkinOptions {
            cluster: self.cluster(),
            blur: self.blur,
            kernel_divisor: self.kernel_divisor,
            gamma: self.gamma,
            space: self.space,
        }
    }

    /// The configured scale file, or the bundled scale for `kind`.
    pub fn load_scale(&self, kind: BundledScale) -> Result<ToneScale> {
        let scale = match &self.scale_path {
            Some(p) => load_tone_scale(p)?,
            None => kind.load()?,
        };
        Ok(match self.metric {
            Some(m) => scale.with_metric(m),
            None => scale,
        })
    }

    pub fn load_thresholds(&self) -> Result<UndertoneThresholds> {
        match &self.thresholds_path {
            Some(p) => load_thresholds(p),
            None => Ok(UndertoneThresholds::default()),
        }
    }

    /// Resolves every file the pipeline needs up front.
    pub fn setup(&self, pipeline: Pipeline) -> Result<PipelineSetup> {
        self.validate()?;
        let scale = self.load_scale(pipeline.bundled_scale())?;
        let (thresholds, refs) = if pipeline == Pipeline::Undertone {
            (self.load_thresholds()?, UndertoneRefs::from_scale(&scale)?)
        } else {
            (UndertoneThresholds::default(), UndertoneRefs::default())
        };
        Ok(PipelineSetup {
            pipeline,
            scale,
            skin: self.skin_options(),
            two_stage: self.two_stage || pipeline == Pipeline::SkinTwoStage,
            thresholds,
            refs,
            close_radius: self.close_radius,
            seed: self.seed,
            strategy: self.strategy,
        })
    }
}

/// Thresholds file: `{"skin": {...}, "vein": {...}}`.
pub fn load_thresholds(path: &Path) -> Result<UndertoneThresholds> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let t: UndertoneThresholds =
        serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e))?;
    t.skin.validate()?;
    t.vein.validate()?;
    Ok(t)
}

/// Everything a pipeline run needs, loaded and validated.
#[derive(Debug, Clone)]
pub struct PipelineSetup {
    pub pipeline: Pipeline,
    pub scale: ToneScale,
    pub skin: SkinOptions,
    pub two_stage: bool,
    pub thresholds: UndertoneThresholds,
    pub refs: UndertoneRefs,
    pub close_radius: u32,
    pub seed: u64,
    pub strategy: UndertoneStrategy,
}
