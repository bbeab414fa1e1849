use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use articulate_core::canonical::DEFAULT_ASSOCIATION_SIGMA;
use articulate_core::evaluate::DEFAULT_AD_FRACTION;
use articulate_core::kinematics::{Category, ShapeParams};
use articulate_core::observe::CameraConfig;
use articulate_core::pipeline::{FitConfig, Method};
use articulate_core::predict::NoiseConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Dataset JSONL; the model is written next to it.
    pub dataset: PathBuf,
    /// Directory of per-scene prediction files.
    pub predictions: PathBuf,
    pub estimates: PathBuf,
    /// Report base path: `.json`, `.csv` and `.occlusion.csv` are appended.
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "out/dataset.jsonl".into(),
            predictions: "out/predictions".into(),
            estimates: "out/estimates.json".into(),
            report: "out/report".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub category: Category,
    pub scene_count: usize,
    pub shape: ShapeParams,
    pub camera: CameraConfig,
    pub association_sigma: f64,
    pub noise: NoiseConfig,
    pub fit: FitConfig,
    pub method: Method,
    /// AD accuracy threshold as a fraction of part diameter.
    pub ad_fraction: f64,
    pub ad: bool,
    pub occlusion_bins: Option<Vec<f64>>,
    pub compare: Option<Vec<Method>>,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            category: Category::TwoPartRevolute,
            scene_count: 10,
            shape: ShapeParams::default(),
            camera: CameraConfig::default(),
            association_sigma: DEFAULT_ASSOCIATION_SIGMA,
            noise: NoiseConfig::default(),
            fit: FitConfig::default(),
            method: Method::Ancsh,
            ad_fraction: DEFAULT_AD_FRACTION,
            ad: false,
            occlusion_bins: None,
            compare: None,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.scene_count == 0 {
            bail!("scene_count must be at least 1");
        }
        if !(self.association_sigma > 0.0) {
            bail!("association_sigma must be positive");
        }
        if !(self.ad_fraction > 0.0) {
            bail!("ad_fraction must be positive");
        }
        self.camera.validate()?;
        self.noise.validate()?;
        self.fit.ransac.validate()?;
        self.fit.weights.validate()?;
        Ok(())
    }
}

pub fn model_path_for(dataset: &Path) -> PathBuf {
    let stem = dataset.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    dataset.with_file_name(format!("{stem}.model.json"))
}
