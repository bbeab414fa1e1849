use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use articulate_core::canonical::CanonicalModel;
use articulate_core::evaluate::{occlusion_analysis, score_estimates, ComparisonReport, MethodReport};
use articulate_core::kinematics::{make_procedural_model, KinematicModel};
use articulate_core::observe::{generate_scenes, read_dataset, write_dataset, Scene};
use articulate_core::pipeline::{estimate_scene, EstimatesFile, Method, SceneEstimate, SceneFailure};
use articulate_core::predict::{read_prediction, simulate_prediction, write_prediction};
use articulate_core::seed::derive_seed;
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{model_path_for, RunConfig};

pub struct EvalOptions {
    pub ad: bool,
    pub occlusion_bins: Option<Vec<f64>>,
    pub compare: Option<Vec<Method>>,
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn prediction_path(dir: &Path, scene_id: u64) -> PathBuf {
    dir.join(format!("scene_{scene_id:06}.json"))
}

struct Loaded {
    model: KinematicModel<f64>,
    canonical: CanonicalModel,
    scenes: Vec<Scene>,
}

fn load(cfg: &RunConfig) -> anyhow::Result<Loaded> {
    let dataset = &cfg.paths.dataset;
    let (header, scenes) = read_dataset(dataset).with_context(|| format!("reading dataset {}", dataset.display()))?;
    let model_path = dataset.with_file_name(&header.model);
    let model = KinematicModel::read(&model_path).with_context(|| format!("reading model {}", model_path.display()))?;
    let canonical = CanonicalModel::build(&model, cfg.association_sigma)?;
    Ok(Loaded {
        model,
        canonical,
        scenes,
    })
}

pub fn generate(cfg: &RunConfig) -> anyhow::Result<()> {
    let model = make_procedural_model(cfg.category, derive_seed(cfg.master_seed, "model", 0), &cfg.shape)?;
    let canonical = CanonicalModel::build(&model, cfg.association_sigma)?;
    let dataset = &cfg.paths.dataset;
    let model_path = model_path_for(dataset);
    let model_ref = model_path
        .file_name()
        .and_then(|s| s.to_str())
        .context("model path has no file name")?
        .to_owned();
    let scenes = generate_scenes(
        &model,
        &canonical,
        &cfg.camera,
        cfg.master_seed,
        cfg.scene_count,
        &model_ref,
    )?;
    let undersampled = scenes.iter().filter(|s| s.undersampled).count();
    if undersampled > 0 {
        warn!("{undersampled} scene(s) have a part below the minimum point count");
    }
    ensure_parent(dataset)?;
    model.write(&model_path)?;
    write_dataset(dataset, &model_ref, &scenes)?;
    info!("wrote {} scenes to {}", scenes.len(), dataset.display());
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> anyhow::Result<()> {
    let data = load(cfg)?;
    let dir = &cfg.paths.predictions;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    data.scenes.par_iter().try_for_each(|s| {
        let pred = simulate_prediction(s, &cfg.noise, cfg.master_seed);
        write_prediction(&pred, &prediction_path(dir, s.scene_id))
    })?;
    info!("wrote {} predictions to {}", data.scenes.len(), dir.display());
    Ok(())
}

/// Fits every scene from its prediction file; failures are collected.
fn fit_scenes(cfg: &RunConfig, data: &Loaded, method: Method) -> (Vec<SceneEstimate>, Vec<SceneFailure>) {
    let results: Vec<_> = data
        .scenes
        .par_iter()
        .map(|s| {
            let path = prediction_path(&cfg.paths.predictions, s.scene_id);
            read_prediction(&path)
                .and_then(|pred| estimate_scene(method, &data.model, s, &pred, &cfg.fit, cfg.master_seed))
                .map_err(|e| SceneFailure {
                    scene_id: s.scene_id,
                    error: format!("scene {}: {e}", s.scene_id),
                })
        })
        .collect();
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => {
                for note in &e.notes {
                    warn!("scene {}: {note}", e.scene_id);
                }
                estimates.push(e)
            }
            Err(f) => {
                warn!("{}", f.error);
                failures.push(f);
            }
        }
    }
    (estimates, failures)
}

fn failure_error(failures: &[SceneFailure]) -> anyhow::Error {
    let list: Vec<_> = failures.iter().map(|f| f.error.as_str()).collect();
    anyhow::anyhow!("{} scene(s) failed: {}", failures.len(), list.join("; "))
}

pub fn fit(cfg: &RunConfig) -> anyhow::Result<()> {
    let data = load(cfg)?;
    let (estimates, failures) = fit_scenes(cfg, &data, cfg.method);
    let out = &cfg.paths.estimates;
    ensure_parent(out)?;
    EstimatesFile::new(cfg.method, estimates, failures.clone()).write(out)?;
    info!("wrote estimates to {}", out.display());
    if !failures.is_empty() {
        return Err(failure_error(&failures));
    }
    Ok(())
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let name = base.file_name().and_then(|s| s.to_str()).unwrap_or("report");
    let stem = name
        .strip_suffix(".json")
        .or_else(|| name.strip_suffix(".csv"))
        .unwrap_or(name);
    base.with_file_name(format!("{stem}{suffix}"))
}

pub fn eval(cfg: &RunConfig, opts: &EvalOptions) -> anyhow::Result<()> {
    let data = load(cfg)?;
    let ad = opts.ad.then_some(cfg.ad_fraction);
    let methods: Vec<MethodReport> = match &opts.compare {
        Some(list) => {
            let mut reports = Vec::new();
            for &m in list {
                let (est, failures) = fit_scenes(cfg, &data, m);
                reports.push(score_estimates(m, &est, failures, &data.scenes, &data.canonical, ad)?);
            }
            reports
        }
        None => {
            let file = EstimatesFile::read(&cfg.paths.estimates)
                .with_context(|| format!("reading estimates {}", cfg.paths.estimates.display()))?;
            vec![score_estimates(
                file.method,
                &file.estimates,
                file.failures,
                &data.scenes,
                &data.canonical,
                ad,
            )?]
        }
    };
    if methods.is_empty() {
        bail!("no methods to evaluate");
    }
    let occlusion = match &opts.occlusion_bins {
        Some(bins) => Some(
            methods
                .iter()
                .map(|m| occlusion_analysis(&m.scenes, bins).map(|b| (m.method, b)))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let report = ComparisonReport {
        config: serde_json::to_value(cfg)?,
        seed: cfg.master_seed,
        scene_count: data.scenes.len(),
        methods,
        occlusion,
    };
    let base = &cfg.paths.report;
    ensure_parent(base)?;
    let write = |suffix: &str, text: String| {
        let path = with_suffix(base, suffix);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write(".json", report.to_json())?;
    write(".csv", report.to_csv())?;
    if let Some(csv) = report.occlusion_csv() {
        write(".occlusion.csv", csv)?;
    }
    info!("wrote report to {}", with_suffix(base, ".json").display());
    let failures: Vec<_> = report.methods.iter().flat_map(|m| m.failures.iter().cloned()).collect();
    if !failures.is_empty() {
        return Err(failure_error(&failures));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_suffixes() {
        assert_eq!(with_suffix(Path::new("o/r"), ".csv"), PathBuf::from("o/r.csv"));
        assert_eq!(with_suffix(Path::new("o/r.json"), ".csv"), PathBuf::from("o/r.csv"));
        assert_eq!(prediction_path(Path::new("p"), 7), PathBuf::from("p/scene_000007.json"));
    }
}
