use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ad_accuracy, score_scene, OcclusionBin, SceneMetrics, DEFAULT_AD_FRACTION};
use crate::canonical::CanonicalModel;
use crate::error::Result;
use crate::kinematics::KinematicModel;
use crate::observe::Scene;
use crate::pipeline::{estimate_scene, FitConfig, Method, SceneEstimate, SceneFailure};
use crate::predict::{simulate_prediction, NoiseConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartSummary {
    pub part: usize,
    pub count: usize,
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    pub iou_3d: Option<f64>,
    /// Present when AD accuracy was requested.
    pub ad_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSummary {
    pub joint: usize,
    pub count: usize,
    pub state_error: f64,
    pub axis_error_deg: f64,
    pub pivot_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub scene_count: usize,
    pub parts: Vec<PartSummary>,
    pub joints: Vec<JointSummary>,
    pub scenes: Vec<SceneMetrics>,
    pub failures: Vec<SceneFailure>,
}

/// Left-to-right mean, `None` for an empty sequence.
fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Per-part and per-joint means over scene metrics, in scene order.
pub fn summarize(
    method: Method,
    scenes: Vec<SceneMetrics>,
    failures: Vec<SceneFailure>,
    ad_fraction: Option<f64>,
) -> MethodReport {
    let part_count = scenes.first().map_or(0, |m| m.parts.len());
    let ad = ad_fraction.map(|f| ad_accuracy(&scenes, f));
    let parts = (0..part_count)
        .map(|j| {
            let col = || scenes.iter().map(move |m| &m.parts[j]);
            PartSummary {
                part: j,
                count: scenes.len(),
                rotation_error_deg: mean(col().map(|p| p.rotation_error_deg)).unwrap_or(0.0),
                translation_error: mean(col().map(|p| p.translation_error)).unwrap_or(0.0),
                iou_3d: if col().all(|p| p.iou_3d.is_some()) {
                    mean(col().filter_map(|p| p.iou_3d))
                } else {
                    None
                },
                ad_accuracy: ad.as_ref().map(|a| a[j]),
            }
        })
        .collect();
    let joint_count = scenes.iter().map(|m| m.joints.len()).max().unwrap_or(0);
    let joints = (0..joint_count)
        .map(|k| {
            let col = || scenes.iter().filter_map(move |m| m.joints.get(k));
            JointSummary {
                joint: k,
                count: col().count(),
                state_error: mean(col().map(|j| j.state_error)).unwrap_or(0.0),
                axis_error_deg: mean(col().map(|j| j.axis_error_deg)).unwrap_or(0.0),
                pivot_distance: mean(col().filter_map(|j| j.pivot_distance)),
            }
        })
        .collect();
    MethodReport {
        method,
        scene_count: scenes.len(),
        parts,
        joints,
        scenes,
        failures,
    }
}

/// Scores existing estimates; scenes without an estimate are skipped.
pub fn score_estimates(
    method: Method,
    estimates: &[SceneEstimate],
    failures: Vec<SceneFailure>,
    scenes: &[Scene],
    canonical: &CanonicalModel,
    ad_fraction: Option<f64>,
) -> Result<MethodReport> {
    let mut metrics = Vec::with_capacity(estimates.len());
    for est in estimates {
        let Some(scene) = scenes.iter().find(|s| s.scene_id == est.scene_id) else {
            return Err(crate::error::Error::SceneMismatch {
                expected: scenes.first().map_or(0, |s| s.scene_id),
                found: est.scene_id,
            });
        };
        metrics.push(score_scene(
            est,
            scene,
            canonical,
            ad_fraction.unwrap_or(DEFAULT_AD_FRACTION),
        )?);
    }
    Ok(summarize(method, metrics, failures, ad_fraction))
}

/// Simulates predictions for every scene, runs `method` and scores it.
/// Scenes that fail are listed in the report instead of aborting the run.
#[allow(clippy::too_many_arguments)]
pub fn run_baseline(
    method: Method,
    model: &KinematicModel<f64>,
    canonical: &CanonicalModel,
    scenes: &[Scene],
    noise: &NoiseConfig,
    fit: &FitConfig,
    seed: u64,
    ad_fraction: Option<f64>,
) -> MethodReport {
    let results: Vec<_> = scenes
        .par_iter()
        .map(|s| {
            let pred = simulate_prediction(s, noise, seed);
            estimate_scene(method, model, s, &pred, fit, seed)
                .and_then(|e| score_scene(&e, s, canonical, ad_fraction.unwrap_or(DEFAULT_AD_FRACTION)))
        })
        .collect();
    let mut metrics = Vec::with_capacity(scenes.len());
    let mut failures = Vec::new();
    for (s, r) in scenes.iter().zip(results) {
        match r {
            Ok(m) => metrics.push(m),
            Err(e) => {
                warn!("scene {} ({method}): {e}", s.scene_id);
                failures.push(SceneFailure {
                    scene_id: s.scene_id,
                    error: e.to_string(),
                });
            }
        }
    }
    summarize(method, metrics, failures, ad_fraction)
}

/// Per-method summaries with the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: serde_json::Value,
    pub seed: u64,
    pub scene_count: usize,
    pub methods: Vec<MethodReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion: Option<Vec<(Method, Vec<OcclusionBin>)>>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ComparisonReport {
    pub fn failure_count(&self) -> usize {
        self.methods.iter().map(|m| m.failures.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per method × part and method × joint.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,kind,index,count,rotation_error_deg,translation_error,iou_3d,ad_accuracy,state_error,axis_error_deg,pivot_distance\n",
        );
        for m in &self.methods {
            for p in &m.parts {
                let _ = writeln!(
                    out,
                    "{},part,{},{},{},{},{},{},,,",
                    m.method,
                    p.part,
                    p.count,
                    p.rotation_error_deg,
                    p.translation_error,
                    cell(p.iou_3d),
                    cell(p.ad_accuracy)
                );
            }
            for j in &m.joints {
                let _ = writeln!(
                    out,
                    "{},joint,{},{},,,,,{},{},{}",
                    m.method,
                    j.joint,
                    j.count,
                    j.state_error,
                    j.axis_error_deg,
                    cell(j.pivot_distance)
                );
            }
        }
        out
    }

    /// Occlusion table as CSV, one row per method × bin.
    pub fn occlusion_csv(&self) -> Option<String> {
        let occ = self.occlusion.as_ref()?;
        let mut out = String::from("method,lo,hi,count,rotation_error_deg,translation_error,iou_3d\n");
        for (method, bins) in occ {
            for b in bins {
                let _ = writeln!(
                    out,
                    "{method},{},{},{},{},{},{}",
                    b.lo,
                    b.hi,
                    b.count,
                    cell(b.rotation_error_deg),
                    cell(b.translation_error),
                    cell(b.iou_3d)
                );
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::tests::fixture;
    use crate::evaluate::DEFAULT_AD_FRACTION;
    use crate::kinematics::Category;

    #[test]
    fn zero_noise_baselines_are_exact() {
        let (model, canonical, scenes) = fixture(Category::EyeglassesLike, 3);
        for method in Method::ALL {
            let r = run_baseline(
                method,
                &model,
                &canonical,
                &scenes,
                &NoiseConfig::default(),
                &FitConfig::default(),
                1,
                Some(DEFAULT_AD_FRACTION),
            );
            assert!(r.failures.is_empty());
            for p in &r.parts {
                assert!(p.rotation_error_deg < 1e-6 && p.translation_error < 1e-9, "{method}");
                assert_eq!(p.iou_3d.is_none(), method == Method::Naocs);
            }
            for j in &r.joints {
                assert!(j.axis_error_deg < 1e-6, "{method}");
            }
        }
    }

    #[test]
    fn means_equal_independent_recomputation() {
        let (model, canonical, scenes) = fixture(Category::TwoPartRevolute, 6);
        let noise = NoiseConfig {
            npcs_sigma: 0.02,
            axis_angle_sigma_deg: 3.0,
            ..Default::default()
        };
        let r = run_baseline(
            Method::Ancsh,
            &model,
            &canonical,
            &scenes,
            &noise,
            &FitConfig::default(),
            2,
            None,
        );
        for p in &r.parts {
            let v: Vec<f64> = r.scenes.iter().map(|m| m.parts[p.part].rotation_error_deg).collect();
            let expect = v.iter().sum::<f64>() / v.len() as f64;
            assert!((p.rotation_error_deg - expect).abs() <= 1e-12);
            let iou: Vec<f64> = r.scenes.iter().map(|m| m.parts[p.part].iou_3d.unwrap()).collect();
            assert!((p.iou_3d.unwrap() - iou.iter().sum::<f64>() / iou.len() as f64).abs() <= 1e-12);
        }
        for j in &r.joints {
            let v: Vec<f64> = r.scenes.iter().map(|m| m.joints[j.joint].axis_error_deg).collect();
            assert!((j.axis_error_deg - v.iter().sum::<f64>() / v.len() as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn report_is_deterministic_and_has_method_blocks() {
        let (model, canonical, scenes) = fixture(Category::DrawerLike, 3);
        let noise = NoiseConfig {
            npcs_sigma: 0.01,
            ..Default::default()
        };
        let build = || ComparisonReport {
            config: serde_json::json!({"noise": noise}),
            seed: 5,
            scene_count: scenes.len(),
            methods: [Method::Npcs, Method::Ancsh]
                .iter()
                .map(|&m| {
                    run_baseline(
                        m,
                        &model,
                        &canonical,
                        &scenes,
                        &noise,
                        &FitConfig::default(),
                        5,
                        Some(0.1),
                    )
                })
                .collect(),
            occlusion: None,
        };
        let (a, b) = (build(), build());
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv(), b.to_csv());
        let csv = a.to_csv();
        assert!(csv.lines().any(|l| l.starts_with("npcs,part,0,")));
        assert!(csv.lines().any(|l| l.starts_with("ancsh,joint,0,")));
        let back: ComparisonReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}
