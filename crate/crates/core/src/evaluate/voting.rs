use nalgebra::{Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{axis_angle_deg, line_to_line_distance, rotation_about, Line3};
use crate::kinematics::{JointType, KinematicModel};
use crate::observe::Scene;
use crate::pipeline::{estimate_scene, FitConfig, Method, SceneFailure};
use crate::predict::{mean_axis, simulate_prediction, NoiseConfig, PredictionRecord};
use crate::seed::rng_for;

/// Errors of one revolute joint under both voting pathways.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VotingRow {
    pub scene_id: u64,
    pub joint: usize,
    pub ancsh_axis_error_deg: f64,
    pub ancsh_pivot_distance: f64,
    pub direct_axis_error_deg: f64,
    pub direct_pivot_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VotingReport {
    pub direct_vote_factor: f64,
    pub rows: Vec<VotingRow>,
    /// Scenes whose ANCSH fit failed; neither pathway is scored on them.
    #[serde(default)]
    pub failures: Vec<SceneFailure>,
}

impl VotingReport {
    /// `(ancsh_angle, ancsh_distance, direct_angle, direct_distance)` means.
    pub fn means(&self) -> [f64; 4] {
        let n = self.rows.len().max(1) as f64;
        let mut out = [0.0; 4];
        for r in &self.rows {
            out[0] += r.ancsh_axis_error_deg;
            out[1] += r.ancsh_pivot_distance;
            out[2] += r.direct_axis_error_deg;
            out[3] += r.direct_pivot_distance;
        }
        out.map(|s| s / n)
    }

    pub fn to_csv(&self) -> String {
        let m = self.means();
        format!(
            "method,axis_error_deg,pivot_distance\nancsh,{},{}\ndirect,{},{}\n",
            m[0], m[1], m[2], m[3]
        )
    }
}

/// Direct camera-space votes for revolute joint `k`: every point the
/// prediction associates with the joint votes for the true camera axis
/// tilted in the camera frame and for its own projection onto the true
/// axis, with `factor` times the configured noise.
fn direct_vote(
    scene: &Scene,
    pred: &PredictionRecord,
    k: usize,
    noise: &NoiseConfig,
    factor: f64,
    rng: &mut impl Rng,
) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let gt = &scene.gt_joint_params_camera[k];
    let line = Line3::new(gt.pivot?, gt.axis);
    let sigma_axis = (noise.axis_angle_sigma_deg * factor).to_radians();
    let (mut axes, mut pivot_sum, mut n) = (Vec::new(), Vector3::zeros(), 0usize);
    for i in (0..pred.len()).filter(|&i| pred.assoc[i] == k + 1) {
        let dir: Vector3<f64> = Vector3::from_fn(|_, _| rng.sample(StandardNormal));
        let angle: f64 = rng.sample(StandardNormal);
        let dd: f64 = rng.sample(StandardNormal);
        let perp = dir - gt.axis * gt.axis.dot(&dir);
        let axis = match perp.try_normalize(1e-12) {
            Some(perp) if sigma_axis > 0.0 => {
                rotation_about(&Unit::new_normalize(gt.axis.cross(&perp)), angle * sigma_axis) * gt.axis
            }
            _ => gt.axis,
        };
        axes.push(axis);
        let p = scene.points[i];
        let offset = line.project(&p) - p;
        let dist = offset.norm();
        let part = scene.gt_part_labels[i];
        let camera_per_naocs = scene.gt_part_poses[part].scale / scene.gt_scaling[part].g_scale;
        let noisy = if noise.pivot_sigma > 0.0 && dist > 0.0 {
            (dist + dd * noise.pivot_sigma * factor * camera_per_naocs).abs()
        } else {
            dist
        };
        pivot_sum += match offset.try_normalize(1e-12) {
            Some(u) => p + u * noisy,
            None => p,
        };
        n += 1;
    }
    if n < 3 {
        return None;
    }
    Some((mean_axis(&axes)?, pivot_sum / n as f64))
}

/// Compares the NAOCS-vote pathway (aggregate in NAOCS, then move with the
/// estimated part poses) against direct voting in the camera frame, for
/// every revolute joint.
///
/// Both pathways see the same predicted association. The direct pathway
/// draws its vote noise from `rng_for(seed, "direct-votes", scene_id)`.
pub fn joint_voting_comparison(
    model: &KinematicModel<f64>,
    scenes: &[Scene],
    noise: &NoiseConfig,
    fit: &FitConfig,
    direct_vote_factor: f64,
    seed: u64,
) -> Result<VotingReport> {
    let per_scene: Vec<std::result::Result<Vec<VotingRow>, SceneFailure>> = scenes
        .par_iter()
        .map(|s| {
            let pred = simulate_prediction(s, noise, seed);
            let est = estimate_scene(Method::Ancsh, model, s, &pred, fit, seed).map_err(|e| SceneFailure {
                scene_id: s.scene_id,
                error: e.to_string(),
            })?;
            let mut rng = rng_for(seed, "direct-votes", s.scene_id);
            let mut rows = Vec::new();
            for (k, joint) in model.joints.iter().enumerate() {
                if joint.joint_type != JointType::Revolute {
                    continue;
                }
                let gt = &s.gt_joint_params_camera[k];
                let gt_line = Line3::new(gt.pivot.expect("revolute joints carry a pivot"), gt.axis);
                let Some(direct) = direct_vote(s, &pred, k, noise, direct_vote_factor, &mut rng) else {
                    continue;
                };
                let Some(ancsh) = est.joints.get(k) else {
                    continue;
                };
                let Some(pivot) = ancsh.pivot else {
                    continue;
                };
                rows.push(VotingRow {
                    scene_id: s.scene_id,
                    joint: k,
                    ancsh_axis_error_deg: axis_angle_deg(&ancsh.axis, &gt.axis, false),
                    ancsh_pivot_distance: line_to_line_distance(&Line3::new(pivot, ancsh.axis), &gt_line),
                    direct_axis_error_deg: axis_angle_deg(&direct.0, &gt.axis, false),
                    direct_pivot_distance: line_to_line_distance(&Line3::new(direct.1, direct.0), &gt_line),
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in per_scene {
        match r {
            Ok(r) => rows.extend(r),
            Err(f) => {
                log::warn!("voting comparison skips scene {}: {}", f.scene_id, f.error);
                failures.push(f);
            }
        }
    }
    Ok(VotingReport {
        direct_vote_factor,
        rows,
        failures,
    })
}
