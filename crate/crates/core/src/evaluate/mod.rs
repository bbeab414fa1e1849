//! Metrics, baseline comparison, joint-voting comparison and occlusion
//! analysis.

mod occlusion;
mod report;
mod voting;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalModel;
use crate::error::{Error, Result};
use crate::geometry::{
    axis_angle_deg, bounds, box_iou_3d, line_to_line_distance, rotation_geodesic_deg, Line3, Similarity,
};
use crate::observe::Scene;
use crate::pipeline::SceneEstimate;
use crate::recover::amodal_box;

pub use occlusion::{occlusion_analysis, spearman, OcclusionBin, DEFAULT_OCCLUSION_BINS};
pub use report::{run_baseline, score_estimates, summarize, ComparisonReport, JointSummary, MethodReport, PartSummary};
pub use voting::{joint_voting_comparison, VotingReport, VotingRow};

pub const DEFAULT_AD_FRACTION: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartMetrics {
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    /// `None` when the method produces no amodal boxes.
    pub iou_3d: Option<f64>,
    /// Mean distance between the part's canonical samples under the
    /// estimated and true poses.
    pub average_distance: f64,
    /// Camera-space diameter of the part.
    pub diameter: f64,
    pub ad_hit: bool,
    /// Visible share of the part's surface.
    pub visibility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointMetrics {
    /// Degrees for revolute joints, camera units for prismatic ones.
    pub state_error: f64,
    pub axis_error_deg: f64,
    pub pivot_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene_id: u64,
    pub parts: Vec<PartMetrics>,
    /// Empty when the estimate carries no joints.
    pub joints: Vec<JointMetrics>,
}

/// Mean of `‖est(x) − gt(x)‖` over `samples`.
pub fn average_distance(est: &Similarity<f64>, gt: &Similarity<f64>, samples: &[Vector3<f64>]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|x| (est.apply(x) - gt.apply(x)).norm()).sum::<f64>() / samples.len() as f64
}

/// Metrics of one estimate against its scene.
///
/// The reference box of a part is the amodal box of its observed points'
/// true NPCS coordinates under the true pose, the box a perfect predictor
/// would produce. AD uses every canonical sample of the part.
pub fn score_scene(
    est: &SceneEstimate,
    scene: &Scene,
    canonical: &CanonicalModel,
    ad_fraction: f64,
) -> Result<SceneMetrics> {
    let m = scene.part_count();
    if est.pose.poses.len() != m || canonical.npcs.parts.len() != m {
        return Err(Error::CountMismatch(format!(
            "scene {}: {} estimated poses, {m} parts",
            scene.scene_id,
            est.pose.poses.len()
        )));
    }
    if est.scene_id != scene.scene_id {
        return Err(Error::SceneMismatch {
            expected: scene.scene_id,
            found: est.scene_id,
        });
    }
    if !est.joints.is_empty() && est.joints.len() != scene.joint_count() {
        return Err(Error::CountMismatch(format!(
            "scene {}: {} estimated joints, {} in scene",
            scene.scene_id,
            est.joints.len(),
            scene.joint_count()
        )));
    }
    let parts = (0..m)
        .map(|j| {
            let (p, gt) = (&est.pose.poses[j], &scene.gt_part_poses[j]);
            let samples = &canonical.npcs.parts[j].points;
            let (lo, hi) = bounds(samples).unwrap_or_default();
            let diameter = gt.scale * (hi - lo).norm();
            let ad = average_distance(p, gt, samples);
            let iou = est.boxes.as_ref().map(|boxes| {
                let observed: Vec<_> = scene.point_indices_of(j).map(|i| scene.gt_npcs[i]).collect();
                amodal_box(gt, &observed).map_or(0.0, |reference| box_iou_3d(&boxes[j], &reference))
            });
            PartMetrics {
                rotation_error_deg: rotation_geodesic_deg(&p.rotation, &gt.rotation),
                translation_error: (p.translation - gt.translation).norm(),
                iou_3d: iou,
                average_distance: ad,
                diameter,
                ad_hit: ad < ad_fraction * diameter,
                visibility: scene.occlusion[j],
            }
        })
        .collect();
    let joints = est
        .joints
        .iter()
        .zip(&scene.gt_joint_params_camera)
        .zip(&scene.gt_joint_states)
        .map(|((e, gt), &gt_state)| {
            let revolute = gt.pivot.is_some();
            let state_error = if revolute {
                (e.state - gt_state).abs().to_degrees()
            } else {
                (e.state - gt_state).abs()
            };
            JointMetrics {
                state_error,
                axis_error_deg: axis_angle_deg(&e.axis, &gt.axis, false),
                pivot_distance: match (e.pivot, gt.pivot) {
                    (Some(p), Some(q)) => Some(line_to_line_distance(&Line3::new(p, e.axis), &Line3::new(q, gt.axis))),
                    _ => None,
                },
            }
        })
        .collect();
    Ok(SceneMetrics {
        scene_id: scene.scene_id,
        parts,
        joints,
    })
}

/// Per part, the fraction of scenes whose AD is below `fraction` of the
/// part diameter.
pub fn ad_accuracy(metrics: &[SceneMetrics], fraction: f64) -> Vec<f64> {
    let Some(first) = metrics.first() else {
        return Vec::new();
    };
    (0..first.parts.len())
        .map(|j| {
            let hits = metrics
                .iter()
                .filter(|m| m.parts[j].average_distance < fraction * m.parts[j].diameter)
                .count();
            hits as f64 / metrics.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use crate::kinematics::{make_procedural_model, Category, KinematicModel, ShapeParams};
    use crate::observe::{generate_scenes, CameraConfig};
    use crate::pipeline::{estimate_scene, FitConfig, Method};
    use crate::predict::PredictionRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn fixture(category: Category, count: usize) -> (KinematicModel<f64>, CanonicalModel, Vec<Scene>) {
        let model = make_procedural_model(category, 6, &ShapeParams::default()).unwrap();
        let canonical = CanonicalModel::build(&model, 0.2).unwrap();
        let scenes = generate_scenes(&model, &canonical, &CameraConfig::default(), 41, count, "m.json").unwrap();
        (model, canonical, scenes)
    }

    fn exact(model: &KinematicModel<f64>, s: &Scene) -> SceneEstimate {
        estimate_scene(
            Method::Ancsh,
            model,
            s,
            &PredictionRecord::ground_truth(s),
            &FitConfig::default(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn ground_truth_scores_zero() {
        for category in Category::ALL {
            let (model, canonical, scenes) = fixture(category, 2);
            for s in &scenes {
                let m = score_scene(&exact(&model, s), s, &canonical, DEFAULT_AD_FRACTION).unwrap();
                for p in &m.parts {
                    assert!(p.rotation_error_deg < 1e-6 && p.translation_error < 1e-9);
                    assert!(p.iou_3d.unwrap() > 1.0 - 1e-9);
                    assert!(p.ad_hit);
                }
                for j in &m.joints {
                    assert!(j.state_error < 1e-6 && j.axis_error_deg < 1e-6);
                    assert!(j.pivot_distance.unwrap_or(0.0) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn five_degree_rotation_offset() {
        let (model, canonical, scenes) = fixture(Category::TwoPartRevolute, 1);
        let s = &scenes[0];
        let mut est = exact(&model, s);
        let rz = Rotation::from_axis_angle(&Vector3::z_axis(), 5f64.to_radians());
        est.pose.poses[0].rotation = rz * est.pose.poses[0].rotation;
        let m = score_scene(&est, s, &canonical, DEFAULT_AD_FRACTION).unwrap();
        assert!((m.parts[0].rotation_error_deg - 5.0).abs() < 1e-9);
        assert!(m.parts[0].translation_error < 1e-12);
    }

    #[test]
    fn matches_independent_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (model, canonical, scenes) = fixture(Category::EyeglassesLike, 3);
        for s in &scenes {
            let mut est = exact(&model, s);
            for p in &mut est.pose.poses {
                let w = Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1));
                p.rotation = Rotation::new(w) * p.rotation;
                p.translation += Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
            }
            for j in &mut est.joints {
                j.state += 0.01;
                j.axis = (j.axis + Vector3::new(0.0, 0.02, 0.0)).normalize();
            }
            let m = score_scene(&est, s, &canonical, DEFAULT_AD_FRACTION).unwrap();
            for (k, pm) in m.parts.iter().enumerate() {
                let (a, b) = (est.pose.poses[k], s.gt_part_poses[k]);
                let rel = a.rotation.matrix().transpose() * b.rotation.matrix();
                let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
                assert!((pm.rotation_error_deg - cos.acos().to_degrees()).abs() < 1e-6);
                let dt = a.translation - b.translation;
                assert!((pm.translation_error - (dt.x * dt.x + dt.y * dt.y + dt.z * dt.z).sqrt()).abs() < 1e-15);
                let pts = &canonical.npcs.parts[k].points;
                let ad: f64 = pts.iter().map(|x| (a.apply(x) - b.apply(x)).norm()).sum::<f64>() / pts.len() as f64;
                assert!((pm.average_distance - ad).abs() < 1e-12);
            }
            for (k, jm) in m.joints.iter().enumerate() {
                let d = (est.joints[k].state - s.gt_joint_states[k]).abs().to_degrees();
                assert!((jm.state_error - d).abs() < 1e-9);
                let c = est.joints[k].axis.dot(&s.gt_joint_params_camera[k].axis).abs().min(1.0);
                assert!((jm.axis_error_deg - c.acos().to_degrees()).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn ad_accuracy_extremes_and_half_split() {
        let (model, canonical, scenes) = fixture(Category::TwoPartRevolute, 8);
        let mut exact_metrics = Vec::new();
        let mut shifted = Vec::new();
        let mut split = Vec::new();
        for (n, s) in scenes.iter().enumerate() {
            let est = exact(&model, s);
            exact_metrics.push(score_scene(&est, s, &canonical, DEFAULT_AD_FRACTION).unwrap());
            let mut off = est.clone();
            for (j, p) in off.pose.poses.iter_mut().enumerate() {
                let d = exact_metrics[n].parts[j].diameter;
                p.translation.x += 0.2 * d;
            }
            shifted.push(score_scene(&off, s, &canonical, DEFAULT_AD_FRACTION).unwrap());
            let mut half = est.clone();
            if n % 2 == 0 {
                for p in &mut half.pose.poses {
                    p.rotation = Rotation::from_axis_angle(&Vector3::x_axis(), 1.0) * p.rotation;
                }
            }
            split.push(score_scene(&half, s, &canonical, DEFAULT_AD_FRACTION).unwrap());
        }
        assert_eq!(ad_accuracy(&exact_metrics, 0.1), vec![1.0, 1.0]);
        assert_eq!(ad_accuracy(&shifted, 0.1), vec![0.0, 0.0]);
        for a in ad_accuracy(&split, 0.1) {
            assert!((a - 0.5).abs() <= 1.0 / (scenes.len() as f64).sqrt());
        }
    }

    #[test]
    fn count_mismatch() {
        let (model, canonical, scenes) = fixture(Category::TwoPartRevolute, 1);
        let mut est = exact(&model, &scenes[0]);
        est.pose.poses.pop();
        assert!(matches!(
            score_scene(&est, &scenes[0], &canonical, 0.1),
            Err(Error::CountMismatch(_))
        ));
    }
}
