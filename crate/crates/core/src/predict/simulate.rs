use nalgebra::{Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{PredictionRecord, Vote};
use crate::error::{Error, Result};
use crate::geometry::rotation_about;
use crate::observe::Scene;
use crate::seed::rng_for;

/// Fraction of points, ranked by distance to the nearest point of another
/// part, that may receive a segmentation flip.
const SEG_FLIP_ELIGIBLE_FRACTION: f64 = 0.1;

/// Per-head noise for [`simulate_prediction`]. All zero means ground truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Std of isotropic Gaussian noise on NPCS coordinates.
    pub npcs_sigma: f64,
    /// Std of the log of the multiplicative noise on `G_s`.
    pub g_scale_rel_sigma: f64,
    pub g_offset_sigma: f64,
    /// Std of the tilt angle applied to each vote axis, in degrees.
    pub axis_angle_sigma_deg: f64,
    /// Std of additive noise on the vote projection distance.
    pub pivot_sigma: f64,
    pub seg_flip_prob: f64,
    pub assoc_flip_prob: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            self.npcs_sigma,
            self.g_scale_rel_sigma,
            self.g_offset_sigma,
            self.axis_angle_sigma_deg,
            self.pivot_sigma,
        ];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidConfig(
                "noise sigmas must be finite and nonnegative".into(),
            ));
        }
        for p in [self.seg_flip_prob, self.assoc_flip_prob] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("flip probability {p} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Distance from each point to the closest point carrying another label.
fn distance_to_other_part(points: &[Vector3<f64>], labels: &[usize]) -> Vec<f64> {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            points
                .iter()
                .zip(labels)
                .filter(|(_, &m)| m != l)
                .map(|(q, _)| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

/// Points eligible for segmentation flips: the closest
/// `SEG_FLIP_ELIGIBLE_FRACTION` of points to a different part.
pub(crate) fn seg_flip_eligible(scene: &Scene) -> Vec<bool> {
    let n = scene.points.len();
    let dist = distance_to_other_part(&scene.points, &scene.gt_part_labels);
    let mut order: Vec<usize> = (0..n).filter(|&i| dist[i].is_finite()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let take = (SEG_FLIP_ELIGIBLE_FRACTION * n as f64).ceil() as usize;
    let mut eligible = vec![false; n];
    for &i in order.iter().take(take) {
        eligible[i] = true;
    }
    eligible
}

fn gaussian3(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Uniform pick among `0..count` excluding `current`.
fn other_label(rng: &mut impl Rng, current: usize, count: usize) -> usize {
    let pick = rng.random_range(0..count - 1);
    if pick >= current {
        pick + 1
    } else {
        pick
    }
}

/// Tilt `axis` by `angle` toward the component of `dir` perpendicular to it.
fn tilt(axis: &Vector3<f64>, dir: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let perp = dir - axis * axis.dot(dir);
    let Some(perp) = perp.try_normalize(1e-12) else {
        return *axis;
    };
    let hinge = Unit::new_normalize(axis.cross(&perp));
    (rotation_about(&hinge, angle) * axis).normalize()
}

/// Perturbed copy of the scene's ground-truth heads.
///
/// The random stream comes from `rng_for(seed, "predict", scene_id)` and is
/// consumed in a fixed per-point order regardless of which sigmas are zero,
/// so changing one noise level never reshuffles the others.
pub fn simulate_prediction(scene: &Scene, noise: &NoiseConfig, seed: u64) -> PredictionRecord {
    let mut rng = rng_for(seed, "predict", scene.scene_id);
    let parts = scene.part_count();
    let joints = scene.joint_count();
    let eligible = if noise.seg_flip_prob > 0.0 && parts > 1 {
        seg_flip_eligible(scene)
    } else {
        vec![false; scene.points.len()]
    };
    let axis_sigma = noise.axis_angle_sigma_deg.to_radians();

    let mut pred = PredictionRecord::ground_truth(scene);
    for i in 0..scene.points.len() {
        let true_part = scene.gt_part_labels[i];
        let dc = gaussian3(&mut rng);
        let ds: f64 = rng.sample(StandardNormal);
        let dt = gaussian3(&mut rng);
        let tilt_dir = gaussian3(&mut rng);
        let tilt_angle: f64 = rng.sample(StandardNormal);
        let dd: f64 = rng.sample(StandardNormal);
        let seg_u: f64 = rng.random();
        let seg_pick = if parts > 1 {
            other_label(&mut rng, true_part, parts)
        } else {
            true_part
        };
        let assoc_u: f64 = rng.random();
        let assoc_pick = other_label(&mut rng, scene.gt_assoc[i], joints + 1);

        if eligible[i] && seg_u < noise.seg_flip_prob {
            pred.labels[i] = seg_pick;
        }
        let part = pred.labels[i];
        if noise.npcs_sigma > 0.0 {
            pred.npcs[i] += dc * noise.npcs_sigma;
        }
        let gt = scene.gt_scaling[part];
        pred.g_scale[i] = if noise.g_scale_rel_sigma > 0.0 {
            gt.g_scale * (ds * noise.g_scale_rel_sigma).exp()
        } else {
            gt.g_scale
        };
        pred.g_offset[i] = if noise.g_offset_sigma > 0.0 {
            gt.g_offset + dt * noise.g_offset_sigma
        } else {
            gt.g_offset
        };

        if joints > 0 && assoc_u < noise.assoc_flip_prob {
            pred.assoc[i] = assoc_pick;
        }
        pred.votes[i] = match pred.assoc[i] {
            0 => Vote::ZERO,
            a => {
                let g_true = scene.gt_scaling[true_part].to_naocs(&scene.gt_npcs[i]);
                let mut vote = Vote::encode(&scene.gt_joint_params_naocs[a - 1], &g_true);
                if axis_sigma > 0.0 {
                    vote.axis = tilt(&vote.axis, &tilt_dir, tilt_angle * axis_sigma);
                }
                if noise.pivot_sigma > 0.0 && vote.projection_dist > 0.0 {
                    vote.projection_dist = (vote.projection_dist + dd * noise.pivot_sigma).abs();
                }
                vote
            }
        };
    }
    pred
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::CanonicalModel;
    use crate::geometry::axis_angle_deg;
    use crate::kinematics::{make_procedural_model, Category, ShapeParams};
    use crate::observe::{sample_scene, CameraConfig};

    pub(crate) fn scene(category: Category, id: u64) -> Scene {
        let model = make_procedural_model(category, 3, &ShapeParams::default()).unwrap();
        let canonical = CanonicalModel::build(&model, 0.2).unwrap();
        sample_scene(&model, &canonical, &CameraConfig::default(), 11, id, "m.json").unwrap()
    }

    #[test]
    fn zero_noise_is_ground_truth() {
        let s = scene(Category::EyeglassesLike, 0);
        let pred = simulate_prediction(&s, &NoiseConfig::default(), 5);
        assert_eq!(pred, PredictionRecord::ground_truth(&s));
        for (i, v) in pred.votes.iter().enumerate() {
            if pred.assoc[i] != 0 {
                assert!((v.axis.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = scene(Category::TwoPartRevolute, 1);
        let noise = NoiseConfig {
            npcs_sigma: 0.02,
            seg_flip_prob: 0.05,
            axis_angle_sigma_deg: 3.0,
            ..Default::default()
        };
        assert_eq!(simulate_prediction(&s, &noise, 9), simulate_prediction(&s, &noise, 9));
        assert_ne!(simulate_prediction(&s, &noise, 9), simulate_prediction(&s, &noise, 10));
    }

    #[test]
    fn npcs_noise_has_requested_spread() {
        let noise = NoiseConfig {
            npcs_sigma: 0.02,
            ..Default::default()
        };
        let mut residuals = Vec::new();
        for id in 0..10 {
            let s = scene(Category::TwoPartRevolute, id);
            let pred = simulate_prediction(&s, &noise, 2);
            for (c, gt) in pred.npcs.iter().zip(&s.gt_npcs) {
                residuals.extend((c - gt).iter().copied());
            }
        }
        assert!(residuals.len() >= 3 * 10_000);
        for axis in 0..3 {
            let xs: Vec<f64> = residuals.iter().skip(axis).step_by(3).copied().collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((sd - 0.02).abs() < 0.002, "sd {sd}");
        }
    }

    #[test]
    fn seg_flips_hit_expected_fraction_of_eligible_points() {
        let noise = NoiseConfig {
            seg_flip_prob: 0.05,
            ..Default::default()
        };
        let (mut flipped, mut total, mut eligible_total) = (0usize, 0usize, 0usize);
        for id in 0..12 {
            let s = scene(Category::EyeglassesLike, id);
            let eligible = seg_flip_eligible(&s);
            let pred = simulate_prediction(&s, &noise, 4);
            for i in 0..s.points.len() {
                if pred.labels[i] != s.gt_part_labels[i] {
                    assert!(eligible[i], "flip outside the boundary band");
                    flipped += 1;
                }
            }
            eligible_total += eligible.iter().filter(|&&e| e).count();
            total += s.points.len();
        }
        assert!(total >= 10_000);
        let eligible_fraction = eligible_total as f64 / total as f64;
        let rate = flipped as f64 / total as f64;
        assert!(
            (rate - 0.05 * eligible_fraction).abs() <= 0.01 * eligible_fraction,
            "rate {rate}, eligible {eligible_fraction}"
        );
    }

    #[test]
    fn assoc_flips_pick_other_labels() {
        let s = scene(Category::EyeglassesLike, 2);
        let noise = NoiseConfig {
            assoc_flip_prob: 0.5,
            ..Default::default()
        };
        let pred = simulate_prediction(&s, &noise, 1);
        let changed = (0..s.points.len()).filter(|&i| pred.assoc[i] != s.gt_assoc[i]).count();
        let frac = changed as f64 / s.points.len() as f64;
        assert!((frac - 0.5).abs() < 0.06, "{frac}");
        assert!(pred.assoc.iter().all(|&a| a <= s.joint_count()));
        for (i, &a) in pred.assoc.iter().enumerate() {
            assert_eq!(a == 0, pred.votes[i] == Vote::ZERO);
        }
    }

    #[test]
    fn tilt_moves_axis_by_the_angle() {
        let axis = Vector3::new(0.0, 0.0, 1.0);
        let out = tilt(&axis, &Vector3::new(1.0, 2.0, 3.0), 0.1);
        assert!((axis_angle_deg(&axis, &out, true) - 0.1f64.to_degrees()).abs() < 1e-9);
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }
}
