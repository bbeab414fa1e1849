//! Synthetic observations: random joint states and viewpoints, a
//! self-occluded camera-space point cloud, and complete ground truth.

mod dataset;
mod visibility;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{CanonicalModel, NaocsJoint, PartScaling};
use crate::error::{Error, Result};
use crate::geometry::{bounds, Similarity};
use crate::kinematics::{JointStates, JointType, KinematicModel};
use crate::seed::rng_for;
use crate::serde_util;

pub use dataset::{read_dataset, write_dataset, DatasetHeader, DATASET_SCHEMA_VERSION};
pub use visibility::{visible_samples, DepthBufferConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    /// Camera distance to the object center, in multiples of the posed
    /// object's tight-box diagonal.
    pub distance_range: [f64; 2],
    /// Radians above the object's horizontal plane.
    pub elevation_range: [f64; 2],
    /// Radians about the object's up axis; `-π/2` looks at the front.
    pub azimuth_range: [f64; 2],
    pub depth_buffer: DepthBufferConfig,
    pub sample_count: usize,
    pub max_attempts: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            distance_range: [1.5, 3.0],
            elevation_range: [15f64.to_radians(), 60f64.to_radians()],
            azimuth_range: [(-160f64).to_radians(), (-20f64).to_radians()],
            depth_buffer: DepthBufferConfig::default(),
            sample_count: 1024,
            max_attempts: 100,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        let [d0, d1] = self.distance_range;
        let db = &self.depth_buffer;
        let ok = d0 > 0.0
            && d0 <= d1
            && self.elevation_range[0] <= self.elevation_range[1]
            && self.elevation_range[0] > -std::f64::consts::FRAC_PI_2
            && self.elevation_range[1] < std::f64::consts::FRAC_PI_2
            && self.azimuth_range[0] <= self.azimuth_range[1]
            && db.width >= 32
            && db.height >= 32
            && db.focal > 0.0
            && self.sample_count >= 64
            && self.max_attempts >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("camera configuration out of bounds".into()))
        }
    }
}

/// Camera-frame joint parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraJoint {
    #[serde(with = "serde_util::vec3")]
    pub axis: Vector3<f64>,
    #[serde(with = "serde_util::opt_vec3")]
    pub pivot: Option<Vector3<f64>>,
}

/// One synthetic observation with full ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: u64,
    pub model_ref: String,
    pub joint_states: JointStates<f64>,
    /// Object frame to camera frame.
    pub camera: Similarity<f64>,
    #[serde(with = "serde_util::vec3_list")]
    pub points: Vec<Vector3<f64>>,
    pub gt_part_labels: Vec<usize>,
    #[serde(with = "serde_util::vec3_list")]
    pub gt_npcs: Vec<Vector3<f64>>,
    pub gt_assoc: Vec<usize>,
    /// Per-part `(G_s, G_t)`.
    pub gt_scaling: Vec<PartScaling>,
    /// Per-part NPCS-to-camera poses.
    pub gt_part_poses: Vec<Similarity<f64>>,
    pub gt_joint_params_naocs: Vec<NaocsJoint>,
    pub gt_joint_params_camera: Vec<CameraJoint>,
    /// Unsigned offset from rest: radians, or camera length units.
    pub gt_joint_states: Vec<f64>,
    /// Visible area share per part.
    pub occlusion: Vec<f64>,
    /// Fewer than the requested number of visible samples; points were
    /// drawn with replacement.
    pub undersampled: bool,
}

impl Scene {
    pub fn part_count(&self) -> usize {
        self.gt_part_poses.len()
    }

    pub fn joint_count(&self) -> usize {
        self.gt_joint_states.len()
    }

    /// Largest deviation of `points` from their ground-truth NPCS
    /// reconstruction.
    pub fn reconstruction_error(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.gt_npcs)
            .zip(&self.gt_part_labels)
            .map(|((p, c), &j)| (p - self.gt_part_poses[j].apply(c)).norm())
            .fold(0.0, f64::max)
    }

    pub fn point_indices_of(&self, part: usize) -> impl Iterator<Item = usize> + '_ {
        self.gt_part_labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == part)
            .map(|(i, _)| i)
    }
}

/// Visible area share of `part` in `scene`.
pub fn occlusion_level(scene: &Scene, part: usize) -> f64 {
    scene.occlusion[part]
}

/// Look-at camera: object frame to an OpenCV-style camera frame
/// (`x` right, `y` down, `z` forward), placed on a sphere around `target`.
pub fn look_at_camera(target: &Vector3<f64>, distance: f64, elevation: f64, azimuth: f64) -> Similarity<f64> {
    let dir = Vector3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    );
    let eye = target + dir * distance;
    let forward = -dir;
    let right = forward.cross(&Vector3::z()).normalize();
    let down = forward.cross(&right);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_rows(&[
        right.transpose(),
        down.transpose(),
        forward.transpose(),
    ]));
    Similarity::new(1.0, rot, -(rot * eye))
}

/// Per-part NPCS-to-camera poses for a camera and object-frame FK poses.
pub fn part_poses(
    canonical: &CanonicalModel,
    fk: &[Similarity<f64>],
    camera: &Similarity<f64>,
) -> Vec<Similarity<f64>> {
    let naocs = &canonical.naocs;
    fk.iter()
        .zip(&canonical.npcs.parts)
        .map(|(pose, part)| {
            let s = part.scaling;
            let to_camera = camera.compose(pose);
            // NPCS → NAOCS → object frame
            let npcs_to_object = Similarity::new(
                s.g_scale / naocs.object_scale,
                Rotation3::identity(),
                naocs.from_naocs(&s.g_offset),
            );
            to_camera.compose(&npcs_to_object)
        })
        .collect()
}

/// Camera-frame joint parameters obtained by moving the object-frame axis
/// and pivot with the parent part.
pub fn camera_joint_params(
    model: &KinematicModel<f64>,
    fk: &[Similarity<f64>],
    camera: &Similarity<f64>,
) -> Vec<CameraJoint> {
    model
        .joints
        .iter()
        .map(|j| {
            let parent = camera.compose(&fk[j.parent]);
            CameraJoint {
                axis: (parent.rotation * j.axis).normalize(),
                pivot: match j.joint_type {
                    JointType::Revolute => j.pivot.map(|q| parent.apply(&q)),
                    JointType::Prismatic => None,
                },
            }
        })
        .collect()
}

/// Fewest sampled points a part may have; a pose needs three.
pub const MIN_PART_POINTS: usize = 3;

/// Samples one scene of `model` deterministically from `rng`.
///
/// Viewpoints leaving a part with fewer than [`MIN_PART_POINTS`] sampled
/// points are rejected and redrawn.
pub fn sample_scene_with(
    model: &KinematicModel<f64>,
    canonical: &CanonicalModel,
    cfg: &CameraConfig,
    scene_id: u64,
    model_ref: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Scene> {
    cfg.validate()?;
    let states = JointStates(
        model
            .joints
            .iter()
            .map(|j| {
                if j.range[0] < j.range[1] {
                    rng.random_range(j.range[0]..=j.range[1])
                } else {
                    j.range[0]
                }
            })
            .collect(),
    );
    let fk = model.forward_kinematics(&states)?;
    let posed: Vec<(usize, usize, Vector3<f64>)> = model
        .parts
        .iter()
        .zip(&fk)
        .flat_map(|(part, pose)| {
            part.points
                .iter()
                .enumerate()
                .map(move |(i, p)| (part.id, i, pose.apply(p)))
        })
        .collect();
    let all: Vec<_> = posed.iter().map(|(_, _, p)| *p).collect();
    let (lo, hi) = bounds(&all).expect("model has points");
    let center = (lo + hi) * 0.5;
    let diagonal = (hi - lo).norm();

    let uniform = |rng: &mut ChaCha8Rng, r: [f64; 2]| {
        if r[0] < r[1] {
            rng.random_range(r[0]..r[1])
        } else {
            r[0]
        }
    };
    for _ in 0..cfg.max_attempts {
        let distance = uniform(rng, cfg.distance_range) * diagonal;
        let elevation = uniform(rng, cfg.elevation_range);
        let azimuth = uniform(rng, cfg.azimuth_range);
        let camera = look_at_camera(&center, distance, elevation, azimuth);
        let cam_points: Vec<_> = all.iter().map(|p| camera.apply(p)).collect();
        let visible = visible_samples(&cam_points, &cfg.depth_buffer);

        let mut occlusion = vec![0.0; model.part_count()];
        for ((part, i, _), &v) in posed.iter().zip(&visible) {
            if v {
                occlusion[*part] += model.parts[*part].area_weights[*i];
            }
        }
        let mut seen = vec![false; model.part_count()];
        for ((part, _, _), &v) in posed.iter().zip(&visible) {
            seen[*part] |= v;
        }
        if seen.iter().any(|s| !s) {
            continue;
        }

        let visible_idx: Vec<usize> = (0..posed.len()).filter(|&i| visible[i]).collect();
        let n = cfg.sample_count;
        let undersampled = visible_idx.len() < n;
        let mut chosen: Vec<usize> = if undersampled {
            (0..n)
                .map(|_| visible_idx[rng.random_range(0..visible_idx.len())])
                .collect()
        } else {
            index::sample(rng, visible_idx.len(), n)
                .into_iter()
                .map(|k| visible_idx[k])
                .collect()
        };
        chosen.sort_unstable();
        let mut counts = vec![0usize; model.part_count()];
        for &k in &chosen {
            counts[posed[k].0] += 1;
        }
        if counts.iter().any(|&c| c < MIN_PART_POINTS) {
            continue;
        }

        let poses = part_poses(canonical, &fk, &camera);
        let joint_cam = camera_joint_params(model, &fk, &camera);
        let joint_offsets = model
            .joints
            .iter()
            .zip(&states.0)
            .map(|(j, &s)| match j.joint_type {
                JointType::Revolute => (s - j.rest_state).abs(),
                JointType::Prismatic => (s - j.rest_state).abs() * camera.scale,
            })
            .collect();
        return Ok(Scene {
            scene_id,
            model_ref: model_ref.to_string(),
            joint_states: states,
            camera,
            points: chosen.iter().map(|&k| cam_points[k]).collect(),
            gt_part_labels: chosen.iter().map(|&k| posed[k].0).collect(),
            gt_npcs: chosen
                .iter()
                .map(|&k| canonical.npcs.parts[posed[k].0].points[posed[k].1])
                .collect(),
            gt_assoc: chosen
                .iter()
                .map(|&k| canonical.association.labels[posed[k].0][posed[k].1])
                .collect(),
            gt_scaling: canonical.npcs.scalings(),
            gt_part_poses: poses,
            gt_joint_params_naocs: canonical.joints.clone(),
            gt_joint_params_camera: joint_cam,
            gt_joint_states: joint_offsets,
            occlusion,
            undersampled,
        });
    }
    Err(Error::ResampleLimitExceeded(cfg.max_attempts))
}

/// Samples scene `scene_id` with its RNG derived from `master_seed`.
pub fn sample_scene(
    model: &KinematicModel<f64>,
    canonical: &CanonicalModel,
    cfg: &CameraConfig,
    master_seed: u64,
    scene_id: u64,
    model_ref: &str,
) -> Result<Scene> {
    let mut rng = rng_for(master_seed, "scene", scene_id);
    sample_scene_with(model, canonical, cfg, scene_id, model_ref, &mut rng)
}

/// Scenes `0..count` in parallel; the output does not depend on the
/// thread count.
pub fn generate_scenes(
    model: &KinematicModel<f64>,
    canonical: &CanonicalModel,
    cfg: &CameraConfig,
    master_seed: u64,
    count: usize,
    model_ref: &str,
) -> Result<Vec<Scene>> {
    (0..count as u64)
        .into_par_iter()
        .map(|id| sample_scene(model, canonical, cfg, master_seed, id, model_ref))
        .collect()
}
