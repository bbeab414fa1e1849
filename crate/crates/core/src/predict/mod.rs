//! Per-point predictions in the shape of the four network heads
//! (segmentation, NPCS coordinates, NPCS-to-NAOCS scaling, joint
//! association with joint-parameter votes), and their aggregation.
//!
//! Records come either from [`simulate_prediction`], which perturbs ground
//! truth under a [`NoiseConfig`], or from files written by an external
//! network ([`read_prediction`]).

mod aggregate;
mod io;
mod simulate;

use nalgebra::Vector3;

use crate::canonical::NaocsJoint;
use crate::geometry::Line3;
use crate::observe::Scene;

pub use aggregate::{aggregate_joint_votes, aggregate_part_transforms, mean_axis};
pub use io::{read_prediction, write_prediction, PREDICTION_SCHEMA_VERSION};
pub use simulate::{simulate_prediction, NoiseConfig};

/// Joint-parameter vote: the joint axis, plus for revolute joints the unit
/// direction and distance from the point to its projection on the axis.
/// Wire form is `[axis; 3, projection_dir; 3, projection_dist]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vote {
    pub axis: Vector3<f64>,
    pub projection_dir: Vector3<f64>,
    pub projection_dist: f64,
}

impl Vote {
    pub const ZERO: Vote = Vote {
        axis: Vector3::new(0.0, 0.0, 0.0),
        projection_dir: Vector3::new(0.0, 0.0, 0.0),
        projection_dist: 0.0,
    };

    /// Vote of NAOCS point `g` for `joint`.
    pub fn encode(joint: &NaocsJoint, g: &Vector3<f64>) -> Vote {
        let Some(pivot) = joint.pivot else {
            return Vote {
                axis: joint.axis,
                ..Vote::ZERO
            };
        };
        let line = Line3::new(pivot, joint.axis);
        let offset = line.project(g) - g;
        let dist = offset.norm();
        let dir = if dist > 1e-12 {
            offset / dist
        } else {
            // on the axis: any perpendicular works
            let helper = if joint.axis.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            joint.axis.cross(&helper).normalize()
        };
        Vote {
            axis: joint.axis,
            projection_dir: dir,
            projection_dist: dist,
        }
    }

    /// Point on the axis reconstructed from `g`.
    pub fn pivot_from(&self, g: &Vector3<f64>) -> Vector3<f64> {
        g + self.projection_dir * self.projection_dist
    }

    pub fn to_array(&self) -> [f64; 7] {
        let (a, d) = (self.axis, self.projection_dir);
        [a.x, a.y, a.z, d.x, d.y, d.z, self.projection_dist]
    }

    pub fn from_array(v: &[f64; 7]) -> Vote {
        Vote {
            axis: Vector3::new(v[0], v[1], v[2]),
            projection_dir: Vector3::new(v[3], v[4], v[5]),
            projection_dist: v[6],
        }
    }
}

/// Per-point outputs for one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub scene_id: u64,
    pub labels: Vec<usize>,
    pub npcs: Vec<Vector3<f64>>,
    pub g_scale: Vec<f64>,
    pub g_offset: Vec<Vector3<f64>>,
    /// `0` for no joint, `k + 1` for joint `k`.
    pub assoc: Vec<usize>,
    pub votes: Vec<Vote>,
}

impl PredictionRecord {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// NAOCS position predicted for point `i`: `G_s,i·c_i + G_t,i`.
    pub fn naocs_point(&self, i: usize) -> Vector3<f64> {
        self.npcs[i] * self.g_scale[i] + self.g_offset[i]
    }

    /// Noise-free record equal to the scene's ground truth.
    pub fn ground_truth(scene: &Scene) -> PredictionRecord {
        let n = scene.points.len();
        let g_scale = (0..n)
            .map(|i| scene.gt_scaling[scene.gt_part_labels[i]].g_scale)
            .collect();
        let g_offset = (0..n)
            .map(|i| scene.gt_scaling[scene.gt_part_labels[i]].g_offset)
            .collect();
        let votes = (0..n)
            .map(|i| match scene.gt_assoc[i] {
                0 => Vote::ZERO,
                a => {
                    let s = scene.gt_scaling[scene.gt_part_labels[i]];
                    Vote::encode(&scene.gt_joint_params_naocs[a - 1], &s.to_naocs(&scene.gt_npcs[i]))
                }
            })
            .collect();
        PredictionRecord {
            scene_id: scene.scene_id,
            labels: scene.gt_part_labels.clone(),
            npcs: scene.gt_npcs.clone(),
            g_scale,
            g_offset,
            assoc: scene.gt_assoc.clone(),
            votes,
        }
    }
}
