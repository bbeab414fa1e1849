//! Closed-form joint parameters, joint states, and amodal boxes from part
//! poses.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::canonical::{NaocsJoint, PartScaling};
use crate::error::{Error, Result};
use crate::geometry::{bounds, rotation_geodesic, OrientedBox, Similarity};
use crate::kinematics::JointType;
use crate::solve::{residuals::prismatic_delta, JointConstraint};

/// Camera-space joint: unit axis, pivot for revolute joints, and the state
/// (radians for revolute, camera length units for prismatic).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointEstimate {
    pub joint: usize,
    #[serde(with = "crate::serde_util::vec3")]
    pub axis: Vector3<f64>,
    #[serde(with = "crate::serde_util::opt_vec3", default)]
    pub pivot: Option<Vector3<f64>>,
    pub state: f64,
}

/// `normalize((R1 + R2)·u′)`.
fn camera_axis(joint: usize, p1: &Similarity<f64>, p2: &Similarity<f64>, axis: &Vector3<f64>) -> Result<Vector3<f64>> {
    let sum = p1.rotation * axis + p2.rotation * axis;
    sum.try_normalize(1e-9).ok_or(Error::DegenerateAxis(joint))
}

/// Maps NAOCS point `q` into the camera through part `j`.
fn naocs_to_camera(pose: &Similarity<f64>, g: &PartScaling, q: &Vector3<f64>) -> Vector3<f64> {
    pose.rotation * (q - g.g_offset) * (pose.scale / g.g_scale) + pose.translation
}

/// Revolute joint between two parts: the averaged camera axis, the mean of
/// the pivot's images through both parts, and the relative rotation angle.
pub fn recover_revolute(
    joint: usize,
    poses: (&Similarity<f64>, &Similarity<f64>),
    g: (&PartScaling, &PartScaling),
    naocs: &NaocsJoint,
) -> Result<JointEstimate> {
    let (p1, p2) = poses;
    let axis = camera_axis(joint, p1, p2, &naocs.axis)?;
    let q = naocs
        .pivot
        .ok_or_else(|| Error::InvalidModel(format!("revolute joint {joint} has no pivot")))?;
    let pivot = (naocs_to_camera(p1, g.0, &q) + naocs_to_camera(p2, g.1, &q)) * 0.5;
    Ok(JointEstimate {
        joint,
        axis,
        pivot: Some(pivot),
        state: rotation_geodesic(&p1.rotation, &p2.rotation),
    })
}

/// Prismatic joint: the averaged camera axis and the slide `‖δ‖`.
pub fn recover_prismatic(
    joint: usize,
    poses: (&Similarity<f64>, &Similarity<f64>),
    g: (&PartScaling, &PartScaling),
    axis: &Vector3<f64>,
) -> Result<JointEstimate> {
    let (p1, p2) = poses;
    let u = camera_axis(joint, p1, p2, axis)?;
    let delta = prismatic_delta(p1, p2, (g.0.g_scale, &g.0.g_offset), (g.1.g_scale, &g.1.g_offset));
    Ok(JointEstimate {
        joint,
        axis: u,
        pivot: None,
        state: delta.norm(),
    })
}

/// Recovers every joint from part poses.
pub fn recover_joints(
    poses: &[Similarity<f64>],
    g: &[PartScaling],
    joints: &[JointConstraint],
) -> Result<Vec<JointEstimate>> {
    joints
        .iter()
        .enumerate()
        .map(|(k, j)| {
            let pair = (&poses[j.parent], &poses[j.child]);
            let gg = (&g[j.parent], &g[j.child]);
            match j.joint_type {
                JointType::Revolute => recover_revolute(
                    k,
                    pair,
                    gg,
                    &NaocsJoint {
                        axis: j.axis,
                        pivot: j.pivot,
                    },
                ),
                JointType::Prismatic => recover_prismatic(k, pair, gg, &j.axis),
            }
        })
        .collect()
}

/// Tight NPCS box of `npcs` carried into the camera by `pose`.
pub fn amodal_box(pose: &Similarity<f64>, npcs: &[Vector3<f64>]) -> Option<OrientedBox<f64>> {
    let (lo, hi) = bounds(npcs)?;
    let center = (lo + hi) * 0.5;
    Some(OrientedBox::new(
        pose.apply(&center),
        pose.rotation,
        (hi - lo) * (0.5 * pose.scale),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::CanonicalModel;
    use crate::geometry::{axis_angle_deg, box_iou_3d, line_to_line_distance, rotation_about, Line3, Rotation};
    use crate::kinematics::{make_procedural_model, Category, ShapeParams};
    use crate::observe::{generate_scenes, CameraConfig};
    use nalgebra::Unit;

    fn unit_g() -> PartScaling {
        PartScaling {
            g_scale: 1.0,
            g_offset: Vector3::zeros(),
        }
    }

    #[test]
    fn rest_state_identity() {
        let u = Vector3::new(0.0, 0.6, 0.8);
        let q = Vector3::new(0.1, -0.2, 0.3);
        let t = Vector3::new(1.0, 2.0, 3.0);
        let g = PartScaling {
            g_scale: 1.0,
            g_offset: Vector3::new(0.05, 0.0, 0.0),
        };
        let p = Similarity::from_translation(t);
        let est = recover_revolute(
            0,
            (&p, &p),
            (&g, &g),
            &NaocsJoint {
                axis: u,
                pivot: Some(q),
            },
        )
        .unwrap();
        assert!((est.axis - u).norm() < 1e-15);
        assert!((est.pivot.unwrap() - (q - g.g_offset + t)).norm() < 1e-15);
        assert_eq!(est.state, 0.0);
    }

    #[test]
    fn constructed_angle() {
        let r1 = Rotation::new(Vector3::new(0.3, -0.7, 1.1));
        let u = Vector3::new(1.0, 1.0, 0.0).normalize();
        let r2 = rotation_about(&Unit::new_normalize(r1 * u), 33f64.to_radians()) * r1;
        let (p1, p2) = (Similarity::from_rotation(r1), Similarity::from_rotation(r2));
        let j = NaocsJoint {
            axis: u,
            pivot: Some(Vector3::zeros()),
        };
        let est = recover_revolute(0, (&p1, &p2), (&unit_g(), &unit_g()), &j).unwrap();
        assert!((est.state.to_degrees() - 33.0).abs() < 1e-10);
        let swapped = recover_revolute(0, (&p2, &p1), (&unit_g(), &unit_g()), &j).unwrap();
        assert!((swapped.axis - est.axis).norm() < 1e-15);
        assert!(axis_angle_deg(&est.axis, &(r1 * u), true) < 1e-9);
    }

    #[test]
    fn half_turn_flip_is_degenerate() {
        let u = Vector3::z();
        let p1 = Similarity::identity();
        let p2 = Similarity::from_rotation(Rotation::new(Vector3::x() * std::f64::consts::PI));
        assert!(matches!(
            recover_prismatic(4, (&p1, &p2), (&unit_g(), &unit_g()), &u),
            Err(Error::DegenerateAxis(4))
        ));
    }

    #[test]
    fn prismatic_pull() {
        let r = Rotation::new(Vector3::new(0.2, 0.4, -0.1));
        let u = Vector3::new(0.0, -1.0, 0.0);
        let p1 = Similarity::new(1.5, r, Vector3::new(0.1, 0.0, 2.0));
        let p2 = Similarity::new(1.5, r, p1.translation + r * u * 0.3);
        let est = recover_prismatic(0, (&p1, &p2), (&unit_g(), &unit_g()), &u).unwrap();
        assert!((est.state - 0.3).abs() < 1e-14);
        assert!(axis_angle_deg(&est.axis, &(p2.translation - p1.translation), true) < 1e-6);
        let rest = recover_prismatic(0, (&p1, &p1), (&unit_g(), &unit_g()), &u).unwrap();
        assert_eq!(rest.state, 0.0);
    }

    #[test]
    fn ground_truth_poses_reproduce_scene_joints() {
        for category in Category::ALL {
            let model = make_procedural_model(category, 8, &ShapeParams::default()).unwrap();
            let canonical = CanonicalModel::build(&model, 0.2).unwrap();
            let scenes = generate_scenes(&model, &canonical, &CameraConfig::default(), 4, 10, "m.json").unwrap();
            let joints = JointConstraint::from_model(&model, &canonical.joints).unwrap();
            for s in &scenes {
                let est = recover_joints(&s.gt_part_poses, &s.gt_scaling, &joints).unwrap();
                for (k, e) in est.iter().enumerate() {
                    let gt = &s.gt_joint_params_camera[k];
                    assert!(axis_angle_deg(&e.axis, &gt.axis, false) < 1e-6, "{category}");
                    assert!(
                        (e.state - s.gt_joint_states[k]).abs() < 1e-9,
                        "{category} {} vs {}",
                        e.state,
                        s.gt_joint_states[k]
                    );
                    if let (Some(p), Some(q)) = (e.pivot, gt.pivot) {
                        let d = line_to_line_distance(&Line3::new(p, e.axis), &Line3::new(q, gt.axis));
                        assert!(d < 1e-9, "{d}");
                    }
                    assert_eq!(e.pivot.is_some(), gt.pivot.is_some());
                }
            }
        }
    }

    #[test]
    fn amodal_box_of_unit_part() {
        let pts = vec![Vector3::repeat(-0.5 / 3f64.sqrt()), Vector3::repeat(0.5 / 3f64.sqrt())];
        let b = amodal_box(&Similarity::identity(), &pts).unwrap();
        assert!((b.half_extents.norm() * 2.0 - 1.0).abs() < 1e-15);
        assert!(b.center.norm() < 1e-15);
        let doubled = amodal_box(&Similarity::new(2.0, Rotation::identity(), Vector3::zeros()), &pts).unwrap();
        assert_eq!(doubled.half_extents, b.half_extents * 2.0);
        let iou = crate::geometry::obb::tests::voxel_iou(&b, &doubled, 100);
        assert!(iou < 1.0 && (iou - 0.125).abs() < 0.02, "{iou}");
        assert!((box_iou_3d(&b, &b) - 1.0).abs() < 1e-12);
    }
}
