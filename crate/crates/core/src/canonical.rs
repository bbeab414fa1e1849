//! Two-level canonical hierarchy: a normalized object space (NAOCS) at the
//! joint rest states and one normalized space per part (NPCS), related by a
//! per-part scale `G_s` and offset `G_t` (`g = G_s·c + G_t`).

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bounds, Line3};
use crate::kinematics::{JointType, KinematicModel};
use crate::serde_util;

/// Default joint-association radius, in NAOCS units.
pub const DEFAULT_ASSOCIATION_SIGMA: f64 = 0.2;

/// Rest-state object normalized to a zero-centered, unit-diagonal box.
#[derive(Clone, Debug, PartialEq)]
pub struct NaocsFrame {
    /// Multiplies object-frame lengths into NAOCS lengths.
    pub object_scale: f64,
    /// Object-frame center of the rest-state tight box.
    pub object_offset: Vector3<f64>,
    /// NAOCS coordinates of every canonical sample, per part.
    pub parts: Vec<Vec<Vector3<f64>>>,
}

impl NaocsFrame {
    pub fn to_naocs(&self, x: &Vector3<f64>) -> Vector3<f64> {
        (x - self.object_offset) * self.object_scale
    }

    pub fn from_naocs(&self, g: &Vector3<f64>) -> Vector3<f64> {
        g / self.object_scale + self.object_offset
    }
}

/// Per-part scale and offset taking NPCS into NAOCS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartScaling {
    pub g_scale: f64,
    #[serde(with = "serde_util::vec3")]
    pub g_offset: Vector3<f64>,
}

impl PartScaling {
    pub fn to_naocs(&self, c: &Vector3<f64>) -> Vector3<f64> {
        c * self.g_scale + self.g_offset
    }

    pub fn to_npcs(&self, g: &Vector3<f64>) -> Vector3<f64> {
        (g - self.g_offset) / self.g_scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpcsPart {
    pub points: Vec<Vector3<f64>>,
    pub scaling: PartScaling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpcsFrame {
    pub parts: Vec<NpcsPart>,
}

impl NpcsFrame {
    pub fn scalings(&self) -> Vec<PartScaling> {
        self.parts.iter().map(|p| p.scaling).collect()
    }
}

/// Joint parameters expressed in NAOCS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaocsJoint {
    #[serde(with = "serde_util::vec3")]
    pub axis: Vector3<f64>,
    #[serde(with = "serde_util::opt_vec3")]
    pub pivot: Option<Vector3<f64>>,
}

pub type NaocsJointParams = Vec<NaocsJoint>;

/// Per-point joint labels, per part: `0` for none, `k + 1` for joint `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointAssociation {
    pub labels: Vec<Vec<usize>>,
}

/// Diagonal of the tight axis-aligned box and its center.
fn box_center_diagonal(points: &[Vector3<f64>]) -> Option<(Vector3<f64>, f64)> {
    let (lo, hi) = bounds(points)?;
    Some(((lo + hi) * 0.5, (hi - lo).norm()))
}

/// Normalizes the rest-state object into NAOCS.
pub fn build_naocs(model: &KinematicModel<f64>) -> Result<NaocsFrame> {
    let poses = model.forward_kinematics(&model.rest_states())?;
    let posed: Vec<Vec<Vector3<f64>>> = model
        .parts
        .iter()
        .zip(&poses)
        .map(|(part, pose)| part.points.iter().map(|p| pose.apply(p)).collect())
        .collect();
    let all: Vec<_> = posed.iter().flatten().copied().collect();
    let (center, diagonal) = box_center_diagonal(&all)
        .filter(|(_, d)| *d > 1e-9)
        .ok_or_else(|| Error::DegenerateInput("object has zero extent".into()))?;
    let object_scale = 1.0 / diagonal;
    let parts = posed
        .into_iter()
        .map(|pts| pts.iter().map(|p| (p - center) * object_scale).collect())
        .collect();
    Ok(NaocsFrame {
        object_scale,
        object_offset: center,
        parts,
    })
}

/// Normalizes every part of a NAOCS frame into its own NPCS.
pub fn build_npcs(naocs: &NaocsFrame) -> Result<NpcsFrame> {
    let parts = naocs
        .parts
        .iter()
        .enumerate()
        .map(|(j, pts)| {
            let (center, diagonal) = box_center_diagonal(pts)
                .filter(|(_, d)| *d >= 1e-9)
                .ok_or(Error::DegeneratePart(j))?;
            let scaling = PartScaling {
                g_scale: diagonal,
                g_offset: center,
            };
            Ok(NpcsPart {
                points: pts.iter().map(|g| scaling.to_npcs(g)).collect(),
                scaling,
            })
        })
        .collect::<Result<_>>()?;
    Ok(NpcsFrame { parts })
}

/// Carries joint axes and pivots from the object frame into NAOCS.
pub fn naocs_joint_params(model: &KinematicModel<f64>, naocs: &NaocsFrame) -> NaocsJointParams {
    model
        .joints
        .iter()
        .map(|j| NaocsJoint {
            axis: j.axis.normalize(),
            pivot: match j.joint_type {
                JointType::Revolute => j.pivot.map(|q| naocs.to_naocs(&q)),
                JointType::Prismatic => None,
            },
        })
        .collect()
}

/// Labels every canonical sample with the joint it votes for.
///
/// Revolute joints claim points of their two parts within `sigma` of the
/// axis; prismatic joints claim every point of their moving part. A point
/// claimed twice goes to the prismatic joint, otherwise to the closest axis.
pub fn associate_points_to_joints(
    naocs: &NaocsFrame,
    model: &KinematicModel<f64>,
    joints: &NaocsJointParams,
    sigma: f64,
) -> Result<JointAssociation> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig("association sigma must be positive".into()));
    }
    let labels = naocs
        .parts
        .iter()
        .enumerate()
        .map(|(part, pts)| {
            pts.iter()
                .map(|g| associate_point(g, part, model, joints, sigma))
                .collect()
        })
        .collect();
    Ok(JointAssociation { labels })
}

fn associate_point(
    g: &Vector3<f64>,
    part: usize,
    model: &KinematicModel<f64>,
    joints: &NaocsJointParams,
    sigma: f64,
) -> usize {
    let mut best: Option<(bool, f64, usize)> = None;
    for (k, (joint, params)) in model.joints.iter().zip(joints).enumerate() {
        let claim = match joint.joint_type {
            JointType::Prismatic if joint.child == part => Some((true, 0.0)),
            JointType::Revolute if joint.parent == part || joint.child == part => {
                let axis = Line3::new(params.pivot.unwrap_or_else(Vector3::zeros), params.axis);
                let d = axis.distance_to_point(g);
                (d < sigma).then_some((false, d))
            }
            _ => None,
        };
        if let Some((prismatic, d)) = claim {
            let better = match best {
                None => true,
                Some((bp, bd, _)) => (prismatic && !bp) || (prismatic == bp && d < bd),
            };
            if better {
                best = Some((prismatic, d, k));
            }
        }
    }
    best.map_or(0, |(_, _, k)| k + 1)
}

/// Everything canonical about a model, computed once.
#[derive(Clone, Debug)]
pub struct CanonicalModel {
    pub naocs: NaocsFrame,
    pub npcs: NpcsFrame,
    pub joints: NaocsJointParams,
    pub association: JointAssociation,
}

impl CanonicalModel {
    pub fn build(model: &KinematicModel<f64>, sigma: f64) -> Result<Self> {
        let naocs = build_naocs(model)?;
        let npcs = build_npcs(&naocs)?;
        let joints = naocs_joint_params(model, &naocs);
        let association = associate_points_to_joints(&naocs, model, &joints, sigma)?;
        Ok(Self {
            naocs,
            npcs,
            joints,
            association,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{make_procedural_model, Category, Joint, PartGeometry, ShapeParams};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Recomputes (min, max) independently of `geometry::bounds`.
    fn extent(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (lo, hi)
    }

    fn box_part(id: usize, lo: Vector3<f64>, hi: Vector3<f64>) -> PartGeometry<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(id as u64);
        let mut points: Vec<_> = (0..8)
            .map(|i| {
                Vector3::new(
                    if i & 1 == 0 { lo.x } else { hi.x },
                    if i & 2 == 0 { lo.y } else { hi.y },
                    if i & 4 == 0 { lo.z } else { hi.z },
                )
            })
            .collect();
        points.extend((0..92).map(|_| lo + (hi - lo).component_mul(&Vector3::from_fn(|_, _| rng.random()))));
        PartGeometry {
            id,
            area_weights: vec![0.01; 100],
            points,
        }
    }

    fn box_model(shift: Vector3<f64>) -> KinematicModel<f64> {
        // two parts that together fill a 3 x 4 x 12 box
        let a = box_part(0, shift, shift + Vector3::new(3.0, 4.0, 6.0));
        let b = box_part(
            1,
            shift + Vector3::new(0.0, 0.0, 6.0),
            shift + Vector3::new(3.0, 4.0, 12.0),
        );
        KinematicModel {
            category_name: "box".into(),
            root_part: 0,
            parts: vec![a, b],
            joints: vec![Joint {
                id: 0,
                joint_type: crate::kinematics::JointType::Revolute,
                parent: 0,
                child: 1,
                axis: Vector3::z(),
                pivot: Some(shift + Vector3::new(1.5, 2.0, 6.0)),
                range: [-1.0, 1.0],
                rest_state: 0.0,
            }],
        }
    }

    #[test]
    fn diagonal_normalization() {
        let naocs = build_naocs(&box_model(Vector3::zeros())).unwrap();
        assert_relative_eq!(naocs.object_scale, 1.0 / 13.0, epsilon = 1e-15);
        let all: Vec<_> = naocs.parts.concat();
        let (lo, hi) = extent(&all);
        assert_relative_eq!((hi - lo).norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(lo + hi, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let a = build_naocs(&box_model(Vector3::zeros())).unwrap();
        let b = build_naocs(&box_model(Vector3::repeat(5.0))).unwrap();
        for (pa, pb) in a.parts.concat().iter().zip(b.parts.concat().iter()) {
            assert_relative_eq!(pa, pb, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_drawers_sit_inside_the_cabinet() {
        let m = make_procedural_model(Category::DrawerLike, 5, &ShapeParams::default()).unwrap();
        let naocs = build_naocs(&m).unwrap();
        let (clo, chi) = extent(&naocs.parts[0]);
        for drawer in &naocs.parts[1..] {
            let (lo, hi) = extent(drawer);
            for i in 0..3 {
                assert!(lo[i] >= clo[i] - 1e-12 && hi[i] <= chi[i] + 1e-12);
            }
        }
    }

    #[test]
    fn single_part_npcs_equals_naocs() {
        let naocs = NaocsFrame {
            object_scale: 1.0,
            object_offset: Vector3::zeros(),
            parts: vec![vec![
                Vector3::new(-0.5, -0.5, -0.5) / 3f64.sqrt(),
                Vector3::new(0.5, 0.5, 0.5) / 3f64.sqrt(),
                Vector3::new(0.1, 0.0, -0.2),
            ]],
        };
        let npcs = build_npcs(&naocs).unwrap();
        assert_relative_eq!(npcs.parts[0].scaling.g_scale, 1.0, epsilon = 1e-15);
        assert_relative_eq!(npcs.parts[0].scaling.g_offset, Vector3::zeros(), epsilon = 1e-15);
        for (c, g) in npcs.parts[0].points.iter().zip(&naocs.parts[0]) {
            assert_relative_eq!(c, g, epsilon = 1e-15);
        }
    }

    #[test]
    fn degenerate_part() {
        let naocs = NaocsFrame {
            object_scale: 1.0,
            object_offset: Vector3::zeros(),
            parts: vec![vec![Vector3::repeat(0.1); 3]],
        };
        assert!(matches!(build_npcs(&naocs), Err(Error::DegeneratePart(0))));
    }

    #[test]
    fn canonical_invariants_for_every_category() {
        for cat in Category::ALL {
            for seed in [1, 7, 19] {
                let m = make_procedural_model(cat, seed, &ShapeParams::default()).unwrap();
                let c = CanonicalModel::build(&m, DEFAULT_ASSOCIATION_SIGMA).unwrap();
                let (lo, hi) = extent(&c.naocs.parts.concat());
                assert_relative_eq!((hi - lo).norm(), 1.0, epsilon = 1e-6);
                assert!((lo + hi).norm() < 1e-6);
                for (part, g_pts) in c.npcs.parts.iter().zip(&c.naocs.parts) {
                    let (lo, hi) = extent(&part.points);
                    assert_relative_eq!((hi - lo).norm(), 1.0, epsilon = 1e-6);
                    assert!((lo + hi).norm() < 1e-6);
                    for (cp, g) in part.points.iter().zip(g_pts) {
                        assert!((part.scaling.to_naocs(cp) - g).norm() < 1e-12);
                    }
                    // orientation: differences are parallel with ratio G_s
                    for w in part.points.windows(2).zip(g_pts.windows(2)).take(50) {
                        let dc = w.0[1] - w.0[0];
                        let dg = w.1[1] - w.1[0];
                        assert!((dc * part.scaling.g_scale - dg).norm() < 1e-12);
                    }
                }
                let total: usize = c.association.labels.iter().map(Vec::len).sum();
                assert_eq!(total, m.parts.iter().map(|p| p.points.len()).sum::<usize>());
                assert!(c.association.labels.iter().flatten().all(|&a| a <= m.joint_count()));
            }
        }
    }

    #[test]
    fn eyeglasses_part_diagonals_are_unit() {
        let m = make_procedural_model(Category::EyeglassesLike, 7, &ShapeParams::default()).unwrap();
        let npcs = build_npcs(&build_naocs(&m).unwrap()).unwrap();
        for part in &npcs.parts {
            let (lo, hi) = extent(&part.points);
            assert_relative_eq!((hi - lo).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn joint_params_in_naocs() {
        let m = box_model(Vector3::zeros());
        let naocs = build_naocs(&m).unwrap();
        let joints = naocs_joint_params(&m, &naocs);
        assert_eq!(joints[0].axis, Vector3::z());

        // pivot at the object-frame box center maps to the origin
        let mut centered = m.clone();
        centered.joints[0].pivot = Some(Vector3::new(1.5, 2.0, 6.0));
        let j = naocs_joint_params(&centered, &naocs);
        assert_relative_eq!(j[0].pivot.unwrap(), Vector3::zeros(), epsilon = 1e-15);

        // sampled object-frame axis points stay on the mapped axis
        let q = m.joints[0].pivot.unwrap();
        let line = Line3::new(joints[0].pivot.unwrap(), joints[0].axis);
        for i in 0..20 {
            let p = q + m.joints[0].axis * (i as f64 - 10.0) * 0.37;
            assert!(line.distance_to_point(&naocs.to_naocs(&p)) < 1e-12);
        }
    }

    #[test]
    fn association_rules() {
        let m = box_model(Vector3::zeros());
        let naocs = build_naocs(&m).unwrap();
        let joints = naocs_joint_params(&m, &naocs);
        let q = joints[0].pivot.unwrap();
        assert_eq!(associate_point(&q, 0, &m, &joints, 0.2), 1);
        assert_eq!(
            associate_point(&(q + Vector3::new(0.5, 0.0, 0.0)), 1, &m, &joints, 0.2),
            0
        );
        assert!(associate_points_to_joints(&naocs, &m, &joints, 0.0).is_err());
    }

    #[test]
    fn drawer_association_recount() {
        let m = make_procedural_model(Category::DrawerLike, 2, &ShapeParams::default()).unwrap();
        let c = CanonicalModel::build(&m, DEFAULT_ASSOCIATION_SIGMA).unwrap();
        let mut counts = vec![0usize; m.joint_count() + 1];
        for (part, labels) in c.association.labels.iter().enumerate() {
            for &a in labels {
                counts[a] += 1;
                if part == 0 {
                    assert_eq!(a, 0);
                } else {
                    assert_eq!(a, part);
                }
            }
        }
        assert_eq!(counts[0], m.parts[0].points.len());
        for k in 1..=3 {
            assert_eq!(counts[k], m.parts[k].points.len());
        }
    }
}
