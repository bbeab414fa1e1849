//! Procedural stand-ins for category CAD models.
//!
//! Object frame convention: `+z` up, the object's front faces `-y`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Joint, JointType, KinematicModel, PartGeometry, MIN_PART_POINTS};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Laptop-like base with one hinged lid.
    TwoPartRevolute,
    /// Front frame with two hinged temples.
    EyeglassesLike,
    /// Open-front cabinet with three sliding drawers.
    DrawerLike,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::TwoPartRevolute,
        Category::EyeglassesLike,
        Category::DrawerLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::TwoPartRevolute => "two_part_revolute",
            Category::EyeglassesLike => "eyeglasses_like",
            Category::DrawerLike => "drawer_like",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

/// Instance variation knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeParams {
    pub samples_per_part: usize,
    /// Relative per-dimension jitter, each dimension scaled by `1 ± jitter`.
    pub size_jitter: f64,
    /// Overall instance scale drawn uniformly from this range.
    pub scale_range: [f64; 2],
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            samples_per_part: 2500,
            size_jitter: 0.15,
            scale_range: [0.8, 1.25],
        }
    }
}

/// Axis-aligned box surface given by its corners and which faces exist,
/// ordered `-x, +x, -y, +y, -z, +z`.
struct BoxSurface {
    min: Vector3<f64>,
    max: Vector3<f64>,
    faces: [bool; 6],
}

impl BoxSurface {
    fn closed(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self {
            min,
            max,
            faces: [true; 6],
        }
    }

    /// Face parallelograms as `(origin, edge_u, edge_v)`.
    fn parallelograms(&self) -> Vec<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> {
        let d = self.max - self.min;
        let mut out = Vec::new();
        for (f, present) in self.faces.iter().enumerate() {
            if !present {
                continue;
            }
            let axis = f / 2;
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut origin = self.min;
            if f % 2 == 1 {
                origin[axis] = self.max[axis];
            }
            let mut eu = Vector3::zeros();
            eu[u] = d[u];
            let mut ev = Vector3::zeros();
            ev[v] = d[v];
            out.push((origin, eu, ev));
        }
        out
    }
}

/// Uniform area sampling over a union of box surfaces.
fn sample_surfaces(rng: &mut ChaCha8Rng, surfaces: &[BoxSurface], n: usize) -> PartGeometry<f64> {
    let faces: Vec<_> = surfaces.iter().flat_map(|s| s.parallelograms()).collect();
    let areas: Vec<f64> = faces.iter().map(|(_, u, v)| u.cross(v).norm()).collect();
    let total: f64 = areas.iter().sum();
    // face corners first, so the samples' tight box is the true box
    let mut corners: Vec<Vector3<f64>> = Vec::new();
    for (o, u, v) in &faces {
        for c in [*o, o + u, o + v, o + u + v] {
            if !corners.iter().any(|q| (q - c).norm() < 1e-12) {
                corners.push(c);
            }
        }
    }
    corners.truncate(n);
    let fixed = corners.len();
    let points = corners
        .into_iter()
        .chain((fixed..n).map(|_| {
            let mut pick = rng.random::<f64>() * total;
            let mut idx = faces.len() - 1;
            for (i, a) in areas.iter().enumerate() {
                if pick < *a {
                    idx = i;
                    break;
                }
                pick -= a;
            }
            let (o, u, v) = faces[idx];
            o + u * rng.random::<f64>() + v * rng.random::<f64>()
        }))
        .collect();
    PartGeometry {
        id: 0,
        points,
        area_weights: vec![1.0 / n as f64; n],
    }
}

/// Builds a deterministic articulated instance of `category`.
pub fn make_procedural_model(category: Category, seed: u64, params: &ShapeParams) -> Result<KinematicModel<f64>> {
    if params.samples_per_part < MIN_PART_POINTS {
        return Err(Error::InvalidConfig(format!(
            "samples_per_part must be at least {MIN_PART_POINTS}"
        )));
    }
    let [s_lo, s_hi] = params.scale_range;
    if !(s_lo > 0.0 && s_lo <= s_hi) || !(0.0..0.9).contains(&params.size_jitter) {
        return Err(Error::InvalidConfig("invalid shape parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = if s_lo == s_hi {
        s_lo
    } else {
        rng.random_range(s_lo..s_hi)
    };
    let jitter = params.size_jitter;
    let mut dim = |nominal: f64| {
        let j = if jitter > 0.0 {
            rng.random_range(-jitter..jitter)
        } else {
            0.0
        };
        nominal * (1.0 + j) * scale
    };

    let (surfaces, joints): (Vec<Vec<BoxSurface>>, Vec<Joint<f64>>) = match category {
        Category::TwoPartRevolute => {
            let (w, d, h, t) = (dim(1.0), dim(0.7), dim(0.05), dim(0.04));
            let base = BoxSurface::closed(Vector3::new(-w / 2.0, -d / 2.0, 0.0), Vector3::new(w / 2.0, d / 2.0, h));
            let lid = BoxSurface::closed(
                Vector3::new(-w / 2.0, d / 2.0 - t, h),
                Vector3::new(w / 2.0, d / 2.0, h + d),
            );
            let hinge = Joint {
                id: 0,
                joint_type: JointType::Revolute,
                parent: 0,
                child: 1,
                axis: -Vector3::x(),
                pivot: Some(Vector3::new(0.0, d / 2.0 - t / 2.0, h)),
                range: [40f64.to_radians(), 140f64.to_radians()],
                rest_state: PI / 2.0,
            };
            (vec![vec![base], vec![lid]], vec![hinge])
        }
        Category::EyeglassesLike => {
            let (w, t, h) = (dim(1.4), dim(0.06), dim(0.4));
            let (tw, tl, th) = (dim(0.05), dim(1.3), dim(0.06));
            let frame = BoxSurface::closed(
                Vector3::new(-w / 2.0, -t / 2.0, -h / 2.0),
                Vector3::new(w / 2.0, t / 2.0, h / 2.0),
            );
            let z0 = h / 2.0 - 2.0 * th;
            let left = BoxSurface::closed(
                Vector3::new(-w / 2.0, t / 2.0, z0),
                Vector3::new(-w / 2.0 + tw, t / 2.0 + tl, z0 + th),
            );
            let right = BoxSurface::closed(
                Vector3::new(w / 2.0 - tw, t / 2.0, z0),
                Vector3::new(w / 2.0, t / 2.0 + tl, z0 + th),
            );
            let hinge = |id: usize, x: f64, up: f64| Joint {
                id,
                joint_type: JointType::Revolute,
                parent: 0,
                child: id + 1,
                axis: Vector3::z() * up,
                pivot: Some(Vector3::new(x, t / 2.0, 0.0)),
                range: [30f64.to_radians(), 100f64.to_radians()],
                rest_state: PI / 2.0,
            };
            (
                vec![vec![frame], vec![left], vec![right]],
                vec![hinge(0, -w / 2.0 + tw / 2.0, 1.0), hinge(1, w / 2.0 - tw / 2.0, -1.0)],
            )
        }
        Category::DrawerLike => {
            let (w, d, h) = (dim(0.8), dim(0.6), dim(0.9));
            let gap = 0.02 * scale;
            let cabinet = BoxSurface {
                min: Vector3::new(-w / 2.0, -d / 2.0, 0.0),
                max: Vector3::new(w / 2.0, d / 2.0, h),
                faces: [true, true, false, true, true, true],
            };
            let dh = (h - 4.0 * gap) / 3.0;
            let mut parts = vec![vec![cabinet]];
            let mut joints = Vec::new();
            for i in 0..3 {
                let z = gap + i as f64 * (dh + gap);
                parts.push(vec![BoxSurface {
                    min: Vector3::new(-w / 2.0 + gap, -d / 2.0, z),
                    max: Vector3::new(w / 2.0 - gap, d / 2.0 - gap, z + dh),
                    faces: [true, true, true, true, true, false],
                }]);
                joints.push(Joint {
                    id: i,
                    joint_type: JointType::Prismatic,
                    parent: 0,
                    child: i + 1,
                    axis: -Vector3::y(),
                    pivot: None,
                    range: [0.0, 0.5 * d],
                    rest_state: 0.0,
                });
            }
            (parts, joints)
        }
    };

    let parts = surfaces
        .iter()
        .enumerate()
        .map(|(id, s)| {
            let mut part = sample_surfaces(&mut rng, s, params.samples_per_part);
            part.id = id;
            part
        })
        .collect();
    let model = KinematicModel {
        category_name: category.name().to_string(),
        root_part: 0,
        parts,
        joints,
    };
    model.validate()?;
    Ok(model)
}
