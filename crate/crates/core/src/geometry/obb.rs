use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Rotation;
use crate::scalar::Real;

/// Box with arbitrary orientation: the local axes are the columns of
/// `rotation`, with half-lengths `half_extents` along each.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox<T: Real> {
    pub center: Vector3<T>,
    pub rotation: Rotation<T>,
    pub half_extents: Vector3<T>,
}

/// Plane `normal · x = offset` with `normal` pointing out of the box.
#[derive(Clone, Copy)]
struct Face<T: Real> {
    normal: Vector3<T>,
    offset: T,
}

impl<T: Real> OrientedBox<T> {
    pub fn new(center: Vector3<T>, rotation: Rotation<T>, half_extents: Vector3<T>) -> Self {
        Self {
            center,
            rotation,
            half_extents,
        }
    }

    pub fn axis_aligned(min: Vector3<T>, max: Vector3<T>) -> Self {
        let half = T::lit(0.5);
        Self::new((min + max) * half, Rotation::identity(), (max - min) * half)
    }

    pub fn volume(&self) -> T {
        T::lit(8.0) * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn contains(&self, p: &Vector3<T>) -> bool {
        let local = self.rotation.inverse() * (p - self.center);
        (0..3).all(|i| local[i].abs() <= self.half_extents[i])
    }

    pub fn corners(&self) -> [Vector3<T>; 8] {
        let axes = self.scaled_axes();
        std::array::from_fn(|i| {
            let sx = if i & 1 == 0 { -T::one() } else { T::one() };
            let sy = if i & 2 == 0 { -T::one() } else { T::one() };
            let sz = if i & 4 == 0 { -T::one() } else { T::one() };
            self.center + axes[0] * sx + axes[1] * sy + axes[2] * sz
        })
    }

    fn scaled_axes(&self) -> [Vector3<T>; 3] {
        let m = self.rotation.matrix();
        std::array::from_fn(|i| m.column(i) * self.half_extents[i])
    }

    fn faces(&self) -> [Face<T>; 6] {
        let m = self.rotation.matrix();
        std::array::from_fn(|f| {
            let axis = f / 2;
            let sign = if f % 2 == 0 { T::one() } else { -T::one() };
            let normal: Vector3<T> = m.column(axis) * sign;
            Face {
                normal,
                offset: normal.dot(&self.center) + self.half_extents[axis],
            }
        })
    }

    /// Face polygons, counter-clockwise seen from outside.
    fn face_polygons(&self) -> [(Face<T>, Vec<Vector3<T>>); 6] {
        let axes = self.scaled_axes();
        let faces = self.faces();
        std::array::from_fn(|f| {
            let a = f / 2;
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let sign = if f % 2 == 0 { T::one() } else { -T::one() };
            let fc = self.center + axes[a] * sign;
            let one = T::one();
            let mut poly: Vec<_> = [(one, one), (-one, one), (-one, -one), (one, -one)]
                .iter()
                .map(|&(u, v)| fc + axes[b] * u + axes[c] * v)
                .collect();
            if sign < T::zero() {
                poly.reverse();
            }
            (faces[f], poly)
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BoxRepr<T> {
    center: [T; 3],
    rotation: [[T; 3]; 3],
    half_extents: [T; 3],
}

impl<T: Real + Serialize> Serialize for OrientedBox<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let m = self.rotation.matrix();
        BoxRepr {
            center: self.center.into(),
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
            half_extents: self.half_extents.into(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for OrientedBox<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = BoxRepr::<T>::deserialize(deserializer)?;
        let m = Matrix3::from_fn(|i, j| repr.rotation[i][j]);
        if repr.half_extents.iter().any(|h| *h < T::zero()) {
            return Err(serde::de::Error::custom("box half extents must be nonnegative"));
        }
        Ok(OrientedBox::new(
            Vector3::from(repr.center),
            Rotation::from_matrix_unchecked(m),
            Vector3::from(repr.half_extents),
        ))
    }
}

/// Sutherland–Hodgman clip of a planar polygon against `normal · x <= offset`.
fn clip<T: Real>(poly: &[Vector3<T>], face: &Face<T>, eps: T) -> Vec<Vector3<T>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let Some(mut prev) = poly.last() else {
        return out;
    };
    let mut prev_d = face.normal.dot(prev) - face.offset;
    for cur in poly {
        let cur_d = face.normal.dot(cur) - face.offset;
        let cur_in = cur_d <= eps;
        let prev_in = prev_d <= eps;
        if cur_in != prev_in {
            let t = prev_d / (prev_d - cur_d);
            out.push(prev + (cur - prev) * t);
        }
        if cur_in {
            out.push(*cur);
        }
        prev = cur;
        prev_d = cur_d;
    }
    out
}

/// Signed volume enclosed by outward-oriented polygons, relative to `origin`.
fn enclosed_volume<T: Real>(polys: &[Vec<Vector3<T>>], origin: &Vector3<T>) -> T {
    let mut six_v = T::zero();
    for poly in polys.iter().filter(|p| p.len() >= 3) {
        let v0 = poly[0] - origin;
        for w in poly[1..].windows(2) {
            let (v1, v2) = (w[0] - origin, w[1] - origin);
            six_v += v0.dot(&v1.cross(&v2));
        }
    }
    six_v / T::lit(6.0)
}

/// Volume of the intersection of two oriented boxes.
///
/// The intersection polytope is bounded by the parts of each box's faces
/// that lie inside the other box; its volume follows from the divergence
/// theorem over those clipped polygons. Coplanar faces with the same outward
/// normal are counted once.
pub fn intersection_volume<T: Real>(a: &OrientedBox<T>, b: &OrientedBox<T>) -> T {
    let scale = a.half_extents.max().max(b.half_extents.max());
    let eps = scale * T::lit(1e-12);
    let faces_a = a.faces();
    let faces_b = b.faces();
    let mut polys = Vec::with_capacity(12);

    let mut clip_all = |poly: Vec<Vector3<T>>, others: &[Face<T>; 6]| {
        let mut p = poly;
        for f in others {
            p = clip(&p, f, eps);
            if p.len() < 3 {
                return;
            }
        }
        polys.push(p);
    };

    for (_, poly) in a.face_polygons() {
        clip_all(poly, &faces_b);
    }
    for (face, poly) in b.face_polygons() {
        let duplicate = faces_a
            .iter()
            .any(|fa| fa.normal.dot(&face.normal) > T::one() - T::lit(1e-12) && (fa.offset - face.offset).abs() <= eps);
        if !duplicate {
            clip_all(poly, &faces_a);
        }
    }
    enclosed_volume(&polys, &a.center).max(T::zero())
}

/// Exact 3D intersection-over-union of two oriented boxes.
pub fn box_iou_3d<T: Real>(a: &OrientedBox<T>, b: &OrientedBox<T>) -> T {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).clamp(T::zero(), T::one())
}
