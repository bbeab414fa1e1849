//! Geometric kernels shared by every stage of the pipeline.
//!
//! Everything here is generic over [`Real`] so the kernels run in `f32` as
//! well as `f64`; the rest of the crate instantiates them at `f64`.

mod line;
pub(crate) mod obb;
mod umeyama;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Real;

pub use line::{axis_angle_deg, line_to_line_distance, Line3};
pub use obb::{box_iou_3d, OrientedBox};
pub use umeyama::umeyama_fit;

/// Rotation matrix (orthonormal, determinant +1).
pub type Rotation<T> = Rotation3<T>;

/// Uniform scale, rotation and translation: `x ↦ s·R·x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity<T: Real> {
    pub scale: T,
    pub rotation: Rotation<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Similarity<T> {
    pub fn new(scale: T, rotation: Rotation<T>, translation: Vector3<T>) -> Self {
        Self {
            scale,
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), Rotation3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self::new(T::one(), Rotation3::identity(), translation)
    }

    pub fn from_rotation(rotation: Rotation<T>) -> Self {
        Self::new(T::one(), rotation, Vector3::zeros())
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p * self.scale + self.translation
    }

    /// Applies only the linear part (`s·R·v`).
    #[inline]
    pub fn apply_vector(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * v * self.scale
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.scale * other.scale,
            self.rotation * other.rotation,
            self.apply(&other.translation),
        )
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        let inv_scale = T::one() / self.scale;
        Self::new(inv_scale, inv_rot, -(inv_rot * self.translation) * inv_scale)
    }

    /// Largest point displacement between `self` and `other` over `points`.
    pub fn max_deviation(&self, other: &Self, points: &[Vector3<T>]) -> T {
        points.iter().fold(T::zero(), |acc, p| {
            let d = (self.apply(p) - other.apply(p)).norm();
            if d > acc {
                d
            } else {
                acc
            }
        })
    }
}

/// Row-major wire form used by the JSON file formats.
#[derive(Serialize, Deserialize)]
struct SimilarityRepr<T> {
    scale: T,
    rotation: [[T; 3]; 3],
    translation: [T; 3],
}

impl<T: Real + Serialize> Serialize for Similarity<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let m = self.rotation.matrix();
        let rotation = [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ];
        SimilarityRepr {
            scale: self.scale,
            rotation,
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Similarity<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SimilarityRepr::<T>::deserialize(deserializer)?;
        let r = repr.rotation;
        let m = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        if !(repr.scale > T::zero()) {
            return Err(serde::de::Error::custom("similarity scale must be positive"));
        }
        Ok(Similarity::new(
            repr.scale,
            Rotation3::from_matrix_unchecked(m),
            Vector3::from(repr.translation),
        ))
    }
}

/// Cross-product matrix: `skew(v) * w == v × w`.
pub fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(T::zero(), -v.z, v.y, v.z, T::zero(), -v.x, -v.y, v.x, T::zero())
}

/// Rotation by `angle` radians about `axis` (right-hand rule).
pub fn rotation_about<T: Real>(axis: &Unit<Vector3<T>>, angle: T) -> Rotation<T> {
    Rotation3::from_axis_angle(axis, angle)
}

/// Exponential map of an axis-angle vector.
pub fn exp_so3<T: Real>(omega: &Vector3<T>) -> Rotation<T> {
    Rotation3::new(*omega)
}

/// Relative rotation angle between `r1` and `r2`, in radians, in `[0, π]`.
///
/// Evaluated as `atan2(sin, cos)` of the relative rotation so small angles
/// keep full precision; the cosine term is clamped to `[-1, 1]`.
pub fn rotation_geodesic<T: Real>(r1: &Rotation<T>, r2: &Rotation<T>) -> T {
    let rel = r2.matrix() * r1.matrix().transpose();
    let one = T::one();
    let two = T::lit(2.0);
    let cos = ((rel.trace() - one) / two).clamp(-one, one);
    let vee = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let sin = (vee.norm() / two).min(one);
    sin.atan2(cos)
}

/// [`rotation_geodesic`] in degrees.
pub fn rotation_geodesic_deg<T: Real>(r1: &Rotation<T>, r2: &Rotation<T>) -> T {
    rotation_geodesic(r1, r2).degrees()
}

/// Projects an arbitrary 3×3 matrix onto the nearest rotation.
pub fn nearest_rotation<T: Real>(m: &Matrix3<T>) -> Rotation<T> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < T::zero() {
        s[(2, 2)] = -T::one();
    }
    Rotation3::from_matrix_unchecked(u * s * v_t)
}

/// Tight axis-aligned bounds `(min, max)` of a point set.
pub fn bounds<T: Real>(points: &[Vector3<T>]) -> Option<(Vector3<T>, Vector3<T>)> {
    let first = points.first()?;
    Some(
        points
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rz(deg: f64) -> Rotation<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), deg.to_radians())
    }

    pub(crate) fn random_rotation(rng: &mut impl Rng) -> Rotation<f64> {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        exp_so3(&(v * 3.0))
    }

    #[test]
    fn geodesic_examples() {
        let id = Rotation3::<f64>::identity();
        assert_eq!(rotation_geodesic_deg(&id, &id), 0.0);
        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), 37f64.to_radians());
        assert_relative_eq!(rotation_geodesic_deg(&id, &rx), 37.0, epsilon = 1e-12);
        assert_relative_eq!(rotation_geodesic_deg(&rz(10.0), &rz(190.0)), 180.0, epsilon = 1e-9);
    }

    #[test]
    fn geodesic_is_symmetric_and_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (a, b, c) = (
                random_rotation(&mut rng),
                random_rotation(&mut rng),
                random_rotation(&mut rng),
            );
            let ab = rotation_geodesic_deg(&a, &b);
            assert_relative_eq!(ab, rotation_geodesic_deg(&b, &a), epsilon = 1e-9);
            assert!((0.0..=180.0).contains(&ab));
            let ac = rotation_geodesic_deg(&a, &c);
            let cb = rotation_geodesic_deg(&c, &b);
            assert!(ab <= ac + cb + 1e-9);
        }
    }

    #[test]
    fn geodesic_small_angles_keep_precision() {
        let a = rz(1e-10);
        let d = rotation_geodesic_deg(&Rotation3::identity(), &a);
        assert_relative_eq!(d, 1e-10, max_relative = 1e-6);
    }

    #[test]
    fn geodesic_f32() {
        let id = Rotation3::<f32>::identity();
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.5f32);
        assert!((rotation_geodesic(&id, &r) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn skew_examples() {
        assert_eq!(skew(&Vector3::<f64>::zeros()), Matrix3::zeros());
        assert_eq!(
            skew(&Vector3::new(1.0, 0.0, 0.0)) * Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let v: Vector3<f64> = Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0));
            let w: Vector3<f64> = Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0));
            // component formula
            let cross = Vector3::new(v.y * w.z - v.z * w.y, v.z * w.x - v.x * w.z, v.x * w.y - v.y * w.x);
            assert!((skew(&v) * w - cross).norm() < 1e-12);
            let s = skew(&v);
            assert_eq!(s, -s.transpose());
        }
    }

    #[test]
    fn similarity_compose_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Similarity::new(1.7, random_rotation(&mut rng), Vector3::new(0.1, -2.0, 3.0));
        let b = Similarity::new(0.4, random_rotation(&mut rng), Vector3::new(1.0, 0.5, -0.3));
        let p = Vector3::new(0.3, 0.2, -0.9);
        assert_relative_eq!(a.compose(&b).apply(&p), a.apply(&b.apply(&p)), epsilon = 1e-12);
        assert_relative_eq!(a.inverse().apply(&a.apply(&p)), p, epsilon = 1e-12);
    }

    #[test]
    fn similarity_json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Similarity::new(1.234567891234, random_rotation(&mut rng), Vector3::new(0.1, 0.2, 0.3));
        let text = serde_json::to_string(&a).unwrap();
        let b: Similarity<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(a, b);
    }
}
