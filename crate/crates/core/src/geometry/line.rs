use nalgebra::{Unit, Vector3};

use crate::scalar::Real;

/// Infinite line through `point` along a unit `direction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line3<T: Real> {
    pub point: Vector3<T>,
    pub direction: Unit<Vector3<T>>,
}

impl<T: Real> Line3<T> {
    pub fn new(point: Vector3<T>, direction: Vector3<T>) -> Self {
        Self {
            point,
            direction: Unit::new_normalize(direction),
        }
    }

    /// Orthogonal projection of `p` onto the line.
    pub fn project(&self, p: &Vector3<T>) -> Vector3<T> {
        let d = self.direction.into_inner();
        self.point + d * (p - self.point).dot(&d)
    }

    pub fn distance_to_point(&self, p: &Vector3<T>) -> T {
        (p - self.point).cross(&self.direction).norm()
    }
}

/// Minimum distance between two infinite lines.
///
/// Lines whose direction cross product has norm below `1e-9` are treated as
/// parallel and measured point-to-line.
pub fn line_to_line_distance<T: Real>(a: &Line3<T>, b: &Line3<T>) -> T {
    let cross = a.direction.cross(&b.direction);
    let n = cross.norm();
    let offset = b.point - a.point;
    if n < T::lit(1e-9) {
        offset.cross(&a.direction).norm()
    } else {
        (offset.dot(&cross) / n).abs()
    }
}

/// Angle between two directions in degrees.
///
/// With `oriented == false` the directions are treated as undirected axes and
/// the result lies in `[0°, 90°]`.
pub fn axis_angle_deg<T: Real>(a: &Vector3<T>, b: &Vector3<T>, oriented: bool) -> T {
    let cross = a.cross(b).norm();
    let dot = a.dot(b);
    let dot = if oriented { dot } else { dot.abs() };
    cross.atan2(dot).degrees()
}
