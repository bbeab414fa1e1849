use nalgebra::{Matrix3, Rotation3, Vector3};

use super::Similarity;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Least-squares similarity (or rigid, when `with_scale` is false) transform
/// mapping `src` onto `dst`.
///
/// Closed form from the SVD of the cross-covariance. A reflection is avoided
/// by negating the smallest singular direction when `det(U)·det(V) < 0`.
pub fn umeyama_fit<T: Real>(src: &[Vector3<T>], dst: &[Vector3<T>], with_scale: bool) -> Result<Similarity<T>> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch(format!(
            "umeyama: {} source vs {} target points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::TooFewPoints(src.len()));
    }
    let n = T::from_usize(src.len()).unwrap();
    let mean_src = src.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mean_dst = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / n;

    let mut cov = Matrix3::zeros();
    let mut var_src = T::zero();
    for (s, d) in src.iter().zip(dst) {
        let cs = s - mean_src;
        let cd = d - mean_dst;
        cov += cd * cs.transpose();
        var_src += cs.norm_squared();
    }
    cov /= n;
    var_src /= n;

    let svd = cov.svd(true, true);
    let sv = svd.singular_values;
    let (mut max_i, mut min_i) = (0, 0);
    for i in 1..3 {
        if sv[i] > sv[max_i] {
            max_i = i;
        }
        if sv[i] < sv[min_i] {
            min_i = i;
        }
    }
    let mid = sv[0] + sv[1] + sv[2] - sv[max_i] - sv[min_i];
    let rank_tol = T::default_epsilon() * T::lit(1e3);
    if !(sv[max_i] > T::zero()) || mid <= sv[max_i] * rank_tol || !(var_src > T::zero()) {
        return Err(Error::DegenerateInput(
            "correspondences are collinear or coincident".into(),
        ));
    }

    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut signs = Vector3::repeat(T::one());
    if u.determinant() * v_t.determinant() < T::zero() {
        signs[min_i] = -T::one();
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = if with_scale {
        sv.component_mul(&signs).sum() / var_src
    } else {
        T::one()
    };
    let rotation = Rotation3::from_matrix_unchecked(rotation);
    let translation = mean_dst - rotation * mean_src * scale;
    Ok(Similarity::new(scale, rotation, translation))
}
