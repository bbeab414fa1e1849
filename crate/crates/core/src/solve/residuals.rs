//! Residual blocks of the pose energies with analytic Jacobians.
//!
//! Each part contributes six parameters `[ω, τ]`: a rotation increment
//! applied on the left, `R ← exp(ω)·R`, and a translation increment
//! `t ← t + τ`. Jacobians are with respect to those increments at zero.
//! Blocks touching two parts order the columns `[ω1, τ1, ω2, τ2]`.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::geometry::{skew, Rotation, Similarity};

pub type Jac3x6 = SMatrix<f64, 3, 6>;
pub type Jac3x12 = SMatrix<f64, 3, 12>;
pub type Jac6x12 = SMatrix<f64, 6, 12>;
pub type Jac9x12 = SMatrix<f64, 9, 12>;

/// `(s·R·c + t − p)·w` for one correspondence.
pub fn data_block(pose: &Similarity<f64>, c: &Vector3<f64>, p: &Vector3<f64>, w: f64) -> (Vector3<f64>, Jac3x6) {
    let rc = pose.rotation * c;
    let r = (rc * pose.scale + pose.translation - p) * w;
    let mut j = Jac3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(skew(&rc) * (-pose.scale * w)));
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Matrix3::identity() * w));
    (r, j)
}

/// `R1·u′ − R2·u′`: zero when both parts map the joint axis alike.
pub fn revolute_block(r1: &Rotation<f64>, r2: &Rotation<f64>, axis: &Vector3<f64>) -> (Vector3<f64>, Jac3x12) {
    let (a1, a2) = (r1 * axis, r2 * axis);
    let mut j = Jac3x12::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&-skew(&a1));
    j.fixed_view_mut::<3, 3>(0, 6).copy_from(&skew(&a2));
    (a1 - a2, j)
}

/// Entries of `R1·R2ᵀ − I`, column-major.
pub fn prismatic_identity_block(r1: &Rotation<f64>, r2: &Rotation<f64>) -> (SVector<f64, 9>, Jac9x12) {
    let m = r1.matrix() * r2.matrix().transpose();
    let r = SVector::<f64, 9>::from_column_slice((m - Matrix3::identity()).as_slice());
    let mut j = Jac9x12::zeros();
    for k in 0..3 {
        let e = skew(&Vector3::ith(k, 1.0));
        let d1 = e * m;
        let d2 = -(m * e);
        j.fixed_view_mut::<9, 1>(0, k).copy_from_slice(d1.as_slice());
        j.fixed_view_mut::<9, 1>(0, 6 + k).copy_from_slice(d2.as_slice());
    }
    (r, j)
}

/// Camera-space offset between the images of the NAOCS origin under the
/// two part poses, `t2 − t1 + k1·R1·Gt1 − k2·R2·Gt2` with `k = s / G_s`.
pub fn prismatic_delta(
    p1: &Similarity<f64>,
    p2: &Similarity<f64>,
    g1: (f64, &Vector3<f64>),
    g2: (f64, &Vector3<f64>),
) -> Vector3<f64> {
    let (k1, k2) = (p1.scale / g1.0, p2.scale / g2.0);
    p2.translation - p1.translation + p1.rotation * g1.1 * k1 - p2.rotation * g2.1 * k2
}

/// `[(R1·u′) × δ, (R2·u′) × δ]`: zero when the parts are offset only along
/// the axis.
pub fn prismatic_cross_block(
    p1: &Similarity<f64>,
    p2: &Similarity<f64>,
    g1: (f64, &Vector3<f64>),
    g2: (f64, &Vector3<f64>),
    axis: &Vector3<f64>,
) -> (SVector<f64, 6>, Jac6x12) {
    let (k1, k2) = (p1.scale / g1.0, p2.scale / g2.0);
    let delta = prismatic_delta(p1, p2, g1, g2);
    // dδ/d[ω1 τ1 ω2 τ2]
    let mut dd = Jac3x12::zeros();
    dd.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(skew(&(p1.rotation * g1.1)) * -k1));
    dd.fixed_view_mut::<3, 3>(0, 3).copy_from(&-Matrix3::identity());
    dd.fixed_view_mut::<3, 3>(0, 6)
        .copy_from(&(skew(&(p2.rotation * g2.1)) * k2));
    dd.fixed_view_mut::<3, 3>(0, 9).copy_from(&Matrix3::identity());

    let mut r = SVector::<f64, 6>::zeros();
    let mut j = Jac6x12::zeros();
    for (side, rot) in [p1.rotation, p2.rotation].iter().enumerate() {
        let a = rot * axis;
        r.fixed_rows_mut::<3>(3 * side).copy_from(&a.cross(&delta));
        let mut block = skew(&a) * dd;
        // a only moves with its own part's rotation: d(a×δ)/dω = [δ]×[a]×
        let own = skew(&delta) * skew(&a);
        let mut cols = block.fixed_view_mut::<3, 3>(0, 6 * side);
        cols += own;
        j.fixed_view_mut::<3, 12>(3 * side, 0).copy_from(&block);
    }
    (r, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::exp_so3;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut impl Rng) -> Similarity<f64> {
        Similarity::new(
            rng.random_range(0.3..2.0),
            Rotation::new(Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0))),
            Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
        )
    }

    fn rand_vec(rng: &mut impl Rng) -> Vector3<f64> {
        Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0))
    }

    fn perturb(pose: &Similarity<f64>, x: &[f64]) -> Similarity<f64> {
        let w = Vector3::new(x[0], x[1], x[2]);
        let t = Vector3::new(x[3], x[4], x[5]);
        Similarity::new(pose.scale, exp_so3(&w) * pose.rotation, pose.translation + t)
    }

    /// Central differences of `f` around zero over `cols` parameters.
    fn numeric(f: impl Fn(&[f64]) -> DVector<f64>, cols: usize) -> DMatrix<f64> {
        let h = 1e-6;
        let rows = f(&vec![0.0; cols]).len();
        let mut out = DMatrix::zeros(rows, cols);
        for c in 0..cols {
            let mut xp = vec![0.0; cols];
            let mut xm = vec![0.0; cols];
            xp[c] = h;
            xm[c] = -h;
            out.set_column(c, &((f(&xp) - f(&xm)) / (2.0 * h)));
        }
        out
    }

    fn assert_close(analytic: DMatrix<f64>, fd: DMatrix<f64>) {
        let scale = fd.amax().max(1.0);
        let err = (analytic - &fd).amax() / scale;
        assert!(err < 1e-5, "relative jacobian error {err}");
    }

    #[test]
    fn data_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let pose = random_pose(&mut rng);
            let (c, p) = (rand_vec(&mut rng), rand_vec(&mut rng));
            let w = rng.random_range(0.01..1.0);
            let (_, j) = data_block(&pose, &c, &p, w);
            let fd = numeric(
                |x| DVector::from_column_slice(data_block(&perturb(&pose, x), &c, &p, w).0.as_slice()),
                6,
            );
            assert_close(DMatrix::from_column_slice(3, 6, j.as_slice()), fd);
        }
    }

    #[test]
    fn revolute_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (p1, p2) = (random_pose(&mut rng), random_pose(&mut rng));
            let u = rand_vec(&mut rng).normalize();
            let (_, j) = revolute_block(&p1.rotation, &p2.rotation, &u);
            let fd = numeric(
                |x| {
                    let (a, b) = (perturb(&p1, &x[..6]), perturb(&p2, &x[6..]));
                    DVector::from_column_slice(revolute_block(&a.rotation, &b.rotation, &u).0.as_slice())
                },
                12,
            );
            assert_close(DMatrix::from_column_slice(3, 12, j.as_slice()), fd);
        }
    }

    #[test]
    fn prismatic_identity_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (p1, p2) = (random_pose(&mut rng), random_pose(&mut rng));
            let (_, j) = prismatic_identity_block(&p1.rotation, &p2.rotation);
            let fd = numeric(
                |x| {
                    let (a, b) = (perturb(&p1, &x[..6]), perturb(&p2, &x[6..]));
                    DVector::from_column_slice(prismatic_identity_block(&a.rotation, &b.rotation).0.as_slice())
                },
                12,
            );
            assert_close(DMatrix::from_column_slice(9, 12, j.as_slice()), fd);
        }
    }

    #[test]
    fn prismatic_cross_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (p1, p2) = (random_pose(&mut rng), random_pose(&mut rng));
            let (gs1, gs2) = (rng.random_range(0.2..1.0), rng.random_range(0.2..1.0));
            let (gt1, gt2) = (rand_vec(&mut rng), rand_vec(&mut rng));
            let u = rand_vec(&mut rng).normalize();
            let (_, j) = prismatic_cross_block(&p1, &p2, (gs1, &gt1), (gs2, &gt2), &u);
            let fd = numeric(
                |x| {
                    let (a, b) = (perturb(&p1, &x[..6]), perturb(&p2, &x[6..]));
                    DVector::from_column_slice(prismatic_cross_block(&a, &b, (gs1, &gt1), (gs2, &gt2), &u).0.as_slice())
                },
                12,
            );
            assert_close(DMatrix::from_column_slice(6, 12, j.as_slice()), fd);
        }
    }

    #[test]
    fn revolute_zero_on_rotations_about_the_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r1 = random_pose(&mut rng).rotation;
        let u = rand_vec(&mut rng).normalize();
        for _ in 0..20 {
            let angle = rng.random_range(-3.1..3.1);
            let r2 = r1 * crate::geometry::rotation_about(&nalgebra::Unit::new_normalize(u), angle);
            let (r, _) = revolute_block(&r1, &r2, &u);
            assert!(r.norm() < 1e-14);
        }
    }

    #[test]
    fn perpendicular_offset_gives_two_d_squared() {
        let u = Vector3::new(0.0, 0.0, 1.0);
        let d = 0.37;
        let p1 = Similarity::identity();
        let p2 = Similarity::from_translation(Vector3::new(d, 0.0, 0.0));
        let g = (1.0, &Vector3::zeros());
        let (r, _) = prismatic_cross_block(&p1, &p2, g, g, &u);
        assert!((r.norm_squared() - 2.0 * d * d).abs() < 1e-15);
        let along = Similarity::from_translation(Vector3::new(0.0, 0.0, 0.8));
        assert_eq!(prismatic_cross_block(&p1, &along, g, g, &u).0.norm(), 0.0);
        assert_eq!(prismatic_identity_block(&p1.rotation, &along.rotation).0.norm(), 0.0);
    }
}
