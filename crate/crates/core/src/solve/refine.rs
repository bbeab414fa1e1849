use nalgebra::{DMatrix, DVector, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use super::residuals::{data_block, prismatic_cross_block, prismatic_identity_block, revolute_block};
use super::{energy_constrained, ConstraintWeights, Correspondences, JointConstraint, PoseEstimate};
use crate::canonical::PartScaling;
use crate::error::{Error, Result};
use crate::geometry::{exp_so3, Similarity};
use crate::kinematics::JointType;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub relative_decrease_tol: f64,
    pub initial_damping: f64,
    pub max_damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tol: 1e-10,
            relative_decrease_tol: 1e-12,
            initial_damping: 1e-4,
            max_damping: 1e12,
        }
    }
}

/// Accumulates `JᵀJ` and `Jᵀr` over residual blocks. `slot[j]` is the
/// column offset of part `j`, or `None` for a part held fixed.
struct Normal<'a> {
    slot: &'a [Option<usize>],
    jtj: DMatrix<f64>,
    jtr: DVector<f64>,
}

impl Normal<'_> {
    fn add<const R: usize, const C: usize>(&mut self, parts: &[usize], r: &SMatrix<f64, R, 1>, j: &SMatrix<f64, R, C>) {
        for (a, &pa) in parts.iter().enumerate() {
            let Some(oa) = self.slot[pa] else { continue };
            let ja = j.fixed_view::<R, 6>(0, 6 * a);
            let g = ja.transpose() * r;
            let mut dst = self.jtr.fixed_rows_mut::<6>(oa);
            dst += g;
            for (b, &pb) in parts.iter().enumerate() {
                let Some(ob) = self.slot[pb] else { continue };
                let jb = j.fixed_view::<R, 6>(0, 6 * b);
                let h = ja.transpose() * jb;
                let mut dst = self.jtj.fixed_view_mut::<6, 6>(oa, ob);
                dst += h;
            }
        }
    }
}

struct Problem<'a> {
    parts: Vec<Correspondences>,
    joints: &'a [JointConstraint],
    g: &'a [PartScaling],
    weights: ConstraintWeights,
    slot: Vec<Option<usize>>,
    dim: usize,
}

impl Problem<'_> {
    fn energy(&self, poses: &[Similarity<f64>]) -> f64 {
        energy_constrained(poses, &self.parts, self.joints, self.g, &self.weights)
    }

    fn normal_equations(&self, poses: &[Similarity<f64>]) -> (DMatrix<f64>, DVector<f64>) {
        let mut ne = Normal {
            slot: &self.slot,
            jtj: DMatrix::zeros(self.dim, self.dim),
            jtr: DVector::zeros(self.dim),
        };
        for (j, part) in self.parts.iter().enumerate() {
            if self.slot[j].is_none() || part.is_empty() {
                continue;
            }
            let w = 1.0 / (part.len() as f64).sqrt();
            for (c, p) in part.npcs.iter().zip(&part.points) {
                let (r, jac) = data_block(&poses[j], c, p, w);
                ne.add(&[j], &r, &jac);
            }
        }
        let (lambda, mu) = (self.weights.lambda, self.weights.mu);
        if lambda == 0.0 {
            return (ne.jtj, ne.jtr);
        }
        let wl = lambda.sqrt();
        for joint in self.joints {
            let pair = [joint.parent, joint.child];
            let (p1, p2) = (&poses[joint.parent], &poses[joint.child]);
            match joint.joint_type {
                JointType::Revolute => {
                    let (r, jac) = revolute_block(&p1.rotation, &p2.rotation, &joint.axis);
                    ne.add(&pair, &(r * wl), &(jac * wl));
                }
                JointType::Prismatic => {
                    let wm = (lambda * mu).sqrt();
                    let (r, jac) = prismatic_identity_block(&p1.rotation, &p2.rotation);
                    ne.add(&pair, &(r * wm), &(jac * wm));
                    let (g1, g2) = (&self.g[joint.parent], &self.g[joint.child]);
                    let (r, jac) = prismatic_cross_block(
                        p1,
                        p2,
                        (g1.g_scale, &g1.g_offset),
                        (g2.g_scale, &g2.g_offset),
                        &joint.axis,
                    );
                    ne.add(&pair, &(r * wl), &(jac * wl));
                }
            }
        }
        (ne.jtj, ne.jtr)
    }

    fn step(&self, poses: &[Similarity<f64>], delta: &DVector<f64>) -> Vec<Similarity<f64>> {
        poses
            .iter()
            .zip(&self.slot)
            .map(|(p, slot)| match slot {
                None => *p,
                Some(o) => {
                    let w = Vector3::new(delta[*o], delta[o + 1], delta[o + 2]);
                    let t = Vector3::new(delta[o + 3], delta[o + 4], delta[o + 5]);
                    Similarity::new(p.scale, exp_so3(&w) * p.rotation, p.translation + t)
                }
            })
            .collect()
    }
}

/// Levenberg–Marquardt refinement of rotations and translations under
/// `E_constrained`, with scales fixed and data terms on inliers only.
///
/// Parts with fewer than three inliers keep their initial pose. A step is
/// accepted only if it lowers the energy, so the result never scores worse
/// than `init`.
pub fn refine_constrained(
    init: &PoseEstimate,
    parts: &[Correspondences],
    joints: &[JointConstraint],
    g: &[PartScaling],
    weights: &ConstraintWeights,
    cfg: &SolverConfig,
) -> Result<PoseEstimate> {
    let m = init.poses.len();
    if parts.len() != m || init.inliers.len() != m || g.len() != m {
        return Err(Error::CountMismatch(format!(
            "{m} poses, {} parts, {} masks, {} scalings",
            parts.len(),
            init.inliers.len(),
            g.len()
        )));
    }
    if let Some(j) = joints.iter().find(|j| j.parent >= m || j.child >= m) {
        return Err(Error::CountMismatch(format!(
            "joint between parts {} and {} of {m}",
            j.parent, j.child
        )));
    }
    let masked: Vec<_> = parts
        .iter()
        .zip(&init.inliers)
        .map(|(p, mask)| p.masked(mask))
        .collect();
    let mut slot = Vec::with_capacity(m);
    let mut dim = 0;
    for part in &masked {
        if part.len() >= 3 {
            slot.push(Some(dim));
            dim += 6;
        } else {
            slot.push(None);
        }
    }
    let problem = Problem {
        parts: masked,
        joints,
        g,
        weights: *weights,
        slot,
        dim,
    };

    let mut poses = init.poses.clone();
    let mut energy = problem.energy(&poses);
    if !energy.is_finite() {
        return Err(Error::SolverDiverged(format!("initial energy {energy}")));
    }
    let mut damping = cfg.initial_damping;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        let (jtj, jtr) = problem.normal_equations(&poses);
        // gradient of Σr² is 2Jᵀr
        if dim == 0 || 2.0 * jtr.amax() < cfg.gradient_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while damping <= cfg.max_damping {
            let mut a = jtj.clone();
            for i in 0..dim {
                a[(i, i)] += damping * jtj[(i, i)].max(1e-9);
            }
            let Some(chol) = a.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let delta = -chol.solve(&jtr);
            let candidate = problem.step(&poses, &delta);
            let e = problem.energy(&candidate);
            if e.is_finite() && e < energy {
                let decrease = (energy - e) / energy.max(f64::MIN_POSITIVE);
                poses = candidate;
                energy = e;
                damping = (damping / 3.0).max(1e-15);
                accepted = true;
                if decrease < cfg.relative_decrease_tol {
                    converged = true;
                }
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            // no descent direction left at any damping: a local minimum
            // up to round-off
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(PoseEstimate {
        poses,
        inliers: init.inliers.clone(),
        energy,
        iterations,
        converged,
    })
}
