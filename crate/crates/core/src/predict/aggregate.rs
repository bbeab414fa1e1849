use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::PredictionRecord;
use crate::canonical::{NaocsJoint, NaocsJointParams, PartScaling};
use crate::error::{Error, Result};
use crate::kinematics::JointType;

/// Per-part `(G_s, G_t)` as the mean over points labelled with that part.
pub fn aggregate_part_transforms(pred: &PredictionRecord, part_count: usize) -> Result<Vec<PartScaling>> {
    let mut sums = vec![(0.0, Vector3::zeros(), 0usize); part_count];
    for i in 0..pred.len() {
        let Some(acc) = sums.get_mut(pred.labels[i]) else {
            return Err(Error::InvalidPrediction(format!(
                "point {i} labelled part {} of {part_count}",
                pred.labels[i]
            )));
        };
        acc.0 += pred.g_scale[i];
        acc.1 += pred.g_offset[i];
        acc.2 += 1;
    }
    sums.into_iter()
        .enumerate()
        .map(|(j, (s, t, n))| {
            if n == 0 {
                return Err(Error::EmptyPart(j));
            }
            let n = n as f64;
            Ok(PartScaling {
                g_scale: s / n,
                g_offset: t / n,
            })
        })
        .collect()
}

/// Mean of orientation-ambiguous unit axes.
///
/// Votes are sign-aligned with the dominant eigenvector of their scatter
/// matrix before averaging, which does not depend on vote order. The result
/// points the way most raw votes point. `None` for an empty or cancelling
/// set.
pub fn mean_axis(axes: &[Vector3<f64>]) -> Option<Vector3<f64>> {
    let scatter = axes.iter().fold(Matrix3::zeros(), |m, a| m + a * a.transpose());
    let eig = SymmetricEigen::new(scatter);
    let dominant = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned();
    let aligned = axes.iter().fold(
        Vector3::zeros(),
        |acc, a| if a.dot(&dominant) < 0.0 { acc - a } else { acc + a },
    );
    let mut mean = aligned.try_normalize(1e-12)?;
    let agree = axes.iter().filter(|a| a.dot(&mean) > 0.0).count();
    if 2 * agree < axes.len() {
        mean = -mean;
    }
    Some(mean)
}

/// NAOCS joint parameters from the votes of associated points.
///
/// The axis is the sign-aligned mean of vote axes. A revolute pivot is the
/// mean of the on-axis points each vote reconstructs from its predicted
/// NAOCS position `G_s,i·c_i + G_t,i`.
pub fn aggregate_joint_votes(pred: &PredictionRecord, joint_types: &[JointType]) -> Result<NaocsJointParams> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); joint_types.len()];
    for (i, &a) in pred.assoc.iter().enumerate() {
        if a == 0 {
            continue;
        }
        members
            .get_mut(a - 1)
            .ok_or_else(|| {
                Error::InvalidPrediction(format!(
                    "point {i} associated with joint {} of {}",
                    a - 1,
                    joint_types.len()
                ))
            })?
            .push(i);
    }
    members
        .iter()
        .zip(joint_types)
        .enumerate()
        .map(|(k, (idx, jt))| {
            if idx.len() < 3 {
                return Err(Error::InsufficientVotes {
                    joint: k,
                    count: idx.len(),
                });
            }
            let axes: Vec<_> = idx.iter().map(|&i| pred.votes[i].axis).collect();
            let axis = mean_axis(&axes).ok_or(Error::DegenerateAxis(k))?;
            let pivot = match jt {
                JointType::Prismatic => None,
                JointType::Revolute => {
                    let sum = idx.iter().fold(Vector3::zeros(), |acc, &i| {
                        acc + pred.votes[i].pivot_from(&pred.naocs_point(i))
                    });
                    Some(sum / idx.len() as f64)
                }
            };
            Ok(NaocsJoint { axis, pivot })
        })
        .collect()
}
