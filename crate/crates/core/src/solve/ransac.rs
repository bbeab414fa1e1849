use nalgebra::Vector3;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{umeyama_fit, Similarity};
use crate::seed::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub max_iters: usize,
    /// Absolute inlier distance in camera units. When unset the threshold
    /// is `relative_threshold` times the part diameter estimated from the
    /// correspondences.
    pub inlier_threshold: Option<f64>,
    pub relative_threshold: f64,
    pub confidence: f64,
    /// Refits on the inlier set after the consensus search.
    pub refit_rounds: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            inlier_threshold: None,
            relative_threshold: 0.05,
            confidence: 0.99,
            refit_rounds: 2,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("ransac max_iters must be at least 1".into()));
        }
        if let Some(t) = self.inlier_threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig("ransac inlier_threshold must be positive".into()));
            }
        }
        if !(self.relative_threshold > 0.0) || !(0.0..1.0).contains(&self.confidence) {
            return Err(Error::InvalidConfig(
                "ransac relative_threshold must be positive, confidence in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Robust camera-per-NPCS scale: median length ratio over point pairs
/// half and a third of the way around the point list. NPCS parts have unit
/// diagonal, so this approximates the part diameter in camera units.
fn estimate_diameter(points: &[Vector3<f64>], npcs: &[Vector3<f64>]) -> Option<f64> {
    let n = points.len();
    let mut ratios = Vec::with_capacity(2 * n);
    for stride in [n / 2, n / 3] {
        if stride == 0 {
            continue;
        }
        for i in 0..n {
            let j = (i + stride) % n;
            let dc = (npcs[i] - npcs[j]).norm();
            if dc > 1e-9 {
                ratios.push((points[i] - points[j]).norm() / dc);
            }
        }
    }
    if ratios.is_empty() {
        return None;
    }
    let mid = ratios.len() / 2;
    let (_, m, _) = ratios.select_nth_unstable_by(mid, f64::total_cmp);
    Some(*m)
}

struct Consensus {
    mask: Vec<bool>,
    count: usize,
    sse: f64,
}

fn consensus(pose: &Similarity<f64>, points: &[Vector3<f64>], npcs: &[Vector3<f64>], thr: f64) -> Consensus {
    let thr2 = thr * thr;
    let mut mask = Vec::with_capacity(points.len());
    let (mut count, mut sse) = (0, 0.0);
    for (p, c) in points.iter().zip(npcs) {
        let d2 = (pose.apply(c) - p).norm_squared();
        let inside = d2 < thr2;
        if inside {
            count += 1;
            sse += d2;
        }
        mask.push(inside);
    }
    Consensus { mask, count, sse }
}

fn select<'a>(v: &'a [Vector3<f64>], mask: &'a [bool]) -> Vec<Vector3<f64>> {
    v.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| *x).collect()
}

/// Similarity from NPCS coordinates to camera points by three-point RANSAC
/// with Umeyama hypotheses, refit on the consensus set.
///
/// Trial `k` draws from `rng_for(seed, "ransac", k)`, so results do not
/// depend on how trials are scheduled. The search stops early once the
/// best inlier ratio `w` makes `1 − (1 − w³)^k` exceed the confidence.
pub fn fit_part_ransac(
    points: &[Vector3<f64>],
    npcs: &[Vector3<f64>],
    cfg: &RansacConfig,
    seed: u64,
) -> Result<(Similarity<f64>, Vec<bool>)> {
    if points.len() != npcs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} points, {} NPCS coordinates",
            points.len(),
            npcs.len()
        )));
    }
    let n = points.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    let thr = match cfg.inlier_threshold {
        Some(t) => t,
        None => {
            let d = estimate_diameter(points, npcs)
                .ok_or_else(|| Error::DegenerateInput("all NPCS coordinates coincide".into()))?;
            cfg.relative_threshold * d
        }
    };
    if !(thr > 0.0) {
        return Err(Error::DegenerateInput("camera points coincide".into()));
    }

    let mut best: Option<(Similarity<f64>, Consensus)> = None;
    let mut needed = cfg.max_iters;
    let mut trial = 0;
    while trial < needed.min(cfg.max_iters) {
        let mut rng = rng_for(seed, "ransac", trial as u64);
        trial += 1;
        let idx = sample(&mut rng, n, 3);
        let src: Vec<_> = idx.iter().map(|i| npcs[i]).collect();
        let dst: Vec<_> = idx.iter().map(|i| points[i]).collect();
        let Ok(pose) = umeyama_fit(&src, &dst, true) else {
            continue;
        };
        let c = consensus(&pose, points, npcs, thr);
        let better = match &best {
            None => true,
            Some((_, b)) => c.count > b.count || (c.count == b.count && c.sse < b.sse),
        };
        if better {
            let w = c.count as f64 / n as f64;
            let miss = 1.0 - w.powi(3);
            needed = if miss <= 0.0 {
                0
            } else if miss >= 1.0 {
                cfg.max_iters
            } else {
                ((1.0 - cfg.confidence).ln() / miss.ln()).ceil() as usize
            };
            best = Some((pose, c));
        }
    }
    let (mut pose, mut c) = best.ok_or_else(|| Error::DegenerateInput("every minimal sample is collinear".into()))?;

    for _ in 0..cfg.refit_rounds {
        if c.count < 3 {
            break;
        }
        let refit = umeyama_fit(&select(npcs, &c.mask), &select(points, &c.mask), true)?;
        let next = consensus(&refit, points, npcs, thr);
        if next.count < 3 {
            break;
        }
        let settled = next.mask == c.mask;
        pose = refit;
        c = next;
        if settled {
            break;
        }
    }
    Ok((pose, c.mask))
}
