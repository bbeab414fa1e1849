use serde::{Deserialize, Serialize};

use super::SceneMetrics;
use crate::error::{Error, Result};

pub const DEFAULT_OCCLUSION_BINS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Part metrics grouped by visible fraction `lo ≤ v < hi` (the last bin
/// also takes `v = hi`). Means are `None` for empty bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcclusionBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub rotation_error_deg: Option<f64>,
    pub translation_error: Option<f64>,
    pub iou_3d: Option<f64>,
}

pub fn occlusion_analysis(metrics: &[SceneMetrics], edges: &[f64]) -> Result<Vec<OcclusionBin>> {
    if edges.len() < 2 || edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "occlusion bins {edges:?} must increase strictly from 0 to 1"
        )));
    }
    let last = edges.len() - 2;
    let mut acc = vec![(0usize, 0.0, 0.0, 0.0, 0usize); edges.len() - 1];
    for part in metrics.iter().flat_map(|m| &m.parts) {
        let v = part.visibility;
        let Some(b) = (0..=last).find(|&b| v >= edges[b] && (v < edges[b + 1] || (b == last && v <= edges[b + 1])))
        else {
            continue;
        };
        let a = &mut acc[b];
        a.0 += 1;
        a.1 += part.rotation_error_deg;
        a.2 += part.translation_error;
        if let Some(iou) = part.iou_3d {
            a.3 += iou;
            a.4 += 1;
        }
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(b, (n, r, t, iou, n_iou))| {
            let mean = |s: f64, k: usize| (k > 0).then(|| s / k as f64);
            OcclusionBin {
                lo: edges[b],
                hi: edges[b + 1],
                count: n,
                rotation_error_deg: mean(r, n),
                translation_error: mean(t, n),
                iou_3d: mean(iou, n_iou),
            }
        })
        .collect())
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` with fewer than two pairs or a
/// constant input.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
