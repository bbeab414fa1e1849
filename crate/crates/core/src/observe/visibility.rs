//! Point-sample depth buffer.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Pinhole image used only for visibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthBufferConfig {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels; the principal point is the image center.
    pub focal: f64,
    /// Each sample writes its depth into a `(2r+1)²` pixel square.
    pub splat_radius: usize,
    /// Depth slack in pixel footprints (`slack · z / focal`) within which a
    /// sample still counts as the surface seen at its pixel.
    pub depth_slack: f64,
}

impl Default for DepthBufferConfig {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            focal: 140.0,
            splat_radius: 1,
            depth_slack: 2.5,
        }
    }
}

impl DepthBufferConfig {
    pub fn project(&self, p: &Vector3<f64>) -> Option<(usize, usize)> {
        if !(p.z > 1e-9) {
            return None;
        }
        let u = self.focal * p.x / p.z + self.width as f64 / 2.0;
        let v = self.focal * p.y / p.z + self.height as f64 / 2.0;
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }
}

/// Visible flag per camera-frame sample: the sample projects inside the
/// image and is no farther than the nearest surface splatted onto its pixel
/// (plus the depth slack).
pub fn visible_samples(points: &[Vector3<f64>], cfg: &DepthBufferConfig) -> Vec<bool> {
    let (w, h) = (cfg.width, cfg.height);
    let mut depth = vec![f64::INFINITY; w * h];
    let r = cfg.splat_radius as isize;
    let pixels: Vec<Option<(usize, usize)>> = points.iter().map(|p| cfg.project(p)).collect();
    for (p, pix) in points.iter().zip(&pixels) {
        let Some((u, v)) = *pix else { continue };
        for dv in -r..=r {
            for du in -r..=r {
                let (uu, vv) = (u as isize + du, v as isize + dv);
                if uu < 0 || vv < 0 || uu >= w as isize || vv >= h as isize {
                    continue;
                }
                let cell = &mut depth[vv as usize * w + uu as usize];
                if p.z < *cell {
                    *cell = p.z;
                }
            }
        }
    }
    points
        .iter()
        .zip(&pixels)
        .map(|(p, pix)| match *pix {
            Some((u, v)) => p.z <= depth[v * w + u] + cfg.depth_slack * p.z / cfg.focal,
            None => false,
        })
        .collect()
}
