//! Per-scene estimation for the three methods and the estimates file.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::canonical::PartScaling;
use crate::error::{Error, Result};
use crate::geometry::{OrientedBox, Similarity};
use crate::kinematics::KinematicModel;
use crate::observe::Scene;
use crate::predict::{aggregate_joint_votes, aggregate_part_transforms, PredictionRecord};
use crate::recover::{amodal_box, recover_joints, JointEstimate};
use crate::seed::derive_seed;
use crate::solve::{
    energy_vanilla, fit_part_ransac, initialize, part_correspondences, refine_constrained, ConstraintWeights,
    Correspondences, JointConstraint, PoseEstimate, RansacConfig, SolverConfig,
};

pub const ESTIMATES_SCHEMA_VERSION: u32 = 1;
const ESTIMATES_KIND: &str = "articulate-estimates";

/// Pose estimation method.
///
/// `Npcs` fits each part's NPCS coordinates independently. `Naocs` fits
/// each part's predicted NAOCS coordinates and has no amodal boxes. `Ancsh`
/// refines the NPCS fits under the kinematic constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Npcs,
    Naocs,
    Ancsh,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Npcs, Method::Naocs, Method::Ancsh];

    pub fn name(self) -> &'static str {
        match self {
            Method::Npcs => "npcs",
            Method::Naocs => "naocs",
            Method::Ancsh => "ancsh",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}` (expected npcs, naocs or ancsh)")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub ransac: RansacConfig,
    pub weights: ConstraintWeights,
    pub solver: SolverConfig,
}

/// Everything estimated for one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEstimate {
    pub scene_id: u64,
    pub method: Method,
    /// NPCS-to-camera part poses with inlier masks.
    pub pose: PoseEstimate,
    /// Energy of the RANSAC initialization, before any refinement.
    pub init_energy: f64,
    /// Aggregated NPCS-to-NAOCS scalings.
    pub scaling: Vec<PartScaling>,
    /// Empty when the votes could not be aggregated.
    pub joints: Vec<JointEstimate>,
    /// Amodal part boxes; absent for the NAOCS method.
    pub boxes: Option<Vec<OrientedBox<f64>>>,
    /// Non-fatal problems (solver divergence, missing votes).
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Part poses from NAOCS fits, expressed NPCS-to-camera through the
/// aggregated scalings so they compare with the other methods.
fn naocs_fit(
    pred: &PredictionRecord,
    points: &[nalgebra::Vector3<f64>],
    scaling: &[PartScaling],
    cfg: &RansacConfig,
    seed: u64,
) -> Result<PoseEstimate> {
    let m = scaling.len();
    let mut parts = vec![Correspondences::default(); m];
    for (i, p) in points.iter().enumerate() {
        let part = &mut parts[pred.labels[i]];
        part.npcs.push(pred.naocs_point(i));
        part.points.push(*p);
    }
    let mut poses = Vec::with_capacity(m);
    let mut inliers = Vec::with_capacity(m);
    let mut energy = 0.0;
    for (j, part) in parts.iter().enumerate() {
        // NAOCS coordinates span a fraction of the unit object, so the
        // relative threshold is taken against the part's NAOCS extent
        let mut part_cfg = *cfg;
        if part_cfg.inlier_threshold.is_none() {
            part_cfg.relative_threshold *= scaling[j].g_scale;
        }
        let (t, mask) = fit_part_ransac(&part.points, &part.npcs, &part_cfg, derive_seed(seed, "part", j as u64))?;
        energy += crate::solve::part_energy(&t, &part.masked(&mask));
        let g = &scaling[j];
        poses.push(Similarity::new(
            t.scale * g.g_scale,
            t.rotation,
            t.translation + t.rotation * g.g_offset * t.scale,
        ));
        inliers.push(mask);
    }
    Ok(PoseEstimate {
        poses,
        inliers,
        energy,
        iterations: 0,
        converged: true,
    })
}

/// Runs `method` on one scene's prediction.
///
/// RANSAC trials draw from `derive_seed(seed, "fit", scene_id)`, shared by
/// all methods so they start from identical hypotheses.
pub fn estimate_scene(
    method: Method,
    model: &KinematicModel<f64>,
    scene: &Scene,
    pred: &PredictionRecord,
    cfg: &FitConfig,
    seed: u64,
) -> Result<SceneEstimate> {
    pred.check_against(scene)?;
    let m = model.part_count();
    if scene.part_count() != m || scene.joint_count() != model.joint_count() {
        return Err(Error::CountMismatch(format!(
            "scene {} has {} parts / {} joints, model has {m} / {}",
            scene.scene_id,
            scene.part_count(),
            scene.joint_count(),
            model.joint_count()
        )));
    }
    let fit_seed = derive_seed(seed, "fit", scene.scene_id);
    let scaling = aggregate_part_transforms(pred, m)?;
    let parts = part_correspondences(pred, &scene.points, m)?;
    let mut notes = Vec::new();

    let constraints = match aggregate_joint_votes(pred, &model.joints.iter().map(|j| j.joint_type).collect::<Vec<_>>())
    {
        Ok(params) => Some(JointConstraint::from_model(model, &params)?),
        Err(e) => {
            notes.push(format!("joint votes: {e}"));
            None
        }
    };

    let (pose, init_energy) = match method {
        Method::Naocs => {
            let est = naocs_fit(pred, &scene.points, &scaling, &cfg.ransac, fit_seed)?;
            let e = est.energy;
            (est, e)
        }
        Method::Npcs | Method::Ancsh => {
            let init = initialize(&parts, &cfg.ransac, fit_seed)?;
            let e = init.energy;
            match (method, &constraints) {
                (Method::Ancsh, Some(joints)) => {
                    match refine_constrained(&init, &parts, joints, &scaling, &cfg.weights, &cfg.solver) {
                        Ok(refined) => (refined, e),
                        Err(err) => {
                            warn!("scene {}: {err}; keeping the RANSAC poses", scene.scene_id);
                            notes.push(err.to_string());
                            (init, e)
                        }
                    }
                }
                (Method::Ancsh, None) => {
                    warn!("scene {}: no joint constraints, refinement skipped", scene.scene_id);
                    (init, e)
                }
                _ => (init, e),
            }
        }
    };

    let joints = match &constraints {
        Some(c) => match recover_joints(&pose.poses, &scaling, c) {
            Ok(j) => j,
            Err(e) => {
                notes.push(format!("joint recovery: {e}"));
                Vec::new()
            }
        },
        None => Vec::new(),
    };

    let boxes = match method {
        Method::Naocs => None,
        _ => Some(
            parts
                .iter()
                .zip(&pose.inliers)
                .zip(&pose.poses)
                .map(|((part, mask), p)| {
                    let inlier = part.masked(mask);
                    amodal_box(p, &inlier.npcs)
                        .unwrap_or_else(|| OrientedBox::new(p.translation, p.rotation, nalgebra::Vector3::zeros()))
                })
                .collect(),
        ),
    };

    Ok(SceneEstimate {
        scene_id: scene.scene_id,
        method,
        pose,
        init_energy,
        scaling,
        joints,
        boxes,
        notes,
    })
}

/// Vanilla energy of an estimate's poses on its inliers.
pub fn inlier_vanilla_energy(est: &SceneEstimate, parts: &[Correspondences]) -> f64 {
    let masked: Vec<_> = parts.iter().zip(&est.pose.inliers).map(|(p, m)| p.masked(m)).collect();
    energy_vanilla(&est.pose.poses, &masked)
}

/// Per-scene failure recorded instead of an estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFailure {
    pub scene_id: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatesFile {
    pub schema_version: u32,
    pub kind: String,
    pub method: Method,
    pub estimates: Vec<SceneEstimate>,
    pub failures: Vec<SceneFailure>,
}

impl EstimatesFile {
    pub fn new(method: Method, estimates: Vec<SceneEstimate>, failures: Vec<SceneFailure>) -> Self {
        Self {
            schema_version: ESTIMATES_SCHEMA_VERSION,
            kind: ESTIMATES_KIND.into(),
            method,
            estimates,
            failures,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("estimates serialize");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: EstimatesFile =
            serde_json::from_str(&text).map_err(|e| Error::SchemaVersionMismatch(format!("estimates: {e}")))?;
        if file.schema_version != ESTIMATES_SCHEMA_VERSION || file.kind != ESTIMATES_KIND {
            return Err(Error::SchemaVersionMismatch(format!(
                "estimates schema {} ({}), expected {ESTIMATES_SCHEMA_VERSION} ({ESTIMATES_KIND})",
                file.schema_version, file.kind
            )));
        }
        Ok(file)
    }
}
