use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{PredictionRecord, Vote};
use crate::error::{Error, Result};
use crate::observe::Scene;

pub const PREDICTION_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionFile {
    schema_version: u32,
    scene_id: u64,
    labels: Vec<usize>,
    #[serde(with = "crate::serde_util::vec3_list")]
    npcs: Vec<Vector3<f64>>,
    g_scale: Vec<f64>,
    #[serde(with = "crate::serde_util::vec3_list")]
    g_offset: Vec<Vector3<f64>>,
    assoc: Vec<usize>,
    votes: Vec<[f64; 7]>,
}

impl PredictionRecord {
    pub fn to_json(&self) -> String {
        let file = PredictionFile {
            schema_version: PREDICTION_SCHEMA_VERSION,
            scene_id: self.scene_id,
            labels: self.labels.clone(),
            npcs: self.npcs.clone(),
            g_scale: self.g_scale.clone(),
            g_offset: self.g_offset.clone(),
            assoc: self.assoc.clone(),
            votes: self.votes.iter().map(Vote::to_array).collect(),
        };
        serde_json::to_string(&file).expect("prediction serializes")
    }

    /// Parses and checks internal consistency: field lengths agree and
    /// `G_s` is positive.
    pub fn from_json(text: &str) -> Result<Self> {
        let version = serde_json::from_str::<serde_json::Value>(text)
            .ok()
            .and_then(|v| v.get("schema_version").and_then(|s| s.as_u64()));
        if let Some(v) = version {
            if v != u64::from(PREDICTION_SCHEMA_VERSION) {
                return Err(Error::SchemaVersionMismatch(format!(
                    "prediction schema {v}, expected {PREDICTION_SCHEMA_VERSION}"
                )));
            }
        }
        let file: PredictionFile =
            serde_json::from_str(text).map_err(|e| Error::SchemaVersionMismatch(format!("prediction: {e}")))?;
        let n = file.labels.len();
        let lengths = [
            ("npcs", file.npcs.len()),
            ("g_scale", file.g_scale.len()),
            ("g_offset", file.g_offset.len()),
            ("assoc", file.assoc.len()),
            ("votes", file.votes.len()),
        ];
        for (name, len) in lengths {
            if len != n {
                return Err(Error::LengthMismatch(format!(
                    "scene {}: {name} has {len} entries, labels has {n}",
                    file.scene_id
                )));
            }
        }
        if let Some(i) = file.g_scale.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidPrediction(format!(
                "scene {}: g_scale of point {i} is not positive",
                file.scene_id
            )));
        }
        Ok(PredictionRecord {
            scene_id: file.scene_id,
            labels: file.labels,
            npcs: file.npcs,
            g_scale: file.g_scale,
            g_offset: file.g_offset,
            assoc: file.assoc,
            votes: file.votes.iter().map(Vote::from_array).collect(),
        })
    }

    /// Checks the record belongs to `scene`: same id, point count, and
    /// labels within the scene's part and joint counts.
    pub fn check_against(&self, scene: &Scene) -> Result<()> {
        if self.scene_id != scene.scene_id {
            return Err(Error::SceneMismatch {
                expected: scene.scene_id,
                found: self.scene_id,
            });
        }
        if self.len() != scene.points.len() {
            return Err(Error::LengthMismatch(format!(
                "scene {}: prediction has {} points, scene has {}",
                scene.scene_id,
                self.len(),
                scene.points.len()
            )));
        }
        let (m, k) = (scene.part_count(), scene.joint_count());
        for i in 0..self.len() {
            if self.labels[i] >= m || self.assoc[i] > k {
                return Err(Error::InvalidPrediction(format!(
                    "scene {}: point {i} has label {} / assoc {} (parts {m}, joints {k})",
                    scene.scene_id, self.labels[i], self.assoc[i]
                )));
            }
            if self.assoc[i] != 0 && (self.votes[i].axis.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidPrediction(format!(
                    "scene {}: vote axis of point {i} is not unit length",
                    scene.scene_id
                )));
            }
        }
        Ok(())
    }
}

pub fn write_prediction(pred: &PredictionRecord, path: &Path) -> Result<()> {
    fs::write(path, pred.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_prediction(path: &Path) -> Result<PredictionRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PredictionRecord::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::CanonicalModel;
    use crate::kinematics::{make_procedural_model, Category, ShapeParams};
    use crate::observe::{sample_scene, CameraConfig};
    use crate::predict::{simulate_prediction, NoiseConfig};

    fn noisy() -> (Scene, PredictionRecord) {
        let model = make_procedural_model(Category::DrawerLike, 1, &ShapeParams::default()).unwrap();
        let canonical = CanonicalModel::build(&model, 0.2).unwrap();
        let s = sample_scene(&model, &canonical, &CameraConfig::default(), 3, 7, "m.json").unwrap();
        let noise = NoiseConfig {
            npcs_sigma: 0.013,
            g_scale_rel_sigma: 0.02,
            g_offset_sigma: 0.01,
            axis_angle_sigma_deg: 2.0,
            pivot_sigma: 0.01,
            seg_flip_prob: 0.1,
            assoc_flip_prob: 0.1,
        };
        let p = simulate_prediction(&s, &noise, 8);
        (s, p)
    }

    #[test]
    fn round_trip_is_lossless() {
        let (s, pred) = noisy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        write_prediction(&pred, &path).unwrap();
        let back = read_prediction(&path).unwrap();
        assert_eq!(back, pred);
        back.check_against(&s).unwrap();
    }

    #[test]
    fn wrong_point_count() {
        let (s, mut pred) = noisy();
        for v in [&mut pred.labels as &mut Vec<usize>, &mut pred.assoc] {
            v.pop();
        }
        pred.npcs.pop();
        pred.g_scale.pop();
        pred.g_offset.pop();
        pred.votes.pop();
        let back = PredictionRecord::from_json(&pred.to_json()).unwrap();
        assert!(matches!(back.check_against(&s), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn ragged_fields() {
        let (_, mut pred) = noisy();
        pred.g_scale.pop();
        assert!(matches!(
            PredictionRecord::from_json(&pred.to_json()),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn missing_votes_field() {
        let (_, pred) = noisy();
        let mut v: serde_json::Value = serde_json::from_str(&pred.to_json()).unwrap();
        v.as_object_mut().unwrap().remove("votes");
        let err = PredictionRecord::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::SchemaVersionMismatch(_)), "{err}");
        assert!(err.to_string().contains("votes"));
    }

    #[test]
    fn future_schema_version() {
        let (_, pred) = noisy();
        let text = pred
            .to_json()
            .replacen("\"schema_version\":1", "\"schema_version\":2", 1);
        assert!(matches!(
            PredictionRecord::from_json(&text),
            Err(Error::SchemaVersionMismatch(_))
        ));
    }

    #[test]
    fn other_scene() {
        let (s, mut pred) = noisy();
        pred.scene_id += 1;
        assert!(matches!(
            pred.check_against(&s),
            Err(Error::SceneMismatch { expected: 7, found: 8 })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            read_prediction(Path::new("/nonexistent/p.json")),
            Err(Error::Io { .. })
        ));
    }
}
