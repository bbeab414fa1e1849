//! JSON-lines dataset: a header line followed by one scene per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Error, Result};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
const DATASET_KIND: &str = "articulate-dataset";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub kind: String,
    /// Model file, relative to the dataset file.
    pub model: String,
    pub scene_count: usize,
}

impl DatasetHeader {
    pub fn new(model: impl Into<String>, scene_count: usize) -> Self {
        Self {
            schema_version: DATASET_SCHEMA_VERSION,
            kind: DATASET_KIND.into(),
            model: model.into(),
            scene_count,
        }
    }
}

pub fn write_dataset(path: &Path, model_ref: &str, scenes: &[Scene]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let header = DatasetHeader::new(model_ref, scenes.len());
    serde_json::to_writer(&mut out, &header).expect("header serializes");
    out.write_all(b"\n").map_err(io)?;
    for scene in scenes {
        serde_json::to_writer(&mut out, scene).expect("scene serializes");
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<Scene>)> {
    let io = |e| Error::io(path, e);
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::SchemaVersionMismatch("dataset is missing its header".into()))?
        .map_err(io)?;
    let header: DatasetHeader =
        serde_json::from_str(&first).map_err(|e| Error::SchemaVersionMismatch(format!("dataset header: {e}")))?;
    if header.schema_version != DATASET_SCHEMA_VERSION || header.kind != DATASET_KIND {
        return Err(Error::SchemaVersionMismatch(format!(
            "dataset schema {} ({}), expected {DATASET_SCHEMA_VERSION} ({DATASET_KIND})",
            header.schema_version, header.kind
        )));
    }
    let mut scenes = Vec::with_capacity(header.scene_count);
    for (n, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let scene: Scene = serde_json::from_str(&line)
            .map_err(|e| Error::SchemaVersionMismatch(format!("scene line {}: {e}", n + 2)))?;
        scenes.push(scene);
    }
    if scenes.len() != header.scene_count {
        return Err(Error::LengthMismatch(format!(
            "header announces {} scenes, file holds {}",
            header.scene_count,
            scenes.len()
        )));
    }
    Ok((header, scenes))
}
