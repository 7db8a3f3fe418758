//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{DetectorRegion, DonnModel, ModelError, Result};
use crate::optics::OpticalGeometry;

pub const MODEL_FILE_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRecord {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    label: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u64,
    wavelength_m: f64,
    pitch_m: f64,
    grid_n: usize,
    active_n: usize,
    distances_m: Vec<f64>,
    regions: Vec<RegionRecord>,
    labels: Vec<String>,
    layers: Vec<Vec<f64>>,
}

/// Serializes a model to the JSON document format.
///
/// Floats are written in shortest round-trip form, so reading them back yields
/// the identical bit patterns.
pub fn write_model(model: &DonnModel) -> Vec<u8> {
    let g = model.geometry();
    let file = ModelFile {
        version: MODEL_FILE_VERSION,
        wavelength_m: g.wavelength(),
        pitch_m: g.pitch(),
        grid_n: g.grid_n(),
        active_n: g.active_n(),
        distances_m: model.distances().to_vec(),
        regions: model
            .regions()
            .iter()
            .map(|r| RegionRecord {
                x0: r.x0,
                y0: r.y0,
                w: r.width,
                h: r.height,
                label: r.label.clone(),
            })
            .collect(),
        labels: model.labels().to_vec(),
        layers: model.layers().to_vec(),
    };
    let mut out = serde_json::to_vec(&file).expect("model serialization cannot fail");
    out.push(b'\n');
    out
}

pub fn save_model(model: &DonnModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DonnModel> {
    let bytes = fs::read(path)?;
    parse_model(&bytes)
}

pub(crate) fn parse_model(bytes: &[u8]) -> Result<DonnModel> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let version = value
        .get("version")
        .ok_or_else(|| ModelError::Malformed("missing `version`".into()))?
        .as_u64()
        .ok_or_else(|| ModelError::Malformed("`version` must be an unsigned integer".into()))?;
    if version != MODEL_FILE_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let geometry = OpticalGeometry::new(file.wavelength_m, file.pitch_m, file.grid_n, file.active_n)
        .map_err(|e| ModelError::Invariant(e.to_string()))?;
    let regions = file
        .regions
        .into_iter()
        .map(|r| DetectorRegion {
            x0: r.x0,
            y0: r.y0,
            width: r.w,
            height: r.h,
            label: r.label,
        })
        .collect();
    DonnModel::new(geometry, file.distances_m, file.layers, regions, file.labels)
}
