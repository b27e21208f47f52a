//! Versioned model persistence. JSON keeps the container inspectable;
//! f64 values round-trip exactly through the shortest-representation
//! printer, so a load reproduces forward outputs bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FusionHead, SequenceModel};

const FORMAT: &str = "auda-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ModelPayload {
    Sequence(SequenceModel),
    Fusion(FusionHead),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    payload: ModelPayload,
}

#[derive(Debug)]
pub enum LoadedModel {
    Sequence(SequenceModel),
    Fusion(FusionHead),
}

fn write(path: &Path, payload: ModelPayload) -> Result<()> {
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        payload,
    };
    let text = serde_json::to_string(&file)
        .map_err(|e| Error::Numeric(format!("cannot serialize model: {e}")))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_model(model: &SequenceModel, path: &Path) -> Result<()> {
    write(path, ModelPayload::Sequence(model.clone()))
}

pub fn save_fusion_head(head: &FusionHead, path: &Path) -> Result<()> {
    write(path, ModelPayload::Fusion(head.clone()))
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    // check the envelope before decoding the payload so a legacy version is
    // reported as such rather than as a parse failure
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Load(format!("{}: not valid JSON: {e}", path.display())))?;
    let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
    if format != FORMAT {
        return Err(Error::Load(format!(
            "{}: not a model file (format '{format}')",
            path.display()
        )));
    }
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if version != VERSION as u64 {
        return Err(Error::Load(format!(
            "{}: unsupported model version {version} (expected {VERSION})",
            path.display()
        )));
    }
    let file: ModelFile = serde_json::from_value(value)
        .map_err(|e| Error::Load(format!("{}: malformed model payload: {e}", path.display())))?;
    Ok(match file.payload {
        ModelPayload::Sequence(m) => LoadedModel::Sequence(m),
        ModelPayload::Fusion(h) => LoadedModel::Fusion(h),
    })
}
