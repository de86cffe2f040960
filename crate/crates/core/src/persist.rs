//! Model files and run manifests.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::create_file;
use crate::ensemble::CombinedModel;
use crate::error::{Error, Result};

/// Current model file format. Files with a larger number are refused.
pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lasso,
    Forest,
    Xgb,
    Combined,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lasso => "lasso",
            ModelKind::Forest => "forest",
            ModelKind::Xgb => "xgb",
            ModelKind::Combined => "combined",
        }
    }
}

/// A persisted goal model. Single models are stored as a combination with
/// all weight on one member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub tool_version: String,
    pub kind: ModelKind,
    pub seed: u64,
    pub model: CombinedModel,
    /// Cross-validation results behind the chosen hyperparameters.
    pub tuning: Option<serde_json::Value>,
}

impl ModelFile {
    pub fn new(kind: ModelKind, seed: u64, model: CombinedModel, tuning: Option<serde_json::Value>) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            kind,
            seed,
            model,
            tuning,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("not a model document: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Model("missing format_version".into()))?;
        if version > MODEL_FORMAT_VERSION as u64 {
            return Err(Error::Model(format!(
                "format version {version} is newer than the supported version {MODEL_FORMAT_VERSION}; upgrade the tool"
            )));
        }
        serde_json::from_value(value).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = create_file(path)?;
        f.write_all(self.to_json()?.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Model(m) => Error::Model(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

/// Everything needed to rerun a command: inputs, seed, settings and the
/// digests of what it produced. Contains no timestamps, so equal runs give
/// equal manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    /// Tuning grids and other settings, command specific.
    pub settings: serde_json::Value,
    pub weights: Option<[f64; 3]>,
    pub models: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl PipelineManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        PipelineManifest {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            seed,
            inputs: Vec::new(),
            settings: serde_json::Value::Null,
            weights: None,
            models: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn add_model(&mut self, path: &Path) -> Result<()> {
        self.models.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Model(e.to_string()))?;
        let mut f = create_file(path)?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Model(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::{fit_lasso, TrainingSet};

    fn lasso_file() -> ModelFile {
        let x: Vec<[f64; 8]> = (0..20).map(|i| [i as f64 / 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i % 4) as f64).collect();
        let m = fit_lasso(&TrainingSet::new(x, y), 0.01).unwrap();
        let model = CombinedModel::new([1.0, 0.0, 0.0], Some(m), None, None).unwrap();
        ModelFile::new(ModelKind::Lasso, 7, model, None)
    }

    #[test]
    fn roundtrip() {
        let f = lasso_file();
        let back = ModelFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn newer_version_refused() {
        let mut f = lasso_file();
        f.format_version = MODEL_FORMAT_VERSION + 1;
        let err = ModelFile::from_json(&f.to_json().unwrap()).unwrap_err();
        assert!(err.to_string().contains("newer"), "{err}");
    }

    #[test]
    fn digest_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
