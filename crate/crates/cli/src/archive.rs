//! Versioned single-file model archive.
//!
//! JSON with shortest round-trip float formatting and exact parsing, so a
//! reloaded model reproduces every prediction bit for bit.

use std::path::Path;

use geowarp::FittedModel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT: &str = "geowarp-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format: String,
    pub version: u32,
    /// SHA-256 of the training CSV.
    pub data_sha256: String,
    pub response: String,
    pub coords: Option<Vec<String>>,
    pub zone_id: Option<String>,
    pub xgroup: Option<String>,
    pub offset: Option<String>,
    pub model: FittedModel,
}

#[derive(Deserialize)]
struct Header {
    format: Option<String>,
    version: Option<u32>,
}

impl ModelArchive {
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)
            .map_err(|e| CliError::Numeric(format!("cannot serialize model: {e}")))?;
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelArchive> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let bad = |e: serde_json::Error| {
            CliError::Data(format!("{}: corrupt model archive: {e}", path.display()))
        };
        let h: Header = serde_json::from_slice(&bytes).map_err(bad)?;
        if h.format.as_deref() != Some(FORMAT) {
            return Err(CliError::Version(format!(
                "{}: not a {FORMAT} archive",
                path.display()
            )));
        }
        match h.version {
            Some(VERSION) => serde_json::from_slice(&bytes).map_err(bad),
            v => Err(CliError::Version(format!(
                "{}: archive version {} is not supported (this build reads version {VERSION})",
                path.display(),
                v.map_or("missing".to_string(), |v| v.to_string())
            ))),
        }
    }
}
