use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance attached to every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    /// Comment line that heads each CSV file.
    pub fn csv_header(&self) -> String {
        format!(
            "# manifest={}\n",
            serde_json::to_string(self).expect("manifest serializes")
        )
    }
}
