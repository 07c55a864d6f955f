use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub workers: Option<usize>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub elapsed_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.into(),
            config_digest: config_digest(config),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            workers: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            elapsed_s: 0.0,
        }
    }
}

/// SHA-256 of the config's canonical JSON (object keys sorted, compact).
pub fn config_digest(config: &impl Serialize) -> String {
    let value = serde_json::to_value(config).expect("serialisable config");
    let canonical = serde_json::to_string(&value).expect("json value");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
