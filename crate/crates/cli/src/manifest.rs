use std::collections::BTreeMap;

use serde::Serialize;

/// Reproducibility record embedded in every emitted report: the command,
/// its input files and every resolved parameter. Two runs with the same
/// manifest produce byte-identical outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn input(mut self, path: &std::path::Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(
            key.to_string(),
            serde_json::to_value(value).expect("manifest values serialize"),
        );
        self
    }

    /// `# manifest: {...}` header line for CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!("# manifest: {}", serde_json::to_string(self).expect("manifest serializes"))
    }
}
