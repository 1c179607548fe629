use std::collections::BTreeMap;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;

/// Provenance record attached to every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub artifact_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            parameters: BTreeMap::new(),
            artifact_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.parameters.insert(key.to_owned(), value.into());
        self
    }

    /// `#`-prefixed lines for a CSV preamble.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("# command: {}", self.command),
            format!("# artifact_version: {}", self.artifact_version),
            format!("# timestamp: {}", self.timestamp),
        ];
        for (k, v) in &self.parameters {
            out.push(format!("# param.{k}: {v}"));
        }
        out
    }
}
