use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Input {
    pub path: String,
    pub sha256: String,
}

impl Input {
    pub fn new(path: &str, bytes: &[u8]) -> Input {
        let digest = Sha256::digest(bytes);
        Input {
            path: path.to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

/// Envelope printed by `--json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub subcommand: String,
    pub inputs: Vec<Input>,
    pub outcome: serde_json::Value,
    /// Independence claims, witnesses or test verdicts behind the outcome.
    pub justification: Vec<String>,
    pub elapsed_ms: f64,
}

/// What a subcommand hands back: the payload plus its text rendering.
pub struct Output {
    pub outcome: serde_json::Value,
    pub justification: Vec<String>,
    pub text: String,
}

impl RunReport {
    pub fn new(subcommand: &str, inputs: Vec<Input>, out: Output, elapsed: Duration) -> RunReport {
        RunReport {
            subcommand: subcommand.to_string(),
            inputs,
            outcome: out.outcome,
            justification: out.justification,
            elapsed_ms: elapsed.as_secs_f64() * 1e3,
        }
    }
}
