//! The JSON certificate written by every subcommand.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::CliError;
use crate::RunContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Success,
    Counterexample,
    Failure,
    Undecided,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified | Verdict::Success => 0,
            Verdict::Counterexample | Verdict::Failure => 1,
            Verdict::Undecided => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::Success => "success",
            Verdict::Counterexample => "counterexample",
            Verdict::Failure => "failure",
            Verdict::Undecided => "undecided",
        }
    }
}

/// What a subcommand hands back: verdict, numeric fields, an optional
/// witness or counterexample, and data files to write next to the
/// certificate.
pub struct Outcome {
    pub verdict: Verdict,
    pub fields: Value,
    pub payload: Value,
    pub precision_audit: Option<Value>,
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn new(verdict: Verdict, fields: Value) -> Self {
        Self { verdict, fields, payload: Value::Null, precision_audit: None, files: Vec::new() }
    }

    pub fn payload(mut self, payload: Value) -> Self {
        self.payload = payload;
        self
    }

    pub fn file(mut self, name: &str, contents: String) -> Self {
        self.files.push((name.to_string(), contents));
        self
    }

    pub fn audit(mut self, audit: Option<Value>) -> Self {
        self.precision_audit = audit;
        self
    }
}

#[derive(Debug, Serialize)]
pub struct CertificateRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// sha256 over the command, the config text and the seed.
    pub inputs_digest: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub fields: Value,
    pub payload: Value,
    pub precision_audit: Option<Value>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    files: Vec<(String, String)>,
}

pub fn inputs_digest(command: &str, config: &str, seed: u64, precision_audit: bool) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(config.as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    h.update([precision_audit as u8]);
    hex::encode(h.finalize())
}

impl CertificateRecord {
    pub fn new(command: &str, config: &str, ctx: &RunContext, outcome: Outcome, seconds: f64) -> Self {
        let outputs = outcome.files.iter().map(|(n, _)| n.clone()).collect();
        Self {
            tool: "constructa",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            inputs_digest: inputs_digest(command, config, ctx.seed, ctx.precision_audit),
            seed: ctx.seed,
            verdict: outcome.verdict,
            exit_code: outcome.verdict.exit_code(),
            fields: outcome.fields,
            payload: outcome.payload,
            precision_audit: outcome.precision_audit,
            outputs,
            wall_clock_seconds: seconds,
            files: outcome.files,
        }
    }

    /// Writes `<command>.json` and the data files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Runtime(format!("cannot write to {}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(dir.join(format!("{}.json", self.command)), json + "\n").map_err(io)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents).map_err(io)?;
        }
        Ok(())
    }
}
