//! Machine-readable run reports.
//!
//! Every command emits one `RunReport` as pretty JSON on stdout. Reports are
//! deterministic for identical inputs except for `wall_time_s`, so golden
//! files can compare everything else verbatim.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use icokit::process::PartySubset;
use icokit::{Error, Result};

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct ResidualRow {
    pub check: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub subset: Vec<usize>,
    pub value: f64,
}

#[derive(Serialize)]
pub struct VerdictRow {
    pub name: String,
    pub verdict: bool,
}

#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub tolerance: f64,
    pub residuals: Vec<ResidualRow>,
    pub verdicts: Vec<VerdictRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: &str, tolerance: f64) -> Self {
        RunReport {
            command: command.to_string(),
            inputs: Vec::new(),
            tolerance,
            residuals: Vec::new(),
            verdicts: Vec::new(),
            result: None,
            wall_time_s: 0.0,
        }
    }

    /// Record a file input by path and content digest.
    pub fn digest_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)
            .map_err(|e| Error::Malformed(format!("cannot read {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }

    pub fn residual(&mut self, check: &str, value: f64) {
        self.residuals.push(ResidualRow {
            check: check.to_string(),
            subset: Vec::new(),
            value,
        });
    }

    pub fn subset_residual(&mut self, check: &str, subset: &PartySubset, value: f64) {
        self.residuals.push(ResidualRow {
            check: check.to_string(),
            subset: subset.parties().to_vec(),
            value,
        });
    }

    pub fn verdict(&mut self, name: &str, verdict: bool) {
        self.verdicts.push(VerdictRow {
            name: name.to_string(),
            verdict,
        });
    }

    /// True when every recorded verdict holds; commands exit 0 iff so.
    pub fn accepted(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict)
    }
}
