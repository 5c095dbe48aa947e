//! Versioned machine-readable reports with human-readable summaries.
//!
//! Reports are deterministic for a fixed scenario and seed: all payloads
//! serialize through `serde_json`'s ordered maps, and the only
//! run-dependent value (the timestamp) lives in the header where
//! comparison tooling can mask it.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

pub const REPORT_VERSION: u32 = 1;

/// One verified quantity: the measured value next to its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    /// `<=` or `>=`.
    pub comparator: String,
    pub pass: bool,
}

impl CheckLine {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            comparator: "<=".into(),
            pass: measured <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            comparator: ">=".into(),
            pass: measured >= tolerance,
        }
    }

    pub fn exactly(name: impl Into<String>, measured: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance: expected,
            comparator: "==".into(),
            pass: measured == expected,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Header {
    pub timestamp: String,
    pub tool: String,
    pub scenario: Option<String>,
    pub assumptions: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub report_version: u32,
    pub header: Header,
    pub command: String,
    pub seed: Option<u64>,
    pub results: Value,
    pub checks: Vec<CheckLine>,
    pub pass: bool,
    /// Extra aligned-text payload (e.g. the step table); text rendering
    /// only, never serialized.
    #[serde(skip)]
    pub extra_text: Option<String>,
}

impl Report {
    pub fn new(command: &str, scenario: Option<&Path>, seed: Option<u64>) -> Self {
        Self {
            report_version: REPORT_VERSION,
            header: Header {
                timestamp: chrono::Utc::now().to_rfc3339(),
                tool: format!("holoq {}", env!("CARGO_PKG_VERSION")),
                scenario: scenario.map(|p| p.display().to_string()),
                assumptions: Vec::new(),
            },
            command: command.to_string(),
            seed,
            results: json!({}),
            checks: Vec::new(),
            pass: true,
            extra_text: None,
        }
    }

    pub fn assume(&mut self, note: impl Into<String>) {
        self.header.assumptions.push(note.into());
    }

    pub fn push_checks(&mut self, checks: Vec<CheckLine>) {
        for c in checks {
            self.pass &= c.pass;
            self.checks.push(c);
        }
    }

    /// Write the JSON report (and a text rendering when requested); returns
    /// the JSON path.
    pub fn write(&self, out_dir: &Path, text_too: bool) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(out_dir)?;
        let json_path = out_dir.join(format!("{}.report.json", self.command));
        std::fs::write(&json_path, serde_json::to_string_pretty(self)? + "\n")?;
        if text_too {
            let text_path = out_dir.join(format!("{}.report.txt", self.command));
            std::fs::write(&text_path, self.render_text())?;
        }
        Ok(json_path)
    }

    /// Human-readable summary: one aligned line per check.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} report (version {})\n",
            self.command, self.report_version
        ));
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed: {seed}\n"));
        }
        for a in &self.header.assumptions {
            out.push_str(&format!("note: {a}\n"));
        }
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {:<58} {:>14.6e} {} {:.6e}\n",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                c.comparator,
                c.tolerance,
            ));
        }
        if let Some(extra) = &self.extra_text {
            out.push_str(extra);
        }
        out.push_str(&format!(
            "overall: {}\n",
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}
