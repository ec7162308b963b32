//! Measurement records and their on-disk form.
//!
//! A [`TimeTrace`] is the sequence of detected increments Δy, one per time
//! step, plus the metadata needed to replay it through any filter. The CSV
//! form prints floats with Rust's shortest round-trip formatting, so
//! write → read is bit-exact and the replay invariant holds across files.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};

/// Which generator produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthTag {
    Quantum,
    Classical,
    /// Externally recorded data; carries no seed.
    External,
}

impl TruthTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TruthTag::Quantum => "quantum",
            TruthTag::Classical => "classical",
            TruthTag::External => "external",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(TruthTag::Quantum),
            "classical" => Ok(TruthTag::Classical),
            "external" => Ok(TruthTag::External),
            other => Err(QcError::TraceFormat(format!("unknown truth_tag '{other}'"))),
        }
    }
}

/// A discretized measurement record {Δy_t}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    /// Step size.
    pub dt: f64,
    /// One increment per step, measured channel only.
    pub increments: Vec<f64>,
    /// RNG seed used for truth generation; `None` for external data.
    pub seed: Option<u64>,
    /// Generator label.
    pub truth_tag: TruthTag,
    /// Hash of the generating configuration, for provenance checks.
    pub params_hash: u64,
}

const TRACE_HEADER: &str = "# qcselect trace v1";

impl TimeTrace {
    pub fn new(
        dt: f64,
        increments: Vec<f64>,
        seed: Option<u64>,
        truth_tag: TruthTag,
        params_hash: u64,
    ) -> Result<Self> {
        let trace = TimeTrace { dt, increments, seed, truth_tag, params_hash };
        trace.validate()?;
        Ok(trace)
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QcError::TraceFormat(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(bad) = self.increments.iter().find(|v| !v.is_finite()) {
            return Err(QcError::TraceFormat(format!("non-finite increment {bad}")));
        }
        Ok(())
    }

    /// Serialize to the v1 CSV format (metadata comments, then one increment
    /// per row).
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.increments.len() + 256);
        out.push_str(TRACE_HEADER);
        out.push('\n');
        let _ = writeln!(out, "# dt = {}", self.dt);
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "# seed = {s}");
            }
            None => {
                let _ = writeln!(out, "# seed = none");
            }
        }
        let _ = writeln!(out, "# truth_tag = {}", self.truth_tag.as_str());
        let _ = writeln!(out, "# params_hash = {:016x}", self.params_hash);
        let _ = writeln!(out, "# n_steps = {}", self.increments.len());
        out.push_str("dy\n");
        for v in &self.increments {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| QcError::TraceFormat("empty file".into()))?;
        if first.trim() != TRACE_HEADER {
            return Err(QcError::TraceFormat(format!("bad header line '{first}'")));
        }
        let mut dt = None;
        let mut seed = None;
        let mut truth_tag = None;
        let mut n_steps = None;
        let mut increments = Vec::new();
        let mut params_hash = 0u64;
        let mut in_data = false;
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if !in_data {
                if let Some(meta) = line.strip_prefix('#') {
                    let mut parts = meta.splitn(2, '=');
                    let key = parts.next().unwrap_or("").trim();
                    let value = parts.next().unwrap_or("").trim();
                    match key {
                        "dt" => {
                            dt = Some(value.parse::<f64>().map_err(|e| {
                                QcError::TraceFormat(format!("bad dt '{value}': {e}"))
                            })?)
                        }
                        "seed" => {
                            seed = if value == "none" {
                                None
                            } else {
                                Some(value.parse::<u64>().map_err(|e| {
                                    QcError::TraceFormat(format!("bad seed '{value}': {e}"))
                                })?)
                            }
                        }
                        "truth_tag" => truth_tag = Some(TruthTag::parse(value)?),
                        "params_hash" => {
                            params_hash = u64::from_str_radix(value, 16).map_err(|e| {
                                QcError::TraceFormat(format!("bad params_hash '{value}': {e}"))
                            })?
                        }
                        "n_steps" => {
                            n_steps = Some(value.parse::<usize>().map_err(|e| {
                                QcError::TraceFormat(format!("bad n_steps '{value}': {e}"))
                            })?)
                        }
                        _ => {} // tolerate unknown metadata
                    }
                    continue;
                }
                if line == "dy" {
                    in_data = true;
                    continue;
                }
                return Err(QcError::TraceFormat(format!("unexpected line '{line}'")));
            }
            increments.push(
                line.parse::<f64>()
                    .map_err(|e| QcError::TraceFormat(format!("bad increment '{line}': {e}")))?,
            );
        }
        let dt = dt.ok_or_else(|| QcError::TraceFormat("missing dt".into()))?;
        let truth_tag = truth_tag.ok_or_else(|| QcError::TraceFormat("missing truth_tag".into()))?;
        if let Some(n) = n_steps {
            if n != increments.len() {
                return Err(QcError::TraceFormat(format!(
                    "n_steps {} disagrees with {} rows",
                    n,
                    increments.len()
                )));
            }
        }
        TimeTrace::new(dt, increments, seed, truth_tag, params_hash)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = BufReader::new(file);
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_csv(&text)
    }

    /// Read only the metadata lines (cheap dt/tag inspection).
    pub fn read_csv_header(path: &Path) -> Result<(f64, TruthTag)> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut dt = None;
        let mut tag = None;
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                let mut parts = meta.splitn(2, '=');
                let key = parts.next().unwrap_or("").trim();
                let value = parts.next().unwrap_or("").trim();
                match key {
                    "dt" => dt = value.parse::<f64>().ok(),
                    "truth_tag" => tag = TruthTag::parse(value).ok(),
                    _ => {}
                }
            } else if line == "dy" {
                break;
            }
        }
        match (dt, tag) {
            (Some(dt), Some(tag)) => Ok((dt, tag)),
            _ => Err(QcError::TraceFormat("missing dt or truth_tag in header".into())),
        }
    }
}
