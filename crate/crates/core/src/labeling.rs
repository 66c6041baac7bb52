//! Ground-truth labels from antivirus aggregator reports.
//!
//! A sample is malicious as soon as one engine flags it.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malicious,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malicious => "malicious",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Malicious
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benign" => Ok(Label::Benign),
            "malicious" => Ok(Label::Malicious),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    #[default]
    ThresholdRule,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanReport {
    pub sha256: String,
    pub positives: u32,
    pub total_engines: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub apk_id: String,
    pub label: Label,
    #[serde(default, skip_serializing)]
    pub source: LabelSource,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("invalid sha256 `{0}`")]
    InvalidHash(String),
    #[error("invalid report: {0}")]
    Invalid(String),
}

pub fn label_from_report(report: &ScanReport) -> LabeledSample {
    let label = if report.positives >= 1 {
        Label::Malicious
    } else {
        Label::Benign
    };
    LabeledSample {
        apk_id: report.sha256.clone(),
        label,
        source: LabelSource::ThresholdRule,
    }
}

fn is_sha256(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

fn as_count(v: &Value, field: &'static str) -> Result<u32, ReportError> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| ReportError::Invalid(format!("`{field}` is not a non-negative integer")))
}

/// Parse one stored report.
///
/// Accepted layouts:
/// * flat `{"sha256", "positives", "total"}`;
/// * v2 with a `scans` map of `{"detected": bool}` entries;
/// * v3 `data.attributes` with `last_analysis_results` (entries whose
///   `category` is `"malicious"` count as detections) or, failing that,
///   `last_analysis_stats`.
pub fn parse_vt_report(json: &str) -> Result<ScanReport, ReportError> {
    let root: Value = serde_json::from_str(json).map_err(|e| ReportError::Invalid(e.to_string()))?;
    let body = root
        .pointer("/data/attributes")
        .filter(|v| v.is_object())
        .unwrap_or(&root);

    let sha256 = body
        .get("sha256")
        .or_else(|| root.get("sha256"))
        .and_then(Value::as_str)
        .ok_or(ReportError::MissingField("sha256"))?;
    if !is_sha256(sha256) {
        return Err(ReportError::InvalidHash(sha256.to_owned()));
    }
    let sha256 = sha256.to_ascii_lowercase();

    let (positives, total) = if let Some(p) = body.get("positives") {
        let total = body.get("total").ok_or(ReportError::MissingField("total"))?;
        (as_count(p, "positives")?, as_count(total, "total")?)
    } else if let Some(scans) = body.get("scans").and_then(Value::as_object) {
        let hits = scans
            .values()
            .filter(|e| e.get("detected").and_then(Value::as_bool) == Some(true))
            .count();
        (hits as u32, scans.len() as u32)
    } else if let Some(results) = body.get("last_analysis_results").and_then(Value::as_object) {
        let hits = results
            .values()
            .filter(|e| e.get("category").and_then(Value::as_str) == Some("malicious"))
            .count();
        (hits as u32, results.len() as u32)
    } else if let Some(stats) = body.get("last_analysis_stats").and_then(Value::as_object) {
        let positives = stats
            .get("malicious")
            .map(|v| as_count(v, "malicious"))
            .transpose()?
            .unwrap_or(0);
        let mut total = 0u32;
        for v in stats.values() {
            total = total.saturating_add(as_count(v, "last_analysis_stats")?);
        }
        (positives, total)
    } else {
        return Err(ReportError::MissingField("positives"));
    };

    if total == 0 {
        return Err(ReportError::Invalid("report lists no engines".into()));
    }
    if positives > total {
        return Err(ReportError::Invalid(format!(
            "positives {positives} exceed total {total}"
        )));
    }
    Ok(ScanReport {
        sha256,
        positives,
        total_engines: total,
    })
}

#[derive(Error, Debug)]
pub enum LabelDirError {
    #[error("{path}: {source}")]
    Report { path: String, source: ReportError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Label every `*.json` report in a directory, sorted by file name.
pub fn label_report_dir(dir: &Path) -> Result<Vec<LabeledSample>, LabelDirError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)?;
            parse_vt_report(&text)
                .map(|r| label_from_report(&r))
                .map_err(|source| LabelDirError::Report {
                    path: p.display().to_string(),
                    source,
                })
        })
        .collect()
}

pub fn write_labels_jsonl<'a>(
    mut w: impl Write,
    labels: impl IntoIterator<Item = &'a LabeledSample>,
) -> std::io::Result<()> {
    for l in labels {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_labels_jsonl(r: impl BufRead) -> Result<Vec<LabeledSample>, crate::features::LoadError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| crate::features::LoadError::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Environment variable holding the aggregator API key for live lookups.
pub const API_KEY_ENV: &str = "VT_API_KEY";

/// Fetch a report from the aggregator's v3 file endpoint.
///
/// Only used when `VT_API_KEY` is set; the offline report directory is the
/// normal path.
pub fn fetch_report(base_url: &str, sha256: &str) -> Result<String, ReportError> {
    let key = std::env::var(API_KEY_ENV).map_err(|_| ReportError::MissingField(API_KEY_ENV))?;
    if !is_sha256(sha256) {
        return Err(ReportError::InvalidHash(sha256.to_owned()));
    }
    let url = format!("{}/api/v3/files/{}", base_url.trim_end_matches('/'), sha256);
    ureq::get(&url)
        .set("x-apikey", &key)
        .call()
        .map_err(|e| ReportError::Invalid(e.to_string()))?
        .into_string()
        .map_err(|e| ReportError::Invalid(e.to_string()))
}
