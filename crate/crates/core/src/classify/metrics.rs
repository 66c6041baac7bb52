//! Confusion matrix, accuracy/precision/recall/F1 and report comparison.
//! Malicious is the positive class.

use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::ClassifyError;
use crate::labeling::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// An exact fraction `num / den` with `den > 0`.
pub type Ratio = (u64, u64);

fn ratio(num: u64, den: u64) -> Option<Ratio> {
    (den > 0).then_some((num, den))
}

fn as_f64((n, d): Ratio) -> f64 {
    n as f64 / d as f64
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: &[(Label, Label)]) -> Self {
        let mut m = Self::default();
        for (truth, pred) in pairs {
            match (truth.is_positive(), pred.is_positive()) {
                (true, true) => m.tp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fp += 1,
                (true, false) => m.fn_ += 1,
            }
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy_ratio(&self) -> Option<Ratio> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision_ratio(&self) -> Option<Ratio> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall_ratio(&self) -> Option<Ratio> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2PR / (P + R)`, which reduces to `2TP / (2TP + FP + FN)`; undefined
    /// when P or R is, or when `P + R = 0`.
    pub fn f1_ratio(&self) -> Option<Ratio> {
        self.precision_ratio()?;
        self.recall_ratio()?;
        if self.tp == 0 {
            return None;
        }
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn to_csv(&self) -> String {
        format!(
            "actual,predicted_benign,predicted_malicious\nbenign,{},{}\nmalicious,{},{}\n",
            self.tn, self.fp, self.fn_, self.tp
        )
    }
}

mod metric_value {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str("undefined"),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Some(x)),
            Raw::Text(t) if t == "undefined" => Ok(None),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"undefined\", got {t:?}"
            ))),
        }
    }
}

/// Metric values are fractions in `[0, 1]`; `None` marks a zero
/// denominator and serializes as `"undefined"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(with = "metric_value")]
    pub accuracy: Option<f64>,
    #[serde(with = "metric_value")]
    pub precision: Option<f64>,
    #[serde(with = "metric_value")]
    pub recall: Option<f64>,
    #[serde(with = "metric_value")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    /// SHA-256 over the sorted test ids, identifying the evaluated partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_digest: Option<String>,
}

impl MetricsReport {
    pub fn from_confusion(m: ConfusionMatrix) -> Self {
        Self {
            accuracy: m.accuracy_ratio().map(as_f64),
            precision: m.precision_ratio().map(as_f64),
            recall: m.recall_ratio().map(as_f64),
            f1: m.f1_ratio().map(as_f64),
            confusion: Some(m),
            test_digest: None,
        }
    }

    /// A report carrying only published metric values.
    pub fn from_values(accuracy: f64, precision: f64, recall: f64, f1: f64) -> Self {
        Self {
            accuracy: Some(accuracy),
            precision: Some(precision),
            recall: Some(recall),
            f1: Some(f1),
            confusion: None,
            test_digest: None,
        }
    }

    pub fn with_test_ids<'a>(mut self, ids: impl IntoIterator<Item = &'a str>) -> Self {
        self.test_digest = Some(partition_digest(ids));
        self
    }

    pub fn metrics(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
        ]
    }
}

pub fn partition_digest<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Metrics over `(true, predicted)` pairs.
pub fn compute_metrics(pairs: &[(Label, Label)]) -> Result<MetricsReport, ClassifyError> {
    if pairs.is_empty() {
        return Err(ClassifyError::NoPredictions);
    }
    Ok(MetricsReport::from_confusion(ConfusionMatrix::from_pairs(pairs)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub metric: &'static str,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `a - b` in percentage points.
    pub delta_points: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportComparison {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<MetricDelta>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_owned(), |x| format!("{:.2}%", x * 100.0))
}

impl ReportComparison {
    pub fn delta(&self, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric)
            .and_then(|r| r.delta_points)
    }

    /// Aligned plain-text table; deltas are signed, two decimals.
    pub fn render(&self) -> String {
        let header = ["metric", self.label_a.as_str(), self.label_b.as_str(), "delta (pts)"];
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.metric.to_owned(),
                    pct(r.a),
                    pct(r.b),
                    r.delta_points
                        .map_or_else(|| "undefined".to_owned(), |d| format!("{d:+.2}")),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: [&str; 4]| {
            let _ = write!(out, "{:<w0$}", cells[0], w0 = widths[0]);
            for (c, w) in cells[1..].iter().zip(&widths[1..]) {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
        };
        line(&mut out, header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, [&rule[0], &rule[1], &rule[2], &rule[3]]);
        for row in &body {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3]]);
        }
        out
    }
}

/// Per-metric differences `a - b`. Reports that both name their test
/// partition must name the same one.
pub fn compare_reports(
    label_a: &str,
    a: &MetricsReport,
    label_b: &str,
    b: &MetricsReport,
) -> Result<ReportComparison, ClassifyError> {
    if let (Some(da), Some(db)) = (&a.test_digest, &b.test_digest) {
        if da != db {
            return Err(ClassifyError::PartitionMismatch);
        }
    }
    let rows = a
        .metrics()
        .into_iter()
        .zip(b.metrics())
        .map(|((metric, va), (_, vb))| MetricDelta {
            metric,
            a: va,
            b: vb,
            delta_points: va.zip(vb).map(|(x, y)| (x - y) * 100.0),
        })
        .collect();
    Ok(ReportComparison {
        label_a: label_a.to_owned(),
        label_b: label_b.to_owned(),
        rows,
    })
}
