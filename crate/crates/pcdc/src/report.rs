//! Bench report files.
//!
//! JSON (`schema = "pcdc-bench-report"`, `version = 1`):
//!
//! ```text
//! { "schema", "version", "seed",
//!   "rows":   [ { "corpus", "label", "method", "status": "ok" | "error",
//!                 "error"?, "report"?: CompressionReport } ],
//!   "trends": [ { "kind", "group", "points": [[param, gamma_r]], "holds" } ] }
//! ```
//!
//! CSV has one line per row with columns
//! `corpus,label,method,status,original_bytes,compressed_bytes,model_bytes,gamma_r,gamma_a,bits_per_byte,error`.
//! Failed rows leave the numeric columns empty.

use std::io::Write;

use anyhow::Result;
use pcdc_core::CompressionReport;
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "pcdc-bench-report";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub corpus: String,
    pub label: String,
    pub method: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<CompressionReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// `context-length`, `quantization` or `byte-strategy`.
    pub kind: String,
    pub group: String,
    /// (parameter, gamma_r) in the order the trend is checked.
    pub points: Vec<(String, f64)>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub version: u32,
    pub seed: u64,
    pub rows: Vec<Row>,
    pub trends: Vec<Trend>,
}

impl BenchReport {
    pub fn new(seed: u64, rows: Vec<Row>, trends: Vec<Trend>) -> Self {
        Self {
            schema: SCHEMA.into(),
            version: VERSION,
            seed,
            rows,
            trends,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        anyhow::ensure!(report.schema == SCHEMA, "not a bench report");
        anyhow::ensure!(report.version == VERSION, "unsupported report version {}", report.version);
        Ok(report)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "corpus",
            "label",
            "method",
            "status",
            "original_bytes",
            "compressed_bytes",
            "model_bytes",
            "gamma_r",
            "gamma_a",
            "bits_per_byte",
            "error",
        ])?;
        for row in &self.rows {
            let status = match row.status {
                Status::Ok => "ok",
                Status::Error => "error",
            };
            let mut rec = vec![row.corpus.clone(), row.label.clone(), row.method.clone(), status.to_string()];
            match &row.report {
                Some(r) => rec.extend([
                    r.original_bytes.to_string(),
                    r.compressed_bytes.to_string(),
                    r.model_bytes.to_string(),
                    r.gamma_r.to_string(),
                    r.gamma_a.to_string(),
                    r.bits_per_byte.to_string(),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text summary for the terminal.
    pub fn table(&self) -> String {
        let mut s = format!("{:<14} {:<28} {:>10} {:>10} {:>8}\n", "corpus", "method", "gamma_r", "gamma_a", "bpb");
        for row in &self.rows {
            match &row.report {
                Some(r) => s += &format!(
                    "{:<14} {:<28} {:>10.4} {:>10.4} {:>8.3}\n",
                    row.corpus, row.method, r.gamma_r, r.gamma_a, r.bits_per_byte
                ),
                None => s += &format!(
                    "{:<14} {:<28} error: {}\n",
                    row.corpus,
                    row.method,
                    row.error.as_deref().unwrap_or("")
                ),
            }
        }
        for t in &self.trends {
            let pts: Vec<String> = t.points.iter().map(|(p, g)| format!("{p}={g:.4}")).collect();
            s += &format!(
                "trend {} [{}]: {} -> {}\n",
                t.kind,
                t.group,
                pts.join(", "),
                if t.holds { "holds" } else { "VIOLATED" }
            );
        }
        s
    }
}
