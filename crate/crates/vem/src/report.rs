//! Evaluation reports as JSON or CSV.
//!
//! The CSV has the header `kind,vertex,roi,r2,normalized,value` and these rows:
//!
//! - `vertex`: one per vertex with its index, ROI name, R² and normalized
//!   score (`normalized` empty when the vertex is excluded)
//! - `overall_m`: the mean normalized score in `value`
//! - `n_excluded_vertices`: the excluded count in `value`
//! - `roi_median`: one per ROI with the ROI name and its median in `value`
//!
//! The JSON is the serialized [`EvalReport`]; excluded vertices are `null`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vem_core::eval::EvalReport;

use crate::error::{io_err, parse_err, Result};

pub const CSV_HEADER: [&str; 6] = ["kind", "vertex", "roi", "r2", "normalized", "value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    kind: String,
    vertex: Option<usize>,
    roi: Option<String>,
    r2: Option<f64>,
    normalized: Option<f64>,
    value: Option<f64>,
}

impl Row {
    fn new(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            vertex: None,
            roi: None,
            r2: None,
            normalized: None,
            value: None,
        }
    }
}

/// CSV text of `report`; `roi_names[roi_labels[j]]` names vertex `j`.
pub fn report_csv(report: &EvalReport, roi_labels: &[u32], roi_names: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let sink = Path::new("<report>");
    let fail = |e: csv::Error| parse_err(sink, e);
    for (j, (&r2, &normalized)) in report.per_vertex_r2.iter().zip(&report.per_vertex_normalized).enumerate() {
        let roi = roi_labels
            .get(j)
            .and_then(|&l| roi_names.get(l as usize))
            .cloned();
        w.serialize(Row {
            vertex: Some(j),
            roi,
            r2: Some(r2),
            normalized,
            ..Row::new("vertex")
        })
        .map_err(fail)?;
    }
    w.serialize(Row {
        value: Some(report.overall_m),
        ..Row::new("overall_m")
    })
    .map_err(fail)?;
    w.serialize(Row {
        value: Some(report.n_excluded_vertices as f64),
        ..Row::new("n_excluded_vertices")
    })
    .map_err(fail)?;
    for (roi, &median) in &report.per_roi_median {
        w.serialize(Row {
            roi: Some(roi.clone()),
            value: Some(median),
            ..Row::new("roi_median")
        })
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| parse_err(sink, e))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a report back from [`report_csv`] output.
pub fn parse_report_csv(text: &str, path: &Path) -> Result<EvalReport> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(path, e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_err(path, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut r2 = Vec::new();
    let mut normalized = Vec::new();
    let mut overall_m = None;
    let mut n_excluded = None;
    let mut medians = BTreeMap::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| parse_err(path, e))?;
        let missing = |field: &str| parse_err(path, format!("row {}: {} row lacks {field}", i + 1, row.kind));
        match row.kind.as_str() {
            "vertex" => {
                if row.vertex != Some(r2.len()) {
                    return Err(parse_err(path, format!("row {}: vertices out of order", i + 1)));
                }
                r2.push(row.r2.ok_or_else(|| missing("r2"))?);
                normalized.push(row.normalized);
            }
            "overall_m" => overall_m = Some(row.value.ok_or_else(|| missing("value"))?),
            "n_excluded_vertices" => n_excluded = Some(row.value.ok_or_else(|| missing("value"))? as usize),
            "roi_median" => {
                let value = row.value.ok_or_else(|| missing("value"))?;
                medians.insert(row.roi.clone().ok_or_else(|| missing("roi"))?, value);
            }
            other => return Err(parse_err(path, format!("row {}: unknown kind {other:?}", i + 1))),
        }
    }
    Ok(EvalReport {
        per_vertex_r2: r2,
        per_vertex_normalized: normalized,
        overall_m: overall_m.ok_or_else(|| parse_err(path, "no overall_m row"))?,
        per_roi_median: medians,
        n_excluded_vertices: n_excluded.ok_or_else(|| parse_err(path, "no n_excluded_vertices row"))?,
    })
}

pub fn report_json(report: &EvalReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

pub fn parse_report_json(text: &str, path: &Path) -> Result<EvalReport> {
    serde_json::from_str(text).map_err(|e| parse_err(path, e))
}

/// Report file format, chosen by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

pub fn write_report(report: &EvalReport, roi_labels: &[u32], roi_names: &[String], path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report_csv(report, roi_labels, roi_names)?,
        ReportFormat::Json => report_json(report),
    };
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    match ReportFormat::from_path(path) {
        Some(ReportFormat::Csv) => parse_report_csv(&text, path),
        Some(ReportFormat::Json) => parse_report_json(&text, path),
        None => Err(parse_err(path, "report files end in .csv or .json")),
    }
}
