//! Metric report serialization: JSON and long-format CSV, six decimals,
//! absent values as `null` / an empty cell.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{EvalMode, MetricsReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        _ => "null".into(),
    }
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        _ => String::new(),
    }
}

fn json_map(map: &BTreeMap<u32, Option<f64>>) -> String {
    if map.is_empty() {
        return "{}".into();
    }
    let body: Vec<String> = map
        .iter()
        .map(|(k, v)| format!("    \"{k}\": {}", num(*v)))
        .collect();
    format!("{{\n{}\n  }}", body.join(",\n"))
}

pub fn report_to_json(r: &MetricsReport) -> String {
    let mode = match r.mode {
        Some(EvalMode::Binary) => "\"binary\"",
        Some(EvalMode::Multiclass) => "\"multiclass\"",
        None => "null",
    };
    let tps = r.tps.map_or("null".to_string(), |t| t.to_string());
    let fields = [
        ("mode", mode.to_string()),
        ("images", r.images.to_string()),
        ("iou_binary", num(r.iou_binary)),
        ("per_class_iou", json_map(&r.per_class_iou)),
        ("miou3", num(r.miou3)),
        ("miou5", num(r.miou5)),
        ("ap50", num(r.ap50)),
        ("ap50_95", num(r.ap50_95)),
        ("per_class_ap50", json_map(&r.per_class_ap50)),
        ("per_class_ap50_95", json_map(&r.per_class_ap50_95)),
        ("map50_3", num(r.map50_3)),
        ("map50_5", num(r.map50_5)),
        ("map50_95", num(r.map50_95)),
        ("tps", tps),
    ];
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("  \"{k}\": {v}"))
        .collect();
    format!("{{\n{}\n}}\n", body.join(",\n"))
}

/// Rows `metric,class,value`. An empty report (no mode) yields only the
/// header; binary reports omit the per-class rows.
pub fn report_to_csv(r: &MetricsReport) -> String {
    let mut out = String::from("metric,class,value\n");
    let Some(mode) = r.mode else { return out };
    let mut row = |metric: &str, class: Option<u32>, value: String| {
        let class = class.map(|c| c.to_string()).unwrap_or_default();
        writeln!(out, "{metric},{class},{value}").expect("string write");
    };
    row("iou_binary", None, cell(r.iou_binary));
    row("ap50", None, cell(r.ap50));
    row("ap50_95", None, cell(r.ap50_95));
    row(
        "tps",
        None,
        r.tps.map(|t| t.to_string()).unwrap_or_default(),
    );
    if mode == EvalMode::Multiclass {
        row("miou3", None, cell(r.miou3));
        row("miou5", None, cell(r.miou5));
        row("map50_3", None, cell(r.map50_3));
        row("map50_5", None, cell(r.map50_5));
        row("map50_95", None, cell(r.map50_95));
        for (name, map) in [
            ("class_iou", &r.per_class_iou),
            ("class_ap50", &r.per_class_ap50),
            ("class_ap50_95", &r.per_class_ap50_95),
        ] {
            for (&c, &v) in map {
                row(name, Some(c), cell(v));
            }
        }
    }
    out
}

pub fn write_report(r: &MetricsReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report_to_json(r),
        ReportFormat::Csv => report_to_csv(r),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(text: &str) -> Result<MetricsReport> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("metrics report: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only_csv() {
        assert_eq!(
            report_to_csv(&MetricsReport::default()),
            "metric,class,value\n"
        );
    }

    #[test]
    fn absent_class_serializes_as_null() {
        let r = MetricsReport {
            mode: Some(EvalMode::Multiclass),
            images: 1,
            iou_binary: Some(0.5),
            per_class_iou: BTreeMap::from([(1, Some(1.0 / 3.0)), (4, None)]),
            ..Default::default()
        };
        let json = report_to_json(&r);
        assert!(json.contains("\"1\": 0.333333"));
        assert!(json.contains("\"4\": null"));
        assert!(json.contains("\"miou3\": null"));
        let csv = report_to_csv(&r);
        assert!(csv.contains("class_iou,1,0.333333\n"));
        assert!(csv.contains("class_iou,4,\n"));
        assert!(csv.contains("iou_binary,,0.500000\n"));
    }

    #[test]
    fn single_class_roundtrip() {
        let r = MetricsReport {
            mode: Some(EvalMode::Multiclass),
            images: 2,
            iou_binary: Some(0.75),
            per_class_iou: BTreeMap::from([(2, Some(0.125))]),
            miou3: Some(0.125),
            miou5: Some(0.125),
            ap50: Some(0.5),
            ap50_95: Some(0.25),
            per_class_ap50: BTreeMap::from([(2, Some(0.5))]),
            per_class_ap50_95: BTreeMap::from([(2, None)]),
            map50_3: Some(0.5),
            map50_5: Some(0.5),
            map50_95: None,
            tps: Some(7),
        };
        let back = read_report_json(&report_to_json(&r)).unwrap();
        assert_eq!(back, r);
    }
}
