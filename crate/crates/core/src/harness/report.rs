use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{Aggregation, EvalConfig, Metric};
use super::record::ImageRecord;
use crate::error::{Error, Result};
use crate::mask::Connectivity;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings that influence the numbers, copied into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub num_classes: u16,
    pub background_id: Option<u16>,
    pub ignore_id: u16,
    pub connectivity: Connectivity,
    /// Confidence thresholds applied: empty for none, one for a plain run.
    pub thresholds: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub ap_thresholds: Vec<f64>,
    pub aggregation: Aggregation,
}

impl ConfigEcho {
    pub fn new(cfg: &EvalConfig, thresholds: Vec<f64>) -> Self {
        Self {
            num_classes: cfg.num_classes,
            background_id: cfg.background_id,
            ignore_id: cfg.ignore_id,
            connectivity: cfg.connectivity,
            thresholds,
            metrics: cfg.metrics.iter().copied().collect(),
            ap_thresholds: cfg.ap_thresholds.clone(),
            aggregation: cfg.aggregation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregate {
    pub class_id: u16,
    /// Images where the class is applicable.
    pub images: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ConfigEcho,
    pub images: Vec<ImageRecord>,
    pub classes: Vec<ClassAggregate>,
    pub overall: BTreeMap<String, f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl MetricReport {
    /// Aggregates per-image records, which must already be in output order.
    pub fn from_records(images: Vec<ImageRecord>, config: ConfigEcho) -> Self {
        let mut per_class: BTreeMap<u16, (u64, BTreeMap<&'static str, Vec<f64>>)> = BTreeMap::new();
        for img in &images {
            for c in &img.classes {
                let entry = per_class.entry(c.class_id).or_default();
                entry.0 += 1;
                for (name, v) in c.scalars() {
                    entry.1.entry(name).or_default().push(v);
                }
            }
        }
        let classes: Vec<ClassAggregate> = per_class
            .into_iter()
            .map(|(class_id, (n, values))| ClassAggregate {
                class_id,
                images: n,
                metrics: values
                    .into_iter()
                    .filter_map(|(k, v)| mean(&v).map(|m| (k.to_string(), m)))
                    .collect(),
            })
            .collect();

        let mut pooled: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for c in &classes {
            for (k, v) in &c.metrics {
                pooled.entry(k.clone()).or_default().push(*v);
            }
        }
        let mut overall: BTreeMap<String, f64> = pooled
            .into_iter()
            .filter_map(|(k, v)| mean(&v).map(|m| (k, m)))
            .collect();
        let pixel: Vec<f64> = images.iter().filter_map(|i| i.pixel_error).collect();
        if let Some(m) = mean(&pixel) {
            overall.insert("pixel_error".into(), m);
        }
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            config,
            images,
            classes,
            overall,
        }
    }

    pub fn class(&self, class_id: u16) -> Option<&ClassAggregate> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }
}

/// One threshold of a confidence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub rom_error: Option<f64>,
    pub rum_error: Option<f64>,
    pub iou_error: Option<f64>,
    pub dice_error: Option<f64>,
    pub pixel_error: Option<f64>,
    /// Foreground predicted regions summed over the dataset.
    pub predicted_regions: u64,
}

impl SweepPoint {
    pub fn from_report(threshold: f64, report: &MetricReport) -> Self {
        let get = |k: &str| report.overall.get(k).copied();
        Self {
            threshold,
            rom_error: get("rom"),
            rum_error: get("rum"),
            iou_error: get("iou_error"),
            dice_error: get("dice_error"),
            pixel_error: get("pixel_error"),
            predicted_regions: report.images.iter().map(|i| i.predicted_regions).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ConfigEcho,
    pub images: u64,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub const OVERALL_ROW: &str = "__overall__";
pub const CLASS_MEAN_ROW: &str = "__class_mean__";

/// CSV metric columns, in order.
pub const CSV_METRICS: [&str; 12] = [
    "pixel_error",
    "iou_error",
    "dice_error",
    "gce",
    "rom",
    "rum",
    "pe_os",
    "pe_us",
    "ap50_error",
    "ap75_error",
    "ap_error",
    "pq_error",
];

const CSV_COUNTS: [&str; 12] = [
    "gt_pixels",
    "pred_pixels",
    "intersection",
    "union",
    "n",
    "m",
    "g_o",
    "s_o",
    "m_o",
    "g_u",
    "s_u",
    "m_u",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Header plus one row per (image, applicable class), one row per class
/// aggregate and a final overall row.
pub fn report_rows(report: &MetricReport) -> Vec<Vec<String>> {
    let mut header = vec!["schema_version".to_string(), "image_id".into(), "class_id".into()];
    header.extend(CSV_COUNTS.iter().map(|s| s.to_string()));
    header.extend(CSV_METRICS.iter().map(|s| s.to_string()));
    let mut rows = vec![header];
    let version = report.schema_version.to_string();

    for img in &report.images {
        for c in &img.classes {
            let r = c.regions.as_ref();
            let over = r.and_then(|r| r.over);
            let under = r.and_then(|r| r.under);
            let mut row = vec![version.clone(), img.image_id.clone(), c.class_id.to_string()];
            row.extend(
                [
                    Some(c.gt_pixels),
                    Some(c.pred_pixels),
                    Some(c.intersection),
                    Some(c.union),
                    r.map(|r| r.n),
                    r.map(|r| r.m),
                    over.map(|o| o.g_o),
                    over.map(|o| o.s_o),
                    over.map(|o| o.m_o),
                    under.map(|u| u.g_u),
                    under.map(|u| u.s_u),
                    under.map(|u| u.m_u),
                ]
                .map(cell),
            );
            let scalars = c.scalars();
            row.push(cell(img.pixel_error));
            row.extend(CSV_METRICS[1..].iter().map(|k| cell(scalars.get(k))));
            rows.push(row);
        }
    }
    let blank_counts = || std::iter::repeat_n(String::new(), CSV_COUNTS.len());
    for c in &report.classes {
        let mut row = vec![version.clone(), CLASS_MEAN_ROW.to_string(), c.class_id.to_string()];
        row.extend(blank_counts());
        row.push(String::new());
        row.extend(CSV_METRICS[1..].iter().map(|k| cell(c.metrics.get(*k))));
        rows.push(row);
    }
    let mut row = vec![version, OVERALL_ROW.to_string(), String::new()];
    row.extend(blank_counts());
    row.extend(CSV_METRICS.iter().map(|k| cell(report.overall.get(*k))));
    rows.push(row);
    rows
}

pub fn sweep_rows(sweep: &SweepResult) -> Vec<Vec<String>> {
    let mut rows = vec![[
        "schema_version",
        "threshold",
        "rom_error",
        "rum_error",
        "iou_error",
        "dice_error",
        "pixel_error",
        "predicted_regions",
    ]
    .map(String::from)
    .to_vec()];
    for p in &sweep.points {
        rows.push(vec![
            sweep.schema_version.to_string(),
            p.threshold.to_string(),
            cell(p.rom_error),
            cell(p.rum_error),
            cell(p.iou_error),
            cell(p.dice_error),
            cell(p.pixel_error),
            p.predicted_regions.to_string(),
        ]);
    }
    rows
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn to_csv(rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r).map_err(|e| Error::Serialize(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

/// Renders a report in memory.
pub fn render_report(report: &MetricReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => to_csv(&report_rows(report)),
    }
}

pub fn render_sweep(sweep: &SweepResult, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(sweep),
        ReportFormat::Csv => to_csv(&sweep_rows(sweep)),
    }
}

fn write_text(text: &str, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn emit_report(report: &MetricReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    write_text(&render_report(report, format)?, path.as_ref())
}

pub fn emit_sweep(sweep: &SweepResult, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    write_text(&render_sweep(sweep, format)?, path.as_ref())
}

pub fn parse_report_json(text: &str) -> Result<MetricReport> {
    serde_json::from_str(text).map_err(|e| Error::Serialize(e.to_string()))
}
