//! Batch evaluation: per-image records, dataset aggregation, confidence
//! sweeps and JSON / CSV reports.
//!
//! Images are evaluated in parallel; records are always ordered by image id
//! and reduced sequentially, so the output does not depend on the thread
//! count.

mod config;
mod dataset;
mod record;
mod report;

pub use config::{parse_metrics, parse_remap, parse_sweep, Aggregation, EvalConfig, Metric};
pub use dataset::{
    evaluate_dataset, evaluate_images, pair_directories, read_manifest, resolve_threads, sweep_confidence,
    sweep_images, ImageInput, PairedInput, THREADS_ENV,
};
pub use record::{evaluate_pair, ClassRecord, ImageRecord, OverRecord, RegionRecord, UnderRecord};
pub use report::{
    emit_report, emit_sweep, parse_report_json, render_report, render_sweep, report_rows, sweep_rows, ClassAggregate,
    ConfigEcho, MetricReport, ReportFormat, SweepPoint, SweepResult, CLASS_MEAN_ROW, CSV_METRICS, OVERALL_ROW,
    SCHEMA_VERSION, TOOL_VERSION,
};
