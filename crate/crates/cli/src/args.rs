use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use segmetrics::harness::{parse_metrics, parse_remap, parse_sweep, EvalConfig, Metric, ReportFormat};
use segmetrics::mask::LabelFormat;
use segmetrics::Connectivity;

#[derive(Debug, Parser)]
#[command(
    name = "segmetrics",
    version,
    about = "Region-aware evaluation of semantic segmentation"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate predictions against ground truth and write a report.
    Eval(Box<EvalArgs>),
    /// Write the 16 canonical panels as PNG label maps.
    Panels {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Compare the evaluation pipeline with the brute-force oracle on
    /// seeded random maps.
    Check {
        #[arg(long, default_value_t = 200)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        start: u64,
        /// Side length of the square maps.
        #[arg(long, default_value_t = 48, value_parser = clap::value_parser!(u64).range(8..=4096))]
        size: u64,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(2..))]
        classes: u16,
        /// Float tolerance.
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailAbove {
    pub metric: &'static str,
    pub limit: f64,
}

/// Report keys accepted by `--fail-above`, with short aliases.
const GATE_KEYS: &[(&str, &str)] = &[
    ("rom", "rom"),
    ("rum", "rum"),
    ("iou", "iou_error"),
    ("iou_error", "iou_error"),
    ("dice", "dice_error"),
    ("dice_error", "dice_error"),
    ("pixel", "pixel_error"),
    ("pixel_error", "pixel_error"),
    ("gce", "gce"),
    ("pe_os", "pe_os"),
    ("pe_us", "pe_us"),
    ("ap", "ap_error"),
    ("ap_error", "ap_error"),
    ("ap50", "ap50_error"),
    ("ap50_error", "ap50_error"),
    ("ap75", "ap75_error"),
    ("ap75_error", "ap75_error"),
    ("pq", "pq_error"),
    ("pq_error", "pq_error"),
];

fn parse_fail_above(s: &str) -> Result<FailAbove, String> {
    let (name, value) = s.split_once('=').ok_or("expected METRIC=VALUE")?;
    let metric = GATE_KEYS
        .iter()
        .find(|(k, _)| *k == name.trim())
        .map(|(_, v)| *v)
        .ok_or_else(|| format!("unknown metric {name:?}"))?;
    let limit: f64 = value.trim().parse().map_err(|_| format!("bad limit {value:?}"))?;
    Ok(FailAbove { metric, limit })
}

/// Background class, `None` for `--background none`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background(pub Option<u16>);

fn parse_background(s: &str) -> Result<Background, String> {
    match s {
        "none" => Ok(Background(None)),
        _ => s
            .parse()
            .map(|b| Background(Some(b)))
            .map_err(|_| format!("expected a class id or `none`, got {s:?}")),
    }
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    match s {
        "4" => Ok(Connectivity::Four),
        "8" => Ok(Connectivity::Eight),
        _ => Err(format!("connectivity must be 4 or 8, got {s:?}")),
    }
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("bad threshold {s:?}"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("threshold {t} outside [0, 1]"))
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// key=value file whose keys are long flag names; flags on the command
    /// line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(
        long,
        value_name = "DIR",
        required_unless_present = "manifest",
        conflicts_with = "manifest"
    )]
    pub gt: Option<PathBuf>,
    #[arg(
        long,
        value_name = "DIR",
        required_unless_present = "manifest",
        conflicts_with = "manifest"
    )]
    pub pred: Option<PathBuf>,
    /// Per-pixel confidence maps, paired by file stem.
    #[arg(long, value_name = "DIR", conflicts_with = "manifest")]
    pub conf: Option<PathBuf>,
    /// Lines of `ID GT PRED [CONF]` instead of directories.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u16).range(1..))]
    pub classes: u16,
    #[arg(long, default_value_t = 255)]
    pub ignore: u16,
    /// Background class id, or `none`.
    #[arg(long, default_value = "0", value_parser = parse_background)]
    pub background: Background,
    #[arg(long, default_value = "8", value_parser = parse_connectivity)]
    pub connectivity: Connectivity,
    #[arg(long, value_parser = parse_threshold, conflicts_with = "sweep")]
    pub threshold: Option<f64>,
    /// `A:B:STEP` or a comma-separated list.
    #[arg(long, value_parser = sweep_list)]
    pub sweep: Option<Sweep>,
    #[arg(long, value_parser = parse_metrics)]
    pub metrics: Option<BTreeSet<Metric>>,
    /// Override detection by file extension.
    #[arg(long, value_name = "png|binary")]
    pub input_format: Option<LabelFormat>,
    /// Raw value to class table, `RAW:CLASS,...`.
    #[arg(long, value_parser = parse_remap)]
    pub remap: Option<std::collections::BTreeMap<u16, u16>>,
    /// Drop files without a counterpart instead of failing.
    #[arg(long)]
    pub skip_unpaired: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    #[arg(long, default_value = "json", value_parser = parse_format)]
    pub format: ReportFormat,
    /// Output file, `-` for stdout.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Exit with status 3 when an overall metric exceeds the limit.
    #[arg(long, value_name = "METRIC=V", value_parser = parse_fail_above)]
    pub fail_above: Vec<FailAbove>,
}

/// Sweep thresholds; a newtype so clap takes the list as one value.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep(pub Vec<f64>);

fn sweep_list(s: &str) -> Result<Sweep, String> {
    parse_sweep(s).map(Sweep)
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

impl EvalArgs {
    pub fn to_config(&self) -> EvalConfig {
        let mut cfg = EvalConfig::new(self.classes);
        cfg.ignore_id = self.ignore;
        cfg.background_id = self.background.0;
        cfg.connectivity = self.connectivity;
        cfg.confidence_threshold = self.threshold;
        cfg.sweep = self.sweep.as_ref().map(|s| s.0.clone());
        if let Some(m) = &self.metrics {
            cfg.metrics = m.clone();
        }
        cfg.input_format = self.input_format;
        cfg.remap = self.remap.clone();
        cfg.skip_unpaired = self.skip_unpaired;
        cfg.threads = self.threads.map(|t| t as usize);
        cfg
    }
}

/// Flags without a value; in a config file they take `true` or `false`.
const SWITCHES: &[&str] = &["skip-unpaired"];

/// Turns `key = value` lines into `--key value` arguments. Blank lines and
/// `#` comments are skipped; underscores in keys become dashes.
pub fn config_file_args(path: &Path) -> Result<Vec<OsString>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), no + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(format!("{}:{}: config files cannot nest", path.display(), no + 1));
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" => out.push(format!("--{key}").into()),
                "false" => {}
                _ => return Err(format!("{}:{}: {key} takes true or false", path.display(), no + 1)),
            }
        } else {
            out.push(format!("--{key}").into());
            out.push(value.into());
        }
    }
    Ok(out)
}

/// Splices the arguments of an `eval --config FILE` right after the
/// subcommand, so later command-line flags override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(sub) = args.iter().position(|a| a == "eval") else {
        return Ok(args);
    };
    let mut file = None;
    for (i, a) in args.iter().enumerate().skip(sub + 1) {
        let s = a.to_string_lossy();
        if s == "--config" {
            file = args.get(i + 1).map(PathBuf::from);
        } else if let Some(v) = s.strip_prefix("--config=") {
            file = Some(PathBuf::from(v));
        }
    }
    let Some(file) = file else {
        return Ok(args);
    };
    let extra = config_file_args(&file)?;
    let mut out = args[..=sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}
