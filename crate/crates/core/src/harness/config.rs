use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::coco_thresholds;
use crate::error::{Error, Result};
use crate::mask::{Connectivity, LabelFormat, LabelMapFormat, DEFAULT_IGNORE};

/// Selectable metric families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rom,
    Rum,
    Iou,
    Dice,
    Pixel,
    Gce,
    Pe,
    Ap,
    Pq,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Rom,
        Metric::Rum,
        Metric::Iou,
        Metric::Dice,
        Metric::Pixel,
        Metric::Gce,
        Metric::Pe,
        Metric::Ap,
        Metric::Pq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rom => "rom",
            Metric::Rum => "rum",
            Metric::Iou => "iou",
            Metric::Dice => "dice",
            Metric::Pixel => "pixel",
            Metric::Gce => "gce",
            Metric::Pe => "pe",
            Metric::Ap => "ap",
            Metric::Pq => "pq",
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a comma-separated metric list such as `rom,rum,iou`.
pub fn parse_metrics(s: &str) -> std::result::Result<BTreeSet<Metric>, String> {
    let set = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(Metric::from_str)
        .collect::<std::result::Result<BTreeSet<_>, _>>()?;
    if set.is_empty() {
        return Err("empty metric list".into());
    }
    Ok(set)
}

/// How per-image values become dataset values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Per class: mean over images where the class is applicable. Overall:
    /// unweighted mean over classes with at least one applicable image.
    #[default]
    ImageMean,
}

/// Parses a sweep given as `A:B:STEP` (inclusive of `B` up to round-off) or
/// as a comma-separated list.
pub fn parse_sweep(s: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(format!("sweep {s:?} is not A:B:STEP"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if [a, b, step].iter().any(|v| !v.is_finite()) || step <= 0.0 || b < a {
            return Err(format!("sweep {s:?} needs STEP > 0 and B >= A"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=count)
            .map(|i| {
                // snap to 12 decimals so 0.1 steps print as 0.1, 0.2, ...
                let v = a + step * i as f64;
                (v * 1e12).round() / 1e12
            })
            .collect())
    } else {
        s.split(',').map(num).collect()
    }
}

/// Evaluation settings shared by the library and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub num_classes: u16,
    /// Background class: excluded from region metrics, GCE and confidence
    /// filtering. `None` treats every class as foreground.
    pub background_id: Option<u16>,
    pub ignore_id: u16,
    pub connectivity: Connectivity,
    /// Region-confidence threshold for a plain evaluation.
    pub confidence_threshold: Option<f64>,
    /// Thresholds of a confidence sweep, strictly ascending.
    pub sweep: Option<Vec<f64>>,
    pub metrics: BTreeSet<Metric>,
    pub ap_thresholds: Vec<f64>,
    pub input_format: Option<LabelFormat>,
    pub aggregation: Aggregation,
    pub remap: Option<BTreeMap<u16, u16>>,
    pub skip_unpaired: bool,
    /// Worker count; output never depends on it.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl EvalConfig {
    pub fn new(num_classes: u16) -> Self {
        Self {
            num_classes,
            background_id: Some(0),
            ignore_id: DEFAULT_IGNORE,
            connectivity: Connectivity::default(),
            confidence_threshold: None,
            sweep: None,
            metrics: Metric::ALL.into_iter().collect(),
            ap_thresholds: coco_thresholds(),
            input_format: None,
            aggregation: Aggregation::default(),
            remap: None,
            skip_unpaired: false,
            threads: None,
        }
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }

    pub fn is_foreground(&self, class: u16) -> bool {
        Some(class) != self.background_id
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_classes;
        if k == 0 || k == u16::MAX {
            return Err(Error::Config(format!("number of classes {k} out of range")));
        }
        if let Some(b) = self.background_id {
            if b >= k {
                return Err(Error::Config(format!("background id {b} must be below {k}")));
            }
        }
        if self.ignore_id <= k {
            return Err(Error::Config(format!(
                "ignore id {} must exceed the number of classes {k}",
                self.ignore_id
            )));
        }
        if let Some(t) = self.confidence_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("confidence threshold {t} outside [0, 1]")));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return Err(Error::Config("empty sweep".into()));
            }
            if let Some(t) = sweep.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                return Err(Error::Config(format!("sweep threshold {t} outside [0, 1]")));
            }
            if sweep.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("sweep thresholds must be strictly increasing".into()));
            }
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("no metric selected".into()));
        }
        if self.wants(Metric::Ap) {
            if self.ap_thresholds.is_empty() {
                return Err(Error::Config("empty AP threshold list".into()));
            }
            if let Some(t) = self.ap_thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
                return Err(Error::Config(format!("AP threshold {t} outside (0, 1]")));
            }
        }
        if let Some(table) = &self.remap {
            if let Some((raw, v)) = table.iter().find(|(_, &v)| v >= k && v != self.ignore_id) {
                return Err(Error::Config(format!("remap {raw} -> {v} leaves the class range")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        Ok(())
    }

    pub fn label_format(&self) -> LabelMapFormat {
        LabelMapFormat {
            format: self.input_format,
            num_classes: self.num_classes,
            ignore_id: self.ignore_id,
            remap: self.remap.clone(),
        }
    }
}

/// Parses a `RAW:CLASS,RAW:CLASS` remap table.
pub fn parse_remap(s: &str) -> std::result::Result<BTreeMap<u16, u16>, String> {
    let mut table = BTreeMap::new();
    for pair in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (raw, class) = pair
            .split_once(':')
            .ok_or_else(|| format!("remap entry {pair:?} is not RAW:CLASS"))?;
        let parse = |t: &str| t.trim().parse::<u16>().map_err(|e| format!("{t:?}: {e}"));
        if table.insert(parse(raw)?, parse(class)?).is_some() {
            return Err(format!("raw value {raw} mapped twice"));
        }
    }
    Ok(table)
}
