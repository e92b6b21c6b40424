use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use rayon::prelude::*;

use super::config::EvalConfig;
use super::record::{evaluate_at, ImageRecord};
use super::report::{ConfigEcho, MetricReport, SweepPoint, SweepResult, SCHEMA_VERSION, TOOL_VERSION};
use crate::error::{Error, Result};
use crate::mask::{load_confidence_map, load_label_map, ConfidenceMap, LabelMap};

pub const THREADS_ENV: &str = "SEGMETRICS_THREADS";

/// Files of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedInput {
    pub image_id: String,
    pub gt: PathBuf,
    pub pred: PathBuf,
    pub conf: Option<PathBuf>,
}

/// An image already in memory.
#[derive(Debug, Clone)]
pub struct ImageInput {
    pub image_id: String,
    pub gt: LabelMap,
    pub pred: LabelMap,
    pub conf: Option<ConfidenceMap>,
}

fn list_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.starts_with('.') {
            continue;
        }
        if let Some(prev) = out.insert(stem.to_string(), path.clone()) {
            return Err(Error::InvalidPairing(format!(
                "{} and {} share the stem {stem:?}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(out)
}

/// Pairs files with identical stems across the directories, sorted by stem.
///
/// Files present on only one side are an error unless `skip_unpaired`, in
/// which case they are logged and dropped. Every pair needs a confidence
/// file when `conf_dir` is given.
pub fn pair_directories(
    gt_dir: &Path,
    pred_dir: &Path,
    conf_dir: Option<&Path>,
    skip_unpaired: bool,
) -> Result<Vec<PairedInput>> {
    let gt = list_by_stem(gt_dir)?;
    let pred = list_by_stem(pred_dir)?;
    let conf = conf_dir.map(list_by_stem).transpose()?;

    let mut unpaired: Vec<String> = gt
        .keys()
        .filter(|k| !pred.contains_key(*k))
        .map(|k| format!("{k} (ground truth only)"))
        .collect();
    unpaired.extend(
        pred.keys()
            .filter(|k| !gt.contains_key(*k))
            .map(|k| format!("{k} (prediction only)")),
    );
    if !unpaired.is_empty() {
        if skip_unpaired {
            for u in &unpaired {
                warn!("skipping unpaired file {u}");
            }
        } else {
            return Err(Error::Unpaired(unpaired.join(", ")));
        }
    }

    let mut pairs = Vec::new();
    for (stem, g) in &gt {
        let Some(p) = pred.get(stem) else { continue };
        let c = match &conf {
            Some(c) => Some(
                c.get(stem)
                    .cloned()
                    .ok_or_else(|| Error::Unpaired(format!("{stem}: missing confidence file")))?,
            ),
            None => None,
        };
        pairs.push(PairedInput {
            image_id: stem.clone(),
            gt: g.clone(),
            pred: p.clone(),
            conf: c,
        });
    }
    if pairs.is_empty() {
        return Err(Error::Unpaired("no ground-truth / prediction pairs found".into()));
    }
    Ok(pairs)
}

/// Reads a manifest: one image per line, `ID GT PRED [CONF]` separated by
/// whitespace. Relative paths resolve against the manifest's directory; `#`
/// starts a comment. The result is sorted by id.
pub fn read_manifest(path: &Path) -> Result<Vec<PairedInput>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::Config(format!(
                "{}:{}: expected `ID GT PRED [CONF]`",
                path.display(),
                no + 1
            )));
        }
        pairs.push(PairedInput {
            image_id: fields[0].to_string(),
            gt: base.join(fields[1]),
            pred: base.join(fields[2]),
            conf: fields.get(3).map(|c| base.join(c)),
        });
    }
    pairs.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    if let Some(w) = pairs.windows(2).find(|w| w[0].image_id == w[1].image_id) {
        return Err(Error::Config(format!(
            "duplicate image id {:?} in manifest",
            w[0].image_id
        )));
    }
    if pairs.is_empty() {
        return Err(Error::Unpaired("manifest lists no images".into()));
    }
    Ok(pairs)
}

/// Worker count from the configuration, else `SEGMETRICS_THREADS`, else the
/// number of CPUs.
pub fn resolve_threads(cfg: &EvalConfig) -> Result<usize> {
    if let Some(n) = cfg.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run_parallel<T: Send + Sync, R: Send>(
    cfg: &EvalConfig,
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    let threads = resolve_threads(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    debug!("evaluating {} images on {threads} threads", items.len());
    // indexed collect keeps input order whatever the scheduling
    pool.install(|| items.par_iter().map(f).collect())
}

fn plain_thresholds(cfg: &EvalConfig) -> Vec<f64> {
    cfg.confidence_threshold.into_iter().collect()
}

fn load_pair(p: &PairedInput, cfg: &EvalConfig) -> Result<(LabelMap, LabelMap, Option<ConfidenceMap>)> {
    let fmt = cfg.label_format();
    let gt = load_label_map(&p.gt, &fmt)?;
    let pred = load_label_map(&p.pred, &fmt)?;
    let conf = p.conf.as_ref().map(load_confidence_map).transpose()?;
    Ok((gt, pred, conf))
}

fn with_context<T>(id: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidPairing(m) => Error::InvalidPairing(format!("{id}: {m}")),
        other => other,
    })
}

fn sorted_ids<T>(items: &[T], id: impl Fn(&T) -> &str) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| id(&items[a]).cmp(id(&items[b])));
    if let Some(w) = order.windows(2).find(|w| id(&items[w[0]]) == id(&items[w[1]])) {
        return Err(Error::InvalidPairing(format!(
            "duplicate image id {:?}",
            id(&items[w[0]])
        )));
    }
    if order.is_empty() {
        return Err(Error::Unpaired("no images to evaluate".into()));
    }
    Ok(order)
}

/// Evaluates in-memory images. Records are ordered by image id regardless of
/// input order.
pub fn evaluate_images(images: &[ImageInput], cfg: &EvalConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let order = sorted_ids(images, |i| &i.image_id)?;
    let records = run_parallel(cfg, &order, |&i| {
        let img = &images[i];
        let r = evaluate_at(&img.gt, &img.pred, img.conf.as_ref(), cfg.confidence_threshold, cfg);
        let mut rec = with_context(&img.image_id, r)?;
        rec.image_id = img.image_id.clone();
        Ok(rec)
    })?;
    Ok(MetricReport::from_records(
        records,
        ConfigEcho::new(cfg, plain_thresholds(cfg)),
    ))
}

/// Loads and evaluates every pair; each image is read by the worker that
/// evaluates it, so memory stays bounded by the thread count.
pub fn evaluate_dataset(pairs: &[PairedInput], cfg: &EvalConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let order = sorted_ids(pairs, |p| &p.image_id)?;
    let records = run_parallel(cfg, &order, |&i| {
        let p = &pairs[i];
        let (gt, pred, conf) = load_pair(p, cfg)?;
        let r = evaluate_at(&gt, &pred, conf.as_ref(), cfg.confidence_threshold, cfg);
        let mut rec = with_context(&p.image_id, r)?;
        rec.image_id = p.image_id.clone();
        Ok(rec)
    })?;
    Ok(MetricReport::from_records(
        records,
        ConfigEcho::new(cfg, plain_thresholds(cfg)),
    ))
}

fn sweep_records(
    id: &str,
    gt: &LabelMap,
    pred: &LabelMap,
    conf: &ConfidenceMap,
    thresholds: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<ImageRecord>> {
    thresholds
        .iter()
        .map(|&t| {
            let mut rec = with_context(id, evaluate_at(gt, pred, Some(conf), Some(t), cfg))?;
            rec.image_id = id.to_string();
            Ok(rec)
        })
        .collect()
}

fn assemble_sweep(
    per_image: Vec<Vec<ImageRecord>>,
    thresholds: &[f64],
    cfg: &EvalConfig,
) -> (SweepResult, Vec<MetricReport>) {
    let images = per_image.len() as u64;
    let mut columns: Vec<Vec<ImageRecord>> = vec![Vec::with_capacity(per_image.len()); thresholds.len()];
    for recs in per_image {
        for (col, r) in columns.iter_mut().zip(recs) {
            col.push(r);
        }
    }
    let reports: Vec<MetricReport> = columns
        .into_iter()
        .zip(thresholds)
        .map(|(recs, &t)| MetricReport::from_records(recs, ConfigEcho::new(cfg, vec![t])))
        .collect();
    let points = reports
        .iter()
        .zip(thresholds)
        .map(|(r, &t)| SweepPoint::from_report(t, r))
        .collect();
    let sweep = SweepResult {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config: ConfigEcho::new(cfg, thresholds.to_vec()),
        images,
        points,
    };
    (sweep, reports)
}

fn sweep_thresholds(cfg: &EvalConfig) -> Result<Vec<f64>> {
    cfg.sweep
        .clone()
        .ok_or_else(|| Error::Config("no sweep thresholds configured".into()))
}

/// One full evaluation per sweep threshold. Each image is loaded once. Also
/// returns the per-threshold dataset reports.
pub fn sweep_confidence(pairs: &[PairedInput], cfg: &EvalConfig) -> Result<(SweepResult, Vec<MetricReport>)> {
    cfg.validate()?;
    let thresholds = sweep_thresholds(cfg)?;
    let order = sorted_ids(pairs, |p| &p.image_id)?;
    let per_image = run_parallel(cfg, &order, |&i| {
        let p = &pairs[i];
        if p.conf.is_none() {
            return Err(Error::Unpaired(format!("{}: missing confidence file", p.image_id)));
        }
        let (gt, pred, conf) = load_pair(p, cfg)?;
        sweep_records(&p.image_id, &gt, &pred, conf.as_ref().unwrap(), &thresholds, cfg)
    })?;
    Ok(assemble_sweep(per_image, &thresholds, cfg))
}

/// In-memory counterpart of [`sweep_confidence`].
pub fn sweep_images(images: &[ImageInput], cfg: &EvalConfig) -> Result<(SweepResult, Vec<MetricReport>)> {
    cfg.validate()?;
    let thresholds = sweep_thresholds(cfg)?;
    let order = sorted_ids(images, |i| &i.image_id)?;
    let per_image = run_parallel(cfg, &order, |&i| {
        let img = &images[i];
        let conf = img
            .conf
            .as_ref()
            .ok_or_else(|| Error::Unpaired(format!("{}: missing confidence map", img.image_id)))?;
        sweep_records(&img.image_id, &img.gt, &img.pred, conf, &thresholds, cfg)
    })?;
    Ok(assemble_sweep(per_image, &thresholds, cfg))
}
