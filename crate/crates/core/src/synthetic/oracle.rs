//! Brute-force reference evaluation.
//!
//! Everything here is recomputed from the raw pixel arrays by the most direct
//! route: breadth-first flood fill for regions, hash sets for pixel sets,
//! all-pairs intersections and the set definitions of every metric. Nothing
//! from the labeling, overlap, region or baseline modules is used, so
//! agreement with [`crate::harness::evaluate_pair`] is a real cross-check.

use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::baseline::{ApResult, PerselloError, PqResult, ThresholdPrecision};
use crate::error::{Error, Result};
use crate::harness::{
    ClassRecord, ConfigEcho, EvalConfig, ImageRecord, Metric, MetricReport, OverRecord, RegionRecord, UnderRecord,
};
use crate::mask::{ConfidenceMap, Connectivity, LabelMap};

type PixelSet = HashSet<usize>;

/// Maximal connected sets of pixels equal to `value`, ordered by their
/// first pixel in raster order; each list is sorted.
fn flood_regions(data: &[u16], width: usize, height: usize, value: u16, conn: Connectivity) -> Vec<Vec<usize>> {
    let four: &[(isize, isize)] = &[(-1, 0), (1, 0), (0, -1), (0, 1)];
    let eight: &[(isize, isize)] = &[(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];
    let steps = match conn {
        Connectivity::Four => four,
        Connectivity::Eight => eight,
    };
    let mut seen = vec![false; data.len()];
    let mut regions = Vec::new();
    for start in 0..data.len() {
        if seen[start] || data[start] != value {
            continue;
        }
        let mut region = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            region.push(i);
            let (r, c) = ((i / width) as isize, (i % width) as isize);
            for &(dr, dc) in steps {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= height as isize || cc >= width as isize {
                    continue;
                }
                let j = rr as usize * width + cc as usize;
                if !seen[j] && data[j] == value {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        region.sort_unstable();
        regions.push(region);
    }
    regions
}

fn mean_confidence(pixels: &[usize], conf: &ConfidenceMap) -> f64 {
    let mut sum = 0.0;
    for &p in pixels {
        sum += conf.data()[p];
    }
    sum / pixels.len() as f64
}

/// Sum of exact fractions, converted once at the end.
#[derive(Default)]
struct FractionSum(BTreeMap<u64, u64>);

impl FractionSum {
    fn add(&mut self, num: u64, den: u64) {
        *self.0.entry(den).or_default() += num;
    }

    fn value(&self) -> f64 {
        self.0.iter().map(|(&d, &n)| n as f64 / d as f64).sum()
    }
}

/// `sum over x in G ∪ S of |R(ref, x) \ R(seg, x)| / |R(ref, x)|`, where the
/// region of `x` in a map is that map's class set if it contains `x` and empty
/// otherwise; an empty reference region counts 1.
fn lre_sum(reference: &PixelSet, seg: &PixelSet, union: &PixelSet) -> f64 {
    let ref_minus_seg = reference.difference(seg).count() as u64;
    let mut sum = FractionSum::default();
    for x in union {
        let in_ref = reference.contains(x);
        let in_seg = seg.contains(x);
        if !in_ref {
            sum.add(1, 1);
        } else if in_seg {
            sum.add(ref_minus_seg, reference.len() as u64);
        } else {
            // R(seg, x) is empty, so the whole reference region differs
            sum.add(reference.len() as u64, reference.len() as u64);
        }
    }
    sum.value()
}

struct ClassRegions {
    gt: Vec<PixelSet>,
    pred: Vec<PixelSet>,
    /// `inter[g][s]`
    inter: Vec<Vec<u64>>,
    union: Vec<Vec<u64>>,
}

fn class_regions(gt: &LabelMap, pred: &[u16], class: u16, conn: Connectivity) -> ClassRegions {
    let (w, h) = (gt.width(), gt.height());
    let to_sets = |v: Vec<Vec<usize>>| -> Vec<PixelSet> { v.into_iter().map(|r| r.into_iter().collect()).collect() };
    let gt_r = to_sets(flood_regions(gt.data(), w, h, class, conn));
    let pred_r = to_sets(flood_regions(pred, w, h, class, conn));
    let inter = gt_r
        .iter()
        .map(|g| pred_r.iter().map(|s| g.intersection(s).count() as u64).collect())
        .collect();
    let union = gt_r
        .iter()
        .map(|g| pred_r.iter().map(|s| g.union(s).count() as u64).collect())
        .collect();
    ClassRegions {
        gt: gt_r,
        pred: pred_r,
        inter,
        union,
    }
}

fn over_record(cr: &ClassRegions) -> OverRecord {
    let (n, m) = (cr.gt.len(), cr.pred.len());
    let mut g_o = Vec::new();
    let mut m_o = 0u64;
    for g in 0..n {
        let overlapping = (0..m).filter(|&s| cr.inter[g][s] > 0).count();
        if overlapping >= 2 {
            g_o.push(g);
            m_o += overlapping as u64 - 1;
        }
    }
    let s_o = (0..m).filter(|&s| g_o.iter().any(|&g| cr.inter[g][s] > 0)).count();
    let ror = if n == 0 || m == 0 {
        0.0
    } else {
        (g_o.len() as u64 * s_o as u64) as f64 / (n as u64 * m as u64) as f64
    };
    OverRecord {
        g_o: g_o.len() as u64,
        s_o: s_o as u64,
        m_o,
        ror,
        rom: (ror * m_o as f64).tanh(),
    }
}

fn under_record(cr: &ClassRegions) -> UnderRecord {
    let (n, m) = (cr.gt.len(), cr.pred.len());
    let mut s_u = Vec::new();
    let mut m_u = 0u64;
    for s in 0..m {
        let overlapping = (0..n).filter(|&g| cr.inter[g][s] > 0).count();
        if overlapping >= 2 {
            s_u.push(s);
            m_u += overlapping as u64 - 1;
        }
    }
    let g_u = (0..n).filter(|&g| s_u.iter().any(|&s| cr.inter[g][s] > 0)).count();
    let rur = if n == 0 || m == 0 {
        0.0
    } else {
        (s_u.len() as u64 * g_u as u64) as f64 / (m as u64 * n as u64) as f64
    };
    UnderRecord {
        g_u: g_u as u64,
        s_u: s_u.len() as u64,
        m_u,
        rur,
        rum: (rur * m_u as f64).tanh(),
    }
}

fn persello(cr: &ClassRegions) -> Option<PerselloError> {
    let n = cr.gt.len();
    if n == 0 {
        return None;
    }
    let (mut os, mut us) = (0.0, 0.0);
    for g in 0..n {
        let mut best: Option<usize> = None;
        for s in 0..cr.pred.len() {
            if cr.inter[g][s] > 0 && best.is_none_or(|b| cr.inter[g][s] > cr.inter[g][b]) {
                best = Some(s);
            }
        }
        match best {
            Some(s) => {
                let i = cr.inter[g][s] as f64;
                os += 1.0 - i / cr.gt[g].len() as f64;
                us += 1.0 - i / cr.pred[s].len() as f64;
            }
            None => {
                os += 1.0;
                us += 1.0;
            }
        }
    }
    Some(PerselloError {
        pe_os: os / n as f64,
        pe_us: us / n as f64,
    })
}

fn iou(cr: &ClassRegions, g: usize, s: usize) -> f64 {
    cr.inter[g][s] as f64 / cr.union[g][s] as f64
}

fn average_precision(cr: &ClassRegions, thresholds: &[f64], conf: Option<&[f64]>) -> Option<ApResult> {
    let (n, m) = (cr.gt.len(), cr.pred.len());
    if n == 0 && m == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..m).collect();
    match conf {
        Some(c) => order.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b))),
        None => order.sort_by(|&a, &b| cr.pred[b].len().cmp(&cr.pred[a].len()).then(a.cmp(&b))),
    }
    let mut per_threshold = Vec::new();
    for &t in thresholds {
        let mut matched = vec![false; n];
        let mut tp = 0u64;
        for &s in &order {
            let mut best: Option<usize> = None;
            for (g, &taken) in matched.iter().enumerate() {
                if taken || cr.inter[g][s] == 0 || iou(cr, g, s) < t {
                    continue;
                }
                if best.is_none_or(|b| iou(cr, g, s) > iou(cr, b, s)) {
                    best = Some(g);
                }
            }
            if let Some(g) = best {
                matched[g] = true;
                tp += 1;
            }
        }
        let precision = if m == 0 { 0.0 } else { tp as f64 / m as f64 };
        per_threshold.push(ThresholdPrecision {
            threshold: t,
            tp,
            fp: m as u64 - tp,
            fn_: n as u64 - tp,
            error: 1.0 - precision,
        });
    }
    let mut total = 0.0;
    for p in &per_threshold {
        total += p.error;
    }
    let mean_error = total / per_threshold.len() as f64;
    Some(ApResult {
        per_threshold,
        mean_error,
    })
}

fn panoptic_quality(cr: &ClassRegions) -> Option<PqResult> {
    let (n, m) = (cr.gt.len() as u64, cr.pred.len() as u64);
    if n == 0 && m == 0 {
        return None;
    }
    let mut tp = 0u64;
    let mut iou_sum = 0.0;
    for g in 0..cr.gt.len() {
        for s in 0..cr.pred.len() {
            if cr.inter[g][s] > 0 && iou(cr, g, s) > 0.5 {
                tp += 1;
                iou_sum += iou(cr, g, s);
            }
        }
    }
    let (fp, fn_) = (m - tp, n - tp);
    let pq = iou_sum / (tp as f64 + fp as f64 / 2.0 + fn_ as f64 / 2.0);
    Some(PqResult {
        tp,
        fp,
        fn_,
        iou_sum,
        error: 1.0 - pq,
    })
}

fn check_inputs(gt: &LabelMap, pred: &LabelMap, conf: Option<&ConfidenceMap>, cfg: &EvalConfig) -> Result<()> {
    cfg.validate()?;
    for m in [gt, pred] {
        if m.num_classes() != cfg.num_classes || m.ignore_id() != cfg.ignore_id {
            return Err(Error::InvalidPairing("map does not match the configuration".into()));
        }
    }
    let dims = |w: usize, h: usize| (w, h) != (gt.width(), gt.height());
    let mismatch = dims(pred.width(), pred.height()) || conf.is_some_and(|c| dims(c.width(), c.height()));
    if mismatch {
        let (got_w, got_h) = if dims(pred.width(), pred.height()) {
            (pred.width(), pred.height())
        } else {
            let c = conf.unwrap();
            (c.width(), c.height())
        };
        return Err(Error::DimensionMismatch {
            expected_w: gt.width(),
            expected_h: gt.height(),
            got_w,
            got_h,
        });
    }
    if cfg.confidence_threshold.is_some() && conf.is_none() {
        return Err(Error::UndefinedInput(
            "a confidence threshold needs a confidence map".into(),
        ));
    }
    Ok(())
}

/// Reference counterpart of [`crate::harness::evaluate_pair`].
pub fn oracle_record(
    gt: &LabelMap,
    pred: &LabelMap,
    conf: Option<&ConfidenceMap>,
    cfg: &EvalConfig,
) -> Result<ImageRecord> {
    check_inputs(gt, pred, conf, cfg)?;
    let (w, h, k) = (gt.width(), gt.height(), cfg.num_classes);
    let conn = cfg.connectivity;
    let ignore = cfg.ignore_id;

    // confidence filtering, region by region
    let mut pred_data = pred.data().to_vec();
    if let (Some(tau), Some(c)) = (cfg.confidence_threshold, conf) {
        for class in (0..k).filter(|&c| cfg.is_foreground(c)) {
            for region in flood_regions(pred.data(), w, h, class, conn) {
                if mean_confidence(&region, c) < tau {
                    for p in region {
                        pred_data[p] = k;
                    }
                }
            }
        }
    }

    let valid: Vec<usize> = (0..w * h).filter(|&i| gt.data()[i] != ignore).collect();
    let correct = valid.iter().filter(|&&i| pred_data[i] == gt.data()[i]).count() as u64;

    let mut classes = Vec::new();
    let mut predicted_regions = 0u64;
    for class in 0..k {
        let g_set: PixelSet = valid.iter().copied().filter(|&i| gt.data()[i] == class).collect();
        let s_set: PixelSet = valid.iter().copied().filter(|&i| pred_data[i] == class).collect();
        let union: PixelSet = g_set.union(&s_set).copied().collect();
        let inter = g_set.intersection(&s_set).count() as u64;
        let cr = class_regions(gt, &pred_data, class, conn);
        let foreground = cfg.is_foreground(class);
        if foreground {
            predicted_regions += cr.pred.len() as u64;
        }
        if union.is_empty() && cr.gt.is_empty() && cr.pred.is_empty() {
            continue;
        }
        let (ga, pa, u) = (g_set.len() as u64, s_set.len() as u64, union.len() as u64);
        let iou_error = (cfg.wants(Metric::Iou) && u > 0).then(|| 1.0 - inter as f64 / u as f64);
        let dice_error = (cfg.wants(Metric::Dice) && ga + pa > 0).then(|| 1.0 - 2.0 * inter as f64 / (ga + pa) as f64);
        let gce = (cfg.wants(Metric::Gce) && foreground && u > 0).then(|| {
            let forward = lre_sum(&g_set, &s_set, &union);
            let backward = lre_sum(&s_set, &g_set, &union);
            forward.min(backward) / u as f64
        });
        let regions = foreground.then(|| {
            let confidences: Option<Vec<f64>> = conf.map(|c| {
                flood_regions(&pred_data, w, h, class, conn)
                    .iter()
                    .map(|r| mean_confidence(r, c))
                    .collect()
            });
            RegionRecord {
                n: cr.gt.len() as u64,
                m: cr.pred.len() as u64,
                over: cfg.wants(Metric::Rom).then(|| over_record(&cr)),
                under: cfg.wants(Metric::Rum).then(|| under_record(&cr)),
                persello: if cfg.wants(Metric::Pe) { persello(&cr) } else { None },
                ap: if cfg.wants(Metric::Ap) {
                    average_precision(&cr, &cfg.ap_thresholds, confidences.as_deref())
                } else {
                    None
                },
                pq: if cfg.wants(Metric::Pq) {
                    panoptic_quality(&cr)
                } else {
                    None
                },
            }
        });
        classes.push(ClassRecord {
            class_id: class,
            gt_pixels: ga,
            pred_pixels: pa,
            intersection: inter,
            union: u,
            iou_error,
            dice_error,
            gce,
            regions,
        });
    }
    let valid_pixels = valid.len() as u64;
    let pixel_error =
        (cfg.wants(Metric::Pixel) && valid_pixels > 0).then(|| (valid_pixels - correct) as f64 / valid_pixels as f64);
    Ok(ImageRecord {
        image_id: String::new(),
        valid_pixels,
        correct_pixels: correct,
        pixel_error,
        predicted_regions,
        classes,
    })
}

/// Single-image report computed by the reference path.
pub fn oracle_metrics(
    gt: &LabelMap,
    pred: &LabelMap,
    conf: Option<&ConfidenceMap>,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    let record = oracle_record(gt, pred, conf, cfg)?;
    Ok(MetricReport::from_records(
        vec![record],
        ConfigEcho::new(cfg, cfg.confidence_threshold.into_iter().collect()),
    ))
}
