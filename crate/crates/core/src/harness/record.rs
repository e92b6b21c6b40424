use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{EvalConfig, Metric};
use crate::baseline::{self, ApResult, ClassPixelStats, PerselloError, PqResult};
use crate::error::{Error, Result};
use crate::mask::{overlap_graphs, ConfidenceMap, LabelMap, Labeling, OverlapGraph};
use crate::region::{self, component_confidences};

/// Over-segmentation counts; `rom = tanh(g_o * s_o / (n * m) * m_o)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverRecord {
    pub g_o: u64,
    pub s_o: u64,
    pub m_o: u64,
    pub ror: f64,
    pub rom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnderRecord {
    pub g_u: u64,
    pub s_u: u64,
    pub m_u: u64,
    pub rur: f64,
    pub rum: f64,
}

/// Region-level results of one foreground class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    /// Ground-truth regions.
    pub n: u64,
    /// Predicted regions.
    pub m: u64,
    pub over: Option<OverRecord>,
    pub under: Option<UnderRecord>,
    pub persello: Option<PerselloError>,
    pub ap: Option<ApResult>,
    pub pq: Option<PqResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub class_id: u16,
    pub gt_pixels: u64,
    pub pred_pixels: u64,
    pub intersection: u64,
    pub union: u64,
    pub iou_error: Option<f64>,
    pub dice_error: Option<f64>,
    pub gce: Option<f64>,
    /// `None` for the background class.
    pub regions: Option<RegionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub valid_pixels: u64,
    pub correct_pixels: u64,
    /// `None` when every ground-truth pixel is ignored.
    pub pixel_error: Option<f64>,
    /// Foreground predicted regions left after confidence filtering.
    pub predicted_regions: u64,
    /// Applicable classes only, ascending.
    pub classes: Vec<ClassRecord>,
}

impl OverRecord {
    pub fn from_counts(n: u64, m: u64, g_o: u64, s_o: u64, m_o: u64) -> Self {
        let ror = if n == 0 || m == 0 {
            0.0
        } else {
            (g_o * s_o) as f64 / (n * m) as f64
        };
        Self {
            g_o,
            s_o,
            m_o,
            ror,
            rom: (ror * m_o as f64).tanh(),
        }
    }
}

impl UnderRecord {
    pub fn from_counts(n: u64, m: u64, g_u: u64, s_u: u64, m_u: u64) -> Self {
        let rur = if n == 0 || m == 0 {
            0.0
        } else {
            (g_u * s_u) as f64 / (n * m) as f64
        };
        Self {
            g_u,
            s_u,
            m_u,
            rur,
            rum: (rur * m_u as f64).tanh(),
        }
    }
}

impl ClassRecord {
    /// Scalar metric values by name, only those that are defined.
    pub fn scalars(&self) -> BTreeMap<&'static str, f64> {
        let mut out = BTreeMap::new();
        let mut put = |k: &'static str, v: Option<f64>| {
            if let Some(v) = v {
                out.insert(k, v);
            }
        };
        put("iou_error", self.iou_error);
        put("dice_error", self.dice_error);
        put("gce", self.gce);
        if let Some(r) = &self.regions {
            put("rom", r.over.map(|o| o.rom));
            put("rum", r.under.map(|u| u.rum));
            put("pe_os", r.persello.map(|p| p.pe_os));
            put("pe_us", r.persello.map(|p| p.pe_us));
            if let Some(ap) = &r.ap {
                put("ap50_error", ap.error_at(0.5));
                put("ap75_error", ap.error_at(0.75));
                put("ap_error", Some(ap.mean_error));
            }
            put("pq_error", r.pq.as_ref().map(|p| p.error));
        }
        out
    }
}

impl ImageRecord {
    pub fn class(&self, class_id: u16) -> Option<&ClassRecord> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }
}

/// Applies the configured confidence threshold, or returns the prediction
/// unchanged.
pub(crate) fn filtered_prediction(
    pred: &LabelMap,
    conf: Option<&ConfidenceMap>,
    threshold: Option<f64>,
    cfg: &EvalConfig,
) -> Result<LabelMap> {
    match (threshold, conf) {
        (None, _) => Ok(pred.clone()),
        (Some(t), Some(c)) => region::apply_confidence_threshold(pred, c, t, cfg.connectivity, cfg.background_id),
        (Some(_), None) => Err(Error::UndefinedInput(
            "a confidence threshold needs a confidence map".into(),
        )),
    }
}

pub(crate) fn check_maps(gt: &LabelMap, pred: &LabelMap, cfg: &EvalConfig) -> Result<()> {
    for (which, m) in [("ground truth", gt), ("prediction", pred)] {
        if m.num_classes() != cfg.num_classes || m.ignore_id() != cfg.ignore_id {
            return Err(Error::InvalidPairing(format!(
                "{which} map has {} classes / ignore {}, configuration has {} / {}",
                m.num_classes(),
                m.ignore_id(),
                cfg.num_classes,
                cfg.ignore_id
            )));
        }
    }
    Ok(())
}

/// Evaluates one ground-truth / prediction pair. The returned record has an
/// empty `image_id`.
///
/// When `conf` is given it orders predictions for AP and, with a configured
/// threshold, relabels low-confidence regions as unknown first.
pub fn evaluate_pair(
    gt: &LabelMap,
    pred: &LabelMap,
    conf: Option<&ConfidenceMap>,
    cfg: &EvalConfig,
) -> Result<ImageRecord> {
    cfg.validate()?;
    evaluate_at(gt, pred, conf, cfg.confidence_threshold, cfg)
}

/// Same as [`evaluate_pair`] with an explicit threshold; `cfg` must be valid.
pub(crate) fn evaluate_at(
    gt: &LabelMap,
    pred: &LabelMap,
    conf: Option<&ConfidenceMap>,
    threshold: Option<f64>,
    cfg: &EvalConfig,
) -> Result<ImageRecord> {
    check_maps(gt, pred, cfg)?;
    gt.check_paired(pred)?;
    if let Some(c) = conf {
        c.check_paired(pred)?;
    }
    let pred = filtered_prediction(pred, conf, threshold, cfg)?;
    let stats = baseline::pixel_stats(gt, &pred)?;
    let gt_lab = Labeling::new(gt, cfg.connectivity);
    let pred_lab = Labeling::new(&pred, cfg.connectivity);
    let graphs = overlap_graphs(&gt_lab, &pred_lab, cfg.num_classes)?;

    // per-class mean confidences, in region-id order
    let confidences: Option<Vec<Vec<f64>>> = conf.map(|c| {
        let mut per_class = vec![Vec::new(); cfg.num_classes as usize];
        for (comp, mean) in pred_lab.components().iter().zip(component_confidences(&pred_lab, c)) {
            per_class[comp.class as usize].push(mean);
        }
        per_class
    });

    let mut classes = Vec::new();
    let mut predicted_regions = 0u64;
    for (k, (s, graph)) in stats.per_class.iter().zip(&graphs).enumerate() {
        let k = k as u16;
        let foreground = cfg.is_foreground(k);
        if foreground {
            predicted_regions += graph.pred_count() as u64;
        }
        let applicable = s.union > 0 || graph.gt_count() > 0 || graph.pred_count() > 0;
        if !applicable {
            continue;
        }
        let conf_k = confidences.as_ref().map(|c| c[k as usize].as_slice());
        classes.push(class_record(s, graph, foreground, conf_k, cfg)?);
    }
    let pixel_error = if cfg.wants(Metric::Pixel) {
        baseline::pixel_error(&stats).ok()
    } else {
        None
    };
    Ok(ImageRecord {
        image_id: String::new(),
        valid_pixels: stats.valid_pixels,
        correct_pixels: stats.correct_pixels,
        pixel_error,
        predicted_regions,
        classes,
    })
}

fn class_record(
    s: &ClassPixelStats,
    graph: &OverlapGraph,
    foreground: bool,
    confidences: Option<&[f64]>,
    cfg: &EvalConfig,
) -> Result<ClassRecord> {
    let regions = if foreground {
        let (n, m) = (graph.gt_count() as u64, graph.pred_count() as u64);
        let over = cfg.wants(Metric::Rom).then(|| {
            let a = region::rom(graph);
            OverRecord {
                g_o: a.gt_over_ids.len() as u64,
                s_o: a.pred_over_ids.len() as u64,
                m_o: a.m_o,
                ror: a.ror,
                rom: a.rom,
            }
        });
        let under = cfg.wants(Metric::Rum).then(|| {
            let a = region::rum(graph);
            UnderRecord {
                g_u: a.gt_under_ids.len() as u64,
                s_u: a.pred_under_ids.len() as u64,
                m_u: a.m_u,
                rur: a.rur,
                rum: a.rum,
            }
        });
        let persello = if cfg.wants(Metric::Pe) {
            baseline::persello(graph)
        } else {
            None
        };
        let ap = if cfg.wants(Metric::Ap) {
            baseline::ap_error(graph, &cfg.ap_thresholds, confidences)?
        } else {
            None
        };
        let pq = if cfg.wants(Metric::Pq) {
            baseline::pq_error(graph)
        } else {
            None
        };
        Some(RegionRecord {
            n,
            m,
            over,
            under,
            persello,
            ap,
            pq,
        })
    } else {
        None
    };
    Ok(ClassRecord {
        class_id: s.class_id,
        gt_pixels: s.gt_area,
        pred_pixels: s.pred_area,
        intersection: s.intersection,
        union: s.union,
        iou_error: if cfg.wants(Metric::Iou) { s.iou_error() } else { None },
        dice_error: if cfg.wants(Metric::Dice) { s.dice_error() } else { None },
        gce: if cfg.wants(Metric::Gce) && foreground {
            baseline::class_gce(s)
        } else {
            None
        },
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, data: &[u16]) -> LabelMap {
        LabelMap::new(w, data.len() / w, 3, 255, data.to_vec()).unwrap()
    }

    #[test]
    fn identical_maps_are_perfect() {
        let m = map(4, &[0, 1, 1, 0, 2, 0, 0, 1, 2, 2, 0, 255]);
        let r = evaluate_pair(&m, &m, None, &EvalConfig::new(3)).unwrap();
        assert_eq!(r.pixel_error, Some(0.0));
        assert_eq!(r.classes.len(), 3);
        for c in &r.classes {
            for (name, v) in c.scalars() {
                assert_eq!(v, 0.0, "class {} {name}", c.class_id);
            }
        }
        assert!(r.classes[0].regions.is_none());
    }

    #[test]
    fn absent_classes_are_skipped() {
        let m = map(3, &[0, 1, 1]);
        let r = evaluate_pair(&m, &m, None, &EvalConfig::new(3)).unwrap();
        assert_eq!(r.classes.iter().map(|c| c.class_id).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn split_prediction_counts() {
        // one gt region, two preds separated by a background column
        let gt = map(5, &[1, 1, 1, 1, 1]);
        let pred = map(5, &[1, 1, 0, 1, 1]);
        let r = evaluate_pair(&gt, &pred, None, &EvalConfig::new(3)).unwrap();
        let reg = r.class(1).unwrap().regions.as_ref().unwrap();
        assert_eq!((reg.n, reg.m), (1, 2));
        let o = reg.over.unwrap();
        assert_eq!((o.g_o, o.s_o, o.m_o), (1, 2, 1));
        assert_eq!(o.rom, 1f64.tanh());
        assert_eq!(o, OverRecord::from_counts(1, 2, 1, 2, 1));
        assert_eq!(reg.under.unwrap().rum, 0.0);
        assert_eq!(r.predicted_regions, 2);
    }

    #[test]
    fn threshold_without_confidence_is_an_error() {
        let m = map(3, &[0, 1, 1]);
        let mut cfg = EvalConfig::new(3);
        cfg.confidence_threshold = Some(0.5);
        assert!(evaluate_pair(&m, &m, None, &cfg).is_err());
        let conf = ConfidenceMap::filled(3, 1, 0.2).unwrap();
        let r = evaluate_pair(&m, &m, Some(&conf), &cfg).unwrap();
        assert_eq!(r.predicted_regions, 0);
        assert_eq!(r.class(1).unwrap().iou_error, Some(1.0));
    }

    #[test]
    fn metric_selection_limits_output() {
        let m = map(3, &[0, 1, 1]);
        let mut cfg = EvalConfig::new(3);
        cfg.metrics = [Metric::Rom].into_iter().collect();
        let r = evaluate_pair(&m, &m, None, &cfg).unwrap();
        let c = r.class(1).unwrap();
        assert_eq!(c.scalars().keys().copied().collect::<Vec<_>>(), ["rom"]);
        assert_eq!(r.pixel_error, None);
    }

    #[test]
    fn mismatched_configuration_is_rejected() {
        let m = map(3, &[0, 1, 1]);
        assert!(evaluate_pair(&m, &m, None, &EvalConfig::new(4)).is_err());
    }
}
