//! Region-wise over- and under-segmentation measures (ROM / RUM) and
//! region-confidence filtering.
//!
//! Both measures are purely combinatorial functions of an [`OverlapGraph`]:
//! pixel geometry enters only through which region pairs intersect.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{ConfidenceMap, Connectivity, LabelMap, Labeling, OverlapGraph, RegionSet, NO_REGION};

/// Regions taking part in over-segmentation, plus the per-ground-truth
/// overlap counts `|S_{g_i}|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverSegSets {
    /// Ground-truth regions overlapped by two or more predicted regions.
    pub gt_ids: Vec<u32>,
    /// Predicted regions overlapping at least one of those ground-truth regions.
    pub pred_ids: Vec<u32>,
    pub per_gt_counts: Vec<usize>,
}

/// Mirror of [`OverSegSets`]: predicted regions overlapping two or more
/// ground-truth regions and the ground-truth regions they touch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnderSegSets {
    pub gt_ids: Vec<u32>,
    pub pred_ids: Vec<u32>,
    pub per_pred_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverSegAccount {
    pub gt_count: usize,
    pub pred_count: usize,
    pub gt_over_ids: Vec<u32>,
    pub pred_over_ids: Vec<u32>,
    pub ror: f64,
    pub m_o: u64,
    pub rom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderSegAccount {
    pub gt_count: usize,
    pub pred_count: usize,
    pub gt_under_ids: Vec<u32>,
    pub pred_under_ids: Vec<u32>,
    pub rur: f64,
    pub m_u: u64,
    pub rum: f64,
}

/// Side-agnostic core. `anchors` are the regions whose degree decides
/// membership (ground truth for ROM, prediction for RUM); `edges` are
/// `(anchor, other)` pairs.
struct Split {
    anchors: Vec<u32>,
    others: Vec<u32>,
    degrees: Vec<usize>,
}

fn split_sets(anchor_count: usize, other_count: usize, edges: impl Iterator<Item = (u32, u32)> + Clone) -> Split {
    let mut degrees = vec![0usize; anchor_count];
    for (a, _) in edges.clone() {
        degrees[a as usize] += 1;
    }
    let mut touched = vec![false; other_count];
    for (a, o) in edges {
        if degrees[a as usize] >= 2 {
            touched[o as usize] = true;
        }
    }
    let anchors = (0..anchor_count as u32).filter(|&a| degrees[a as usize] >= 2).collect();
    let others = (0..other_count as u32).filter(|&o| touched[o as usize]).collect();
    Split {
        anchors,
        others,
        degrees,
    }
}

/// `(ratio, aggregate, tanh(ratio * aggregate))` with the empty-side
/// convention: no regions on either side means ratio 0.
fn measure(split: &Split, n: usize, m: usize) -> (f64, u64, f64) {
    if n == 0 || m == 0 {
        return (0.0, 0, 0.0);
    }
    let ratio = (split.anchors.len() as u64 * split.others.len() as u64) as f64 / (n as u64 * m as u64) as f64;
    let aggregate: u64 = split.degrees.iter().map(|&d| d.saturating_sub(1) as u64).sum();
    (ratio, aggregate, (ratio * aggregate as f64).tanh())
}

pub fn over_seg_sets(graph: &OverlapGraph) -> OverSegSets {
    let s = split_sets(
        graph.gt_count(),
        graph.pred_count(),
        graph.edges().iter().map(|e| (e.gt, e.pred)),
    );
    OverSegSets {
        gt_ids: s.anchors,
        pred_ids: s.others,
        per_gt_counts: s.degrees,
    }
}

pub fn under_seg_sets(graph: &OverlapGraph) -> UnderSegSets {
    let s = split_sets(
        graph.pred_count(),
        graph.gt_count(),
        graph.edges().iter().map(|e| (e.pred, e.gt)),
    );
    UnderSegSets {
        gt_ids: s.others,
        pred_ids: s.anchors,
        per_pred_counts: s.degrees,
    }
}

/// Region-wise over-segmentation measure.
pub fn rom(graph: &OverlapGraph) -> OverSegAccount {
    let (n, m) = (graph.gt_count(), graph.pred_count());
    let s = split_sets(n, m, graph.edges().iter().map(|e| (e.gt, e.pred)));
    let (ror, m_o, rom) = measure(&s, n, m);
    OverSegAccount {
        gt_count: n,
        pred_count: m,
        gt_over_ids: s.anchors,
        pred_over_ids: s.others,
        ror,
        m_o,
        rom,
    }
}

/// Region-wise under-segmentation measure.
pub fn rum(graph: &OverlapGraph) -> UnderSegAccount {
    let (n, m) = (graph.gt_count(), graph.pred_count());
    let s = split_sets(m, n, graph.edges().iter().map(|e| (e.pred, e.gt)));
    let (rur, m_u, rum) = measure(&s, m, n);
    UnderSegAccount {
        gt_count: n,
        pred_count: m,
        gt_under_ids: s.others,
        pred_under_ids: s.anchors,
        rur,
        m_u,
        rum,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConfidence {
    pub region_id: u32,
    pub mean_confidence: f64,
}

/// Mean confidence over each region's pixels.
pub fn region_confidences(regions: &RegionSet, conf: &ConfidenceMap) -> Result<Vec<RegionConfidence>> {
    if conf.width() != regions.width || conf.height() != regions.height {
        return Err(Error::DimensionMismatch {
            expected_w: regions.width,
            expected_h: regions.height,
            got_w: conf.width(),
            got_h: conf.height(),
        });
    }
    let data = conf.data();
    Ok(regions
        .regions
        .iter()
        .map(|r| {
            let sum: f64 = r.pixels.iter().map(|&p| data[p as usize]).sum();
            RegionConfidence {
                region_id: r.region_id,
                mean_confidence: sum / r.pixels.len() as f64,
            }
        })
        .collect())
}

/// Mean confidence of every component of a labeling, indexed by global component.
pub(crate) fn component_confidences(labeling: &Labeling, conf: &ConfidenceMap) -> Vec<f64> {
    let comps = labeling.components();
    let mut sums = vec![0.0f64; comps.len()];
    for (&l, &c) in labeling.labels().iter().zip(conf.data()) {
        if l != NO_REGION {
            sums[l as usize] += c;
        }
    }
    sums.iter().zip(comps).map(|(s, comp)| s / comp.area as f64).collect()
}

/// Relabels every non-background predicted region whose mean confidence is
/// below `tau` to the unknown sentinel. `tau = 0` returns the input unchanged.
pub fn apply_confidence_threshold(
    pred: &LabelMap,
    conf: &ConfidenceMap,
    tau: f64,
    connectivity: Connectivity,
    background: Option<u16>,
) -> Result<LabelMap> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("confidence threshold {tau} outside [0, 1]")));
    }
    conf.check_paired(pred)?;
    let labeling = Labeling::new(pred, connectivity);
    let means = component_confidences(&labeling, conf);
    let comps = labeling.components();
    let drop: Vec<bool> = comps
        .iter()
        .zip(&means)
        .map(|(c, &m)| Some(c.class) != background && m < tau)
        .collect();
    if !drop.iter().any(|&d| d) {
        return Ok(pred.clone());
    }
    let unknown = pred.unknown_id();
    let data = pred
        .data()
        .iter()
        .zip(labeling.labels())
        .map(|(&v, &l)| if l != NO_REGION && drop[l as usize] { unknown } else { v })
        .collect();
    pred.with_data(data)
}
