//! Region-matching baselines: Persello's errors, average precision and
//! panoptic quality. Instances are the connected regions of each class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::OverlapGraph;

/// Mean Persello over- and under-segmentation errors over ground-truth regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerselloError {
    pub pe_os: f64,
    pub pe_us: f64,
}

/// For each ground-truth region, the overlapping prediction with the largest
/// intersection (lowest id on ties) decides both errors; regions without any
/// overlap score 1. `None` when there is no ground-truth region.
pub fn persello(graph: &OverlapGraph) -> Option<PerselloError> {
    let n = graph.gt_count();
    if n == 0 {
        return None;
    }
    // edges are sorted by (gt, pred), so the first maximum is the lowest pred id
    let mut best: Vec<Option<(u64, u32)>> = vec![None; n];
    for e in graph.edges() {
        let slot = &mut best[e.gt as usize];
        if slot.is_none_or(|(inter, _)| e.intersection > inter) {
            *slot = Some((e.intersection, e.pred));
        }
    }
    let (mut os, mut us) = (0.0, 0.0);
    for (g, b) in best.iter().enumerate() {
        match b {
            Some((inter, pred)) => {
                os += 1.0 - *inter as f64 / graph.gt_areas()[g] as f64;
                us += 1.0 - *inter as f64 / graph.pred_areas()[*pred as usize] as f64;
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

/// IOU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPrecision {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// `1 - TP / (TP + FP)`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub per_threshold: Vec<ThresholdPrecision>,
    pub mean_error: f64,
}

impl ApResult {
    pub fn error_at(&self, threshold: f64) -> Option<f64> {
        self.per_threshold
            .iter()
            .find(|t| (t.threshold - threshold).abs() < 1e-9)
            .map(|t| t.error)
    }
}

/// Order in which predictions claim ground-truth regions: descending
/// confidence when given, otherwise descending area; ties by region id.
pub fn prediction_order(graph: &OverlapGraph, confidences: Option<&[f64]>) -> Vec<u32> {
    let mut order: Vec<u32> = (0..graph.pred_count() as u32).collect();
    match confidences {
        Some(conf) => order.sort_by(|&a, &b| conf[b as usize].total_cmp(&conf[a as usize]).then(a.cmp(&b))),
        None => {
            let areas = graph.pred_areas();
            order.sort_by(|&a, &b| areas[b as usize].cmp(&areas[a as usize]).then(a.cmp(&b)))
        }
    }
    order
}

/// Greedy precision at each IOU threshold.
///
/// `None` when the class has neither ground-truth nor predicted regions.
pub fn ap_error(graph: &OverlapGraph, thresholds: &[f64], confidences: Option<&[f64]>) -> Result<Option<ApResult>> {
    if thresholds.is_empty() {
        return Err(Error::Config("empty AP threshold list".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::Config(format!("AP threshold {t} outside (0, 1]")));
    }
    if let Some(c) = confidences {
        if c.len() != graph.pred_count() {
            return Err(Error::InvalidPairing(format!(
                "{} confidences for {} predicted regions",
                c.len(),
                graph.pred_count()
            )));
        }
    }
    let (n, m) = (graph.gt_count(), graph.pred_count());
    if n == 0 && m == 0 {
        return Ok(None);
    }
    let order = prediction_order(graph, confidences);
    let mut by_pred: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m];
    for e in graph.edges() {
        by_pred[e.pred as usize].push((e.gt, graph.edge_iou(e)));
    }

    let per_threshold: Vec<ThresholdPrecision> = thresholds
        .iter()
        .map(|&t| {
            let mut matched = vec![false; n];
            let mut tp = 0u64;
            for &p in &order {
                let mut best: Option<(u32, f64)> = None;
                for &(g, iou) in &by_pred[p as usize] {
                    if matched[g as usize] || iou < t {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| iou > b) {
                        best = Some((g, iou));
                    }
                }
                if let Some((g, _)) = best {
                    matched[g as usize] = true;
                    tp += 1;
                }
            }
            let fp = m as u64 - tp;
            let precision = if m == 0 { 0.0 } else { tp as f64 / m as f64 };
            ThresholdPrecision {
                threshold: t,
                tp,
                fp,
                fn_: n as u64 - tp,
                error: 1.0 - precision,
            }
        })
        .collect();
    let mean_error = per_threshold.iter().map(|t| t.error).sum::<f64>() / per_threshold.len() as f64;
    Ok(Some(ApResult {
        per_threshold,
        mean_error,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqResult {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub iou_sum: f64,
    /// `1 - PQ`.
    pub error: f64,
}

/// Panoptic quality over region pairs with IOU above one half, which makes
/// the matching unique. `None` when the class has no regions on either side.
pub fn pq_error(graph: &OverlapGraph) -> Option<PqResult> {
    let (n, m) = (graph.gt_count() as u64, graph.pred_count() as u64);
    if n == 0 && m == 0 {
        return None;
    }
    let mut tp = 0u64;
    let mut iou_sum = 0.0;
    for e in graph.edges() {
        let iou = graph.edge_iou(e);
        if iou > 0.5 {
            tp += 1;
            iou_sum += iou;
        }
    }
    let (fp, fn_) = (m - tp, n - tp);
    let denom = tp as f64 + fp as f64 / 2.0 + fn_ as f64 / 2.0;
    Some(PqResult {
        tp,
        fp,
        fn_,
        iou_sum,
        error: 1.0 - iou_sum / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Edge;
    use proptest::prelude::*;

    fn graph(gt: &[u64], pred: &[u64], edges: &[(u32, u32, u64)]) -> OverlapGraph {
        OverlapGraph::from_parts(
            1,
            gt.to_vec(),
            pred.to_vec(),
            edges
                .iter()
                .map(|&(gt, pred, intersection)| Edge { gt, pred, intersection })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn persello_exact_and_missing() {
        let exact = graph(&[10, 5], &[10, 5], &[(0, 0, 10), (1, 1, 5)]);
        assert_eq!(persello(&exact), Some(PerselloError { pe_os: 0.0, pe_us: 0.0 }));
        let none = graph(&[10, 5], &[], &[]);
        assert_eq!(persello(&none).unwrap().pe_os, 1.0);
        assert_eq!(persello(&graph(&[], &[3], &[])), None);
    }

    #[test]
    fn persello_depends_only_on_largest_piece() {
        // one prediction of 6 pixels vs the same 6 plus a smaller second piece
        let single = graph(&[20], &[6], &[(0, 0, 6)]);
        let split = graph(&[20], &[6, 4], &[(0, 0, 6), (0, 1, 4)]);
        assert_eq!(persello(&single).unwrap().pe_os, persello(&split).unwrap().pe_os);
        assert_eq!(persello(&single).unwrap().pe_os, 0.7);
    }

    #[test]
    fn ap_without_predictions_is_all_error() {
        let g = graph(&[10, 10], &[], &[]);
        let r = ap_error(&g, &coco_thresholds(), None).unwrap().unwrap();
        assert!(r.per_threshold.iter().all(|t| t.error == 1.0));
        assert_eq!(r.mean_error, 1.0);
        assert!(ap_error(&g, &[], None).is_err());
        assert!(ap_error(&graph(&[], &[], &[]), &[0.5], None).unwrap().is_none());
    }

    #[test]
    fn ap_single_exact_match() {
        let g = graph(&[10, 10], &[10], &[(0, 0, 10)]);
        let r = ap_error(&g, &[0.5, 0.75], None).unwrap().unwrap();
        assert_eq!(r.error_at(0.5), Some(0.0));
        assert_eq!(r.per_threshold[0].fn_, 1);
    }

    #[test]
    fn ap_greedy_claims_highest_iou() {
        // pred 0 (largest) prefers gt 0 (iou .5) over gt 1 (iou .33); pred 1
        // only touches gt 0 (iou .14)
        let g = graph(&[10, 10], &[14, 6], &[(0, 0, 8), (1, 0, 6), (0, 1, 2)]);
        let r = ap_error(&g, &[0.1], None).unwrap().unwrap();
        assert_eq!((r.per_threshold[0].tp, r.per_threshold[0].fp), (1, 1));
        // confidences put pred 1 first; pred 0 then falls back to gt 1
        let r = ap_error(&g, &[0.1], Some(&[0.1, 0.9])).unwrap().unwrap();
        assert_eq!((r.per_threshold[0].tp, r.per_threshold[0].fp), (2, 0));
    }

    #[test]
    fn pq_cases() {
        let exact = graph(&[10], &[10], &[(0, 0, 10)]);
        assert_eq!(pq_error(&exact).unwrap().error, 0.0);
        let none = graph(&[10, 10], &[], &[]);
        assert_eq!(pq_error(&none).unwrap().error, 1.0);
        // iou 0.5 exactly is not a match
        let half = graph(&[10], &[5], &[(0, 0, 5)]);
        assert_eq!(pq_error(&half).unwrap().tp, 0);
    }

    fn arb_graph() -> impl Strategy<Value = OverlapGraph> {
        (0usize..6, 0usize..6).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(20u64..60, n),
                prop::collection::vec(20u64..60, m),
                prop::collection::vec(0u64..4, n * m),
            )
                .prop_map(move |(ga, pa, cells)| {
                    // scale cell weights so incident sums stay within areas
                    let mut edges = vec![];
                    for g in 0..n {
                        for p in 0..m {
                            let w = cells[g * m + p];
                            if w > 0 {
                                let cap = (ga[g] / m as u64).min(pa[p] / n as u64);
                                let inter = (cap * w / 3).max(1);
                                edges.push((g as u32, p as u32, inter));
                            }
                        }
                    }
                    graph(&ga, &pa, &edges)
                })
        })
    }

    proptest! {
        #[test]
        fn ap_error_is_monotone_in_threshold(g in arb_graph()) {
            if let Some(r) = ap_error(&g, &coco_thresholds(), None).unwrap() {
                for w in r.per_threshold.windows(2) {
                    prop_assert!(w[1].error >= w[0].error);
                }
            }
        }

        #[test]
        fn pq_matches_are_unique_and_bounds_hold(g in arb_graph()) {
            let mut gt_seen = vec![0; g.gt_count()];
            let mut pred_seen = vec![0; g.pred_count()];
            for e in g.edges() {
                if g.edge_iou(e) > 0.5 {
                    gt_seen[e.gt as usize] += 1;
                    pred_seen[e.pred as usize] += 1;
                }
            }
            prop_assert!(gt_seen.iter().chain(&pred_seen).all(|&c| c <= 1));
            if let Some(pe) = persello(&g) {
                prop_assert!((0.0..=1.0).contains(&pe.pe_os));
                prop_assert!((0.0..=1.0).contains(&pe.pe_us));
            }
            if let Some(pq) = pq_error(&g) {
                prop_assert!((0.0..=1.0).contains(&pq.error));
            }
        }
    }
}
