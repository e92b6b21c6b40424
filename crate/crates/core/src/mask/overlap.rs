use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::labeling::{Labeling, RegionSet, NO_REGION};
use crate::error::{Error, Result};

/// A non-empty intersection between ground-truth region `gt` and predicted region `pred`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub gt: u32,
    pub pred: u32,
    pub intersection: u64,
}

/// Bipartite intersection structure between the ground-truth and predicted
/// regions of one class. Edges are sorted by `(gt, pred)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapGraph {
    class_id: u16,
    gt_areas: Vec<u64>,
    pred_areas: Vec<u64>,
    edges: Vec<Edge>,
}

impl OverlapGraph {
    /// Builds a graph from raw parts, checking every structural invariant.
    pub fn from_parts(class_id: u16, gt_areas: Vec<u64>, pred_areas: Vec<u64>, mut edges: Vec<Edge>) -> Result<Self> {
        if gt_areas.iter().chain(&pred_areas).any(|&a| a == 0) {
            return Err(Error::InvalidPairing("regions must have positive area".into()));
        }
        edges.sort_unstable();
        let mut gt_used = vec![0u64; gt_areas.len()];
        let mut pred_used = vec![0u64; pred_areas.len()];
        for (i, e) in edges.iter().enumerate() {
            let (g, p) = (e.gt as usize, e.pred as usize);
            if g >= gt_areas.len() || p >= pred_areas.len() {
                return Err(Error::InvalidPairing(format!(
                    "edge ({g}, {p}) references a missing region"
                )));
            }
            if e.intersection == 0 || e.intersection > gt_areas[g].min(pred_areas[p]) {
                return Err(Error::InvalidPairing(format!(
                    "edge ({g}, {p}) has intersection {} outside 1..=min(area)",
                    e.intersection
                )));
            }
            if i > 0 && (edges[i - 1].gt, edges[i - 1].pred) == (e.gt, e.pred) {
                return Err(Error::InvalidPairing(format!("duplicate edge ({g}, {p})")));
            }
            gt_used[g] += e.intersection;
            pred_used[p] += e.intersection;
        }
        if gt_used.iter().zip(&gt_areas).any(|(u, a)| u > a) || pred_used.iter().zip(&pred_areas).any(|(u, a)| u > a) {
            return Err(Error::InvalidPairing(
                "incident intersections exceed a region's area".into(),
            ));
        }
        Ok(Self {
            class_id,
            gt_areas,
            pred_areas,
            edges,
        })
    }

    pub fn class_id(&self) -> u16 {
        self.class_id
    }

    /// Number of ground-truth regions, N.
    pub fn gt_count(&self) -> usize {
        self.gt_areas.len()
    }

    /// Number of predicted regions, M.
    pub fn pred_count(&self) -> usize {
        self.pred_areas.len()
    }

    pub fn gt_areas(&self) -> &[u64] {
        &self.gt_areas
    }

    pub fn pred_areas(&self) -> &[u64] {
        &self.pred_areas
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Swaps the roles of ground truth and prediction.
    pub fn transpose(&self) -> OverlapGraph {
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge {
                gt: e.pred,
                pred: e.gt,
                intersection: e.intersection,
            })
            .collect();
        edges.sort_unstable();
        OverlapGraph {
            class_id: self.class_id,
            gt_areas: self.pred_areas.clone(),
            pred_areas: self.gt_areas.clone(),
            edges,
        }
    }

    /// Number of predicted regions touching each ground-truth region.
    pub fn gt_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.gt_count()];
        for e in &self.edges {
            d[e.gt as usize] += 1;
        }
        d
    }

    /// Number of ground-truth regions touching each predicted region.
    pub fn pred_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.pred_count()];
        for e in &self.edges {
            d[e.pred as usize] += 1;
        }
        d
    }

    /// Intersection-over-union of an edge.
    pub fn edge_iou(&self, e: &Edge) -> f64 {
        let union = self.gt_areas[e.gt as usize] + self.pred_areas[e.pred as usize] - e.intersection;
        e.intersection as f64 / union as f64
    }
}

/// Overlap graph between two region sets of the same class.
pub fn build_overlap_graph(gt: &RegionSet, pred: &RegionSet) -> Result<OverlapGraph> {
    if gt.class_id != pred.class_id {
        return Err(Error::InvalidPairing(format!(
            "class {} paired with class {}",
            gt.class_id, pred.class_id
        )));
    }
    if gt.width != pred.width || gt.height != pred.height {
        return Err(Error::InvalidPairing(format!(
            "region sets from {}x{} and {}x{} maps",
            gt.width, gt.height, pred.width, pred.height
        )));
    }
    let pred_labels = pred.dense_labels();
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for g in &gt.regions {
        for &p in &g.pixels {
            let s = pred_labels[p as usize];
            if s != NO_REGION {
                *counts.entry((g.region_id, s)).or_default() += 1;
            }
        }
    }
    let edges = counts
        .into_iter()
        .map(|((gt, pred), intersection)| Edge { gt, pred, intersection })
        .collect();
    OverlapGraph::from_parts(gt.class_id, gt.areas(), pred.areas(), edges)
}

/// Overlap graphs for every class at once, from a single joint pass over both
/// labelings. Index `k` of the result holds class `k`.
pub fn overlap_graphs(gt: &Labeling, pred: &Labeling, num_classes: u16) -> Result<Vec<OverlapGraph>> {
    if gt.width() != pred.width() || gt.height() != pred.height() {
        return Err(Error::InvalidPairing(format!(
            "labelings of {}x{} and {}x{} maps",
            gt.width(),
            gt.height(),
            pred.width(),
            pred.height()
        )));
    }
    let gl = gt.labels();
    let pl = pred.labels();
    let gc = gt.components();
    let pc = pred.components();

    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut run: Option<(u32, u32)> = None;
    let mut run_len = 0u64;
    for (&g, &p) in gl.iter().zip(pl) {
        let key = (g != NO_REGION && p != NO_REGION && gc[g as usize].class == pc[p as usize].class).then_some((g, p));
        if key == run {
            run_len += 1;
            continue;
        }
        if let Some(k) = run {
            *counts.entry(k).or_default() += run_len;
        }
        run = key;
        run_len = 1;
    }
    if let Some(k) = run {
        *counts.entry(k).or_default() += run_len;
    }

    let mut edges: Vec<Vec<Edge>> = vec![Vec::new(); num_classes as usize];
    for ((g, p), n) in counts {
        let g = gc[g as usize];
        let p = pc[p as usize];
        edges[g.class as usize].push(Edge {
            gt: g.local_id,
            pred: p.local_id,
            intersection: n,
        });
    }
    edges
        .into_iter()
        .enumerate()
        .map(|(k, e)| {
            let k = k as u16;
            OverlapGraph::from_parts(k, gt.areas(k), pred.areas(k), e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{binarize_class, connected_components, Connectivity, LabelMap};
    use rand::{Rng, SeedableRng};

    fn random_map(rng: &mut impl Rng, w: usize, h: usize, k: u16) -> LabelMap {
        // blocky noise so regions are larger than single pixels
        let data = (0..w * h)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                if rng.random_bool(0.15) {
                    rng.random_range(0..k)
                } else {
                    (((r / 3) * 7 + (c / 4) * 3) % k as usize) as u16
                }
            })
            .collect();
        LabelMap::new(w, h, k, 255, data).unwrap()
    }

    fn naive_edges(gt: &RegionSet, pred: &RegionSet) -> Vec<Edge> {
        let mut out = vec![];
        for g in &gt.regions {
            for s in &pred.regions {
                let n = g.pixels.iter().filter(|p| s.pixels.contains(p)).count() as u64;
                if n > 0 {
                    out.push(Edge {
                        gt: g.region_id,
                        pred: s.region_id,
                        intersection: n,
                    });
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn identical_sets_give_diagonal_edges() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let map = random_map(&mut rng, 20, 20, 3);
        let rs = connected_components(&binarize_class(&map, 1).unwrap(), 1, Connectivity::Eight);
        let g = build_overlap_graph(&rs, &rs).unwrap();
        assert_eq!(g.edges().len(), rs.len());
        for e in g.edges() {
            assert_eq!(e.gt, e.pred);
            assert_eq!(e.intersection, g.gt_areas()[e.gt as usize]);
        }
    }

    #[test]
    fn disjoint_sets_have_no_edges() {
        #[rustfmt::skip]
        let a = LabelMap::new(4, 2, 2, 255, vec![1, 1, 0, 0, 1, 1, 0, 0]).unwrap();
        let b = LabelMap::new(4, 2, 2, 255, vec![0, 0, 0, 1, 0, 0, 0, 1]).unwrap();
        let ga = connected_components(&binarize_class(&a, 1).unwrap(), 1, Connectivity::Eight);
        let gb = connected_components(&binarize_class(&b, 1).unwrap(), 1, Connectivity::Eight);
        let g = build_overlap_graph(&ga, &gb).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!((g.gt_count(), g.pred_count()), (1, 1));
    }

    #[test]
    fn class_mismatch_is_rejected() {
        let a = LabelMap::new(2, 1, 3, 255, vec![1, 2]).unwrap();
        let r1 = connected_components(&binarize_class(&a, 1).unwrap(), 1, Connectivity::Eight);
        let r2 = connected_components(&binarize_class(&a, 2).unwrap(), 2, Connectivity::Eight);
        assert!(matches!(build_overlap_graph(&r1, &r2), Err(Error::InvalidPairing(_))));
    }

    #[test]
    fn random_maps_match_naive_intersections() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let a = random_map(&mut rng, 24, 18, 4);
            let b = random_map(&mut rng, 24, 18, 4);
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let la = Labeling::new(&a, conn);
                let lb = Labeling::new(&b, conn);
                let joint = overlap_graphs(&la, &lb, 4).unwrap();
                for k in 1..4u16 {
                    let ga = connected_components(&binarize_class(&a, k).unwrap(), k, conn);
                    let gb = connected_components(&binarize_class(&b, k).unwrap(), k, conn);
                    let g = build_overlap_graph(&ga, &gb).unwrap();
                    assert_eq!(g.edges(), naive_edges(&ga, &gb).as_slice());
                    assert_eq!(g, joint[k as usize]);
                }
            }
        }
    }

    #[test]
    fn from_parts_checks_invariants() {
        let e = |gt, pred, intersection| Edge { gt, pred, intersection };
        assert!(OverlapGraph::from_parts(1, vec![4], vec![3], vec![e(0, 0, 4)]).is_err());
        assert!(OverlapGraph::from_parts(1, vec![4], vec![3], vec![e(0, 1, 1)]).is_err());
        assert!(OverlapGraph::from_parts(1, vec![4], vec![3], vec![e(0, 0, 1), e(0, 0, 1)]).is_err());
        assert!(OverlapGraph::from_parts(1, vec![4], vec![3, 3], vec![e(0, 0, 3), e(0, 1, 3)]).is_err());
        assert!(OverlapGraph::from_parts(1, vec![4], vec![3], vec![e(0, 0, 3)]).is_ok());
    }

    #[test]
    fn transpose_is_involution() {
        let g = OverlapGraph::from_parts(
            1,
            vec![5, 2],
            vec![3, 3, 1],
            vec![
                Edge {
                    gt: 0,
                    pred: 0,
                    intersection: 2,
                },
                Edge {
                    gt: 0,
                    pred: 1,
                    intersection: 3,
                },
                Edge {
                    gt: 1,
                    pred: 2,
                    intersection: 1,
                },
            ],
        )
        .unwrap();
        assert_eq!(g.transpose().transpose(), g);
        assert_eq!(g.transpose().gt_degrees(), g.pred_degrees());
    }
}
