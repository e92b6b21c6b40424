//! Seeded random scenarios: label-map pairs with typical segmentation
//! failures, and abstract overlap graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mask::{ConfidenceMap, Edge, LabelMap, OverlapGraph, DEFAULT_IGNORE};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub width: usize,
    pub height: usize,
    pub num_classes: u16,
    /// Upper bound on ground-truth rectangles.
    pub max_regions: usize,
    /// Fraction of ground-truth pixels turned into the ignore id.
    pub ignore_rate: f64,
    /// Fraction of prediction pixels replaced by a random class.
    pub noise_rate: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            width: 48,
            height: 48,
            num_classes: 4,
            max_regions: 6,
            ignore_rate: 0.01,
            noise_rate: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
    class: u16,
}

impl Rect {
    /// True when the rectangles overlap or touch, diagonals included.
    fn near(&self, o: &Rect) -> bool {
        self.r0 <= o.r1 && o.r0 <= self.r1 && self.c0 <= o.c1 && o.c0 <= self.c1
    }

    fn paint(&self, data: &mut [u16], width: usize, height: usize) {
        for r in self.r0..self.r1.min(height) {
            for c in self.c0..self.c1.min(width) {
                data[r * width + c] = self.class;
            }
        }
    }
}

fn shifted(v: usize, d: isize, limit: usize) -> usize {
    (v as isize + d).clamp(0, limit as isize) as usize
}

/// Disjoint ground-truth rectangles (at least one pixel apart) drawn by
/// rejection sampling.
fn ground_truth_rects(rng: &mut ChaCha8Rng, p: &ScenarioParams) -> Vec<Rect> {
    let target = rng.random_range(1..=p.max_regions.max(1));
    let max_side = (p.width.min(p.height) / 2).max(4);
    let mut rects: Vec<Rect> = Vec::new();
    for _ in 0..target * 30 {
        if rects.len() == target {
            break;
        }
        let h = rng.random_range(3..=max_side.min(p.height));
        let w = rng.random_range(3..=max_side.min(p.width));
        let r0 = rng.random_range(0..=p.height - h);
        let c0 = rng.random_range(0..=p.width - w);
        let rect = Rect {
            r0,
            c0,
            r1: r0 + h,
            c1: c0 + w,
            class: rng.random_range(1..p.num_classes.max(2)),
        };
        if rects.iter().all(|o| !rect.near(o)) {
            rects.push(rect);
        }
    }
    rects
}

/// A ground-truth / prediction pair. Predictions copy the ground-truth
/// rectangles with random shifts, splits, drops, class swaps and growth
/// (which can merge neighbours), then receive false positives and pixel noise.
pub fn random_scenario(seed: u64, p: &ScenarioParams) -> (LabelMap, LabelMap) {
    assert!(
        p.num_classes >= 2 && p.width >= 8 && p.height >= 8,
        "scenario too small"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (p.width, p.height);
    let rects = ground_truth_rects(&mut rng, p);

    let mut gt = vec![0u16; w * h];
    for r in &rects {
        r.paint(&mut gt, w, h);
    }
    for v in gt.iter_mut() {
        if rng.random_bool(p.ignore_rate) {
            *v = DEFAULT_IGNORE;
        }
    }

    let mut pred = vec![0u16; w * h];
    for (idx, rect) in rects.iter().enumerate() {
        let (dr, dc) = (
            rng.random_range(-2..=2i64) as isize,
            rng.random_range(-2..=2i64) as isize,
        );
        let mut r = Rect {
            r0: shifted(rect.r0, dr, h),
            c0: shifted(rect.c0, dc, w),
            r1: shifted(rect.r1, dr, h),
            c1: shifted(rect.c1, dc, w),
            class: rect.class,
        };
        match rng.random_range(0..10) {
            // drop
            0 => continue,
            // wrong class
            1 => r.class = rng.random_range(1..p.num_classes),
            // grow, possibly into a neighbour
            2 | 3 => {
                let g = rng.random_range(1..=4);
                r = Rect {
                    r0: r.r0.saturating_sub(g),
                    c0: r.c0.saturating_sub(g),
                    r1: (r.r1 + g).min(h),
                    c1: (r.c1 + g).min(w),
                    class: r.class,
                };
            }
            // cover this rectangle and another one with a single region
            4 if rects.len() > 1 => {
                let o = rects[(idx + rng.random_range(1..rects.len())) % rects.len()];
                r = Rect {
                    r0: r.r0.min(o.r0),
                    c0: r.c0.min(o.c0),
                    r1: r.r1.max(o.r1),
                    c1: r.c1.max(o.c1),
                    class: r.class,
                };
            }
            _ => {}
        }
        r.paint(&mut pred, w, h);
        // split into two or three pieces
        let cuts = match rng.random_range(0..10) {
            0..=2 => 1,
            3 => 2,
            _ => 0,
        };
        for _ in 0..cuts {
            if rng.random_bool(0.5) && r.c1 > r.c0 + 2 {
                let c = rng.random_range(r.c0 + 1..r.c1 - 1);
                (r.r0..r.r1).for_each(|row| pred[row * w + c] = 0);
            } else if r.r1 > r.r0 + 2 {
                let row = rng.random_range(r.r0 + 1..r.r1 - 1);
                (r.c0..r.c1).for_each(|c| pred[row * w + c] = 0);
            }
        }
    }
    for _ in 0..rng.random_range(0..=2) {
        let (rh, rw) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let r0 = rng.random_range(0..=h - rh);
        let c0 = rng.random_range(0..=w - rw);
        Rect {
            r0,
            c0,
            r1: r0 + rh,
            c1: c0 + rw,
            class: rng.random_range(1..p.num_classes),
        }
        .paint(&mut pred, w, h);
    }
    for v in pred.iter_mut() {
        if rng.random_bool(p.noise_rate) {
            *v = rng.random_range(0..p.num_classes);
        }
    }
    let k = p.num_classes;
    (
        LabelMap::new(w, h, k, DEFAULT_IGNORE, gt).expect("generated ground truth is valid"),
        LabelMap::new(w, h, k, DEFAULT_IGNORE, pred).expect("generated prediction is valid"),
    )
}

/// Per-pixel confidences: one random level per row band plus small noise, so
/// regions get distinct means.
pub fn random_confidence(seed: u64, width: usize, height: usize) -> ConfidenceMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bands: Vec<f64> = (0..height.div_ceil(8)).map(|_| rng.random()).collect();
    let data = (0..width * height)
        .map(|i| {
            let base: f64 = bands[i / width / 8];
            (base + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0)
        })
        .collect();
    ConfidenceMap::new(width, height, data).expect("confidences lie in [0, 1]")
}

/// A consistent overlap graph with up to `max_regions` regions per side:
/// every area covers the intersections incident to it.
pub fn random_overlap_graph(seed: u64, max_regions: usize) -> OverlapGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=max_regions);
    let m = rng.random_range(0..=max_regions);
    let density: f64 = rng.random_range(0.05..0.7);
    let mut edges = Vec::new();
    let mut gt_areas = vec![0u64; n];
    let mut pred_areas = vec![0u64; m];
    for (g, ga) in gt_areas.iter_mut().enumerate() {
        for (p, pa) in pred_areas.iter_mut().enumerate() {
            if rng.random_bool(density) {
                let inter = rng.random_range(1..=40);
                *ga += inter;
                *pa += inter;
                edges.push(Edge {
                    gt: g as u32,
                    pred: p as u32,
                    intersection: inter,
                });
            }
        }
    }
    for a in gt_areas.iter_mut().chain(pred_areas.iter_mut()) {
        *a += rng.random_range(0..=60) + u64::from(*a == 0);
    }
    OverlapGraph::from_parts(1, gt_areas, pred_areas, edges).expect("generated graph is consistent")
}
