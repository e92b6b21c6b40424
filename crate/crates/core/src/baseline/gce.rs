//! Local refinement error and global consistency error, evaluated per
//! foreground class.
//!
//! For class `k` the considered pixels are those where the ground truth or the
//! prediction carries `k`. The segment of a pixel in a map is that map's full
//! class-`k` pixel set when the pixel carries `k` there, and empty otherwise. A
//! pixel carrying `k` in only one map has LRE 1 in both directions.

use super::pixel::{ClassPixelStats, PixelStats};
use crate::mask::LabelMap;

/// Sum of `LRE(s, g, x)` over the considered pixels, from counts alone.
/// `g_area`, `s_area` are the class areas of the reference and segmentation.
fn directional_sum(intersection: u64, g_area: u64, s_area: u64) -> f64 {
    let exclusive = ((g_area - intersection) + (s_area - intersection)) as f64;
    if intersection == 0 {
        return exclusive;
    }
    intersection as f64 * (g_area - intersection) as f64 / g_area as f64 + exclusive
}

/// GCE of one class, `None` when the class is absent from both maps.
pub fn class_gce(stats: &ClassPixelStats) -> Option<f64> {
    if stats.union == 0 {
        return None;
    }
    let forward = directional_sum(stats.intersection, stats.gt_area, stats.pred_area);
    let backward = directional_sum(stats.intersection, stats.pred_area, stats.gt_area);
    Some(forward.min(backward) / stats.union as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GceResult {
    /// `(class, gce)` for every applicable foreground class, ascending by class.
    pub per_class: Vec<(u16, f64)>,
    pub mean: Option<f64>,
}

/// Per-class GCE and its mean over applicable classes, skipping `background`.
pub fn gce(stats: &PixelStats, background: Option<u16>) -> GceResult {
    let per_class: Vec<(u16, f64)> = stats
        .per_class
        .iter()
        .filter(|s| Some(s.class_id) != background)
        .filter_map(|s| class_gce(s).map(|v| (s.class_id, v)))
        .collect();
    let mean = (!per_class.is_empty()).then(|| per_class.iter().map(|(_, v)| v).sum::<f64>() / per_class.len() as f64);
    GceResult { per_class, mean }
}

/// `LRE(seg, reference, x)` for class `class` at pixel `(row, col)`.
///
/// `None` when the pixel is ignored in the reference or carries `class` in
/// neither map.
pub fn lre(seg: &LabelMap, reference: &LabelMap, class: u16, row: usize, col: usize) -> Option<f64> {
    let i = row * reference.width() + col;
    let ignore = reference.ignore_id();
    if reference.data()[i] == ignore {
        return None;
    }
    let in_ref = reference.data()[i] == class;
    let in_seg = seg.data()[i] == class;
    match (in_ref, in_seg) {
        (false, false) => None,
        (true, true) => {
            let (mut r_area, mut inter) = (0u64, 0u64);
            for (&r, &s) in reference.data().iter().zip(seg.data()) {
                if r == class {
                    r_area += 1;
                    inter += (s == class) as u64;
                }
            }
            Some((r_area - inter) as f64 / r_area as f64)
        }
        _ => Some(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::pixel::pixel_stats;
    use std::collections::HashSet;

    fn map(w: usize, data: &[u16]) -> LabelMap {
        LabelMap::new(w, data.len() / w, 3, 255, data.to_vec()).unwrap()
    }

    #[test]
    fn identical_maps_give_zero() {
        let m = map(3, &[0, 1, 1, 2, 2, 0]);
        let s = pixel_stats(&m, &m).unwrap();
        assert_eq!(gce(&s, Some(0)).mean, Some(0.0));
        for r in 0..2 {
            for c in 0..3 {
                if let Some(v) = lre(&m, &m, m.get(r, c), r, c) {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn missing_prediction_gives_one() {
        let gt = map(4, &[0, 1, 1, 0, 0, 1, 1, 0]);
        let pred = map(4, &[0; 8]);
        let s = pixel_stats(&gt, &pred).unwrap();
        assert_eq!(gce(&s, Some(0)).mean, Some(1.0));
    }

    #[test]
    fn half_refinement_lre() {
        let g = map(4, &[1, 1, 1, 1]);
        let s = map(4, &[1, 1, 0, 0]);
        assert_eq!(lre(&s, &g, 1, 0, 0), Some(0.5));
        assert_eq!(lre(&g, &s, 1, 0, 0), Some(0.0));
        assert_eq!(lre(&s, &g, 1, 0, 3), Some(1.0));
    }

    /// Materialized-set evaluation of the directional LRE sum.
    fn oracle_sum(seg: &LabelMap, reference: &LabelMap, class: u16) -> f64 {
        let set = |m: &LabelMap| -> HashSet<usize> {
            (0..m.len())
                .filter(|&i| m.data()[i] == class && reference.data()[i] != 255)
                .collect()
        };
        let (g, s) = (set(reference), set(seg));
        let mut sum = 0.0;
        for x in g.union(&s) {
            let cg = if g.contains(x) { g.clone() } else { HashSet::new() };
            let cs = if s.contains(x) { s.clone() } else { HashSet::new() };
            sum += if cg.is_empty() {
                1.0
            } else {
                cg.difference(&cs).count() as f64 / cg.len() as f64
            };
        }
        sum
    }

    #[test]
    fn closed_form_matches_set_oracle_and_is_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let a: Vec<u16> = (0..48).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<u16> = (0..48).map(|_| rng.random_range(0..3)).collect();
            let (a, b) = (map(8, &a), map(8, &b));
            let sab = pixel_stats(&a, &b).unwrap();
            let sba = pixel_stats(&b, &a).unwrap();
            let (gab, gba) = (gce(&sab, Some(0)), gce(&sba, Some(0)));
            assert_eq!(gab, gba);
            for &(k, v) in &gab.per_class {
                let union = sab.per_class[k as usize].union as f64;
                let expected = oracle_sum(&b, &a, k).min(oracle_sum(&a, &b, k)) / union;
                assert!((v - expected).abs() < 1e-12, "class {k}: {v} vs {expected}");
            }
        }
    }
}
