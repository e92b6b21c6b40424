use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LabelMap;

/// Per-class confusion counts over pixels whose ground truth is not ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPixelStats {
    pub class_id: u16,
    pub intersection: u64,
    pub union: u64,
    pub gt_area: u64,
    pub pred_area: u64,
}

impl ClassPixelStats {
    /// `1 - |G ∩ S| / |G ∪ S|`, undefined when the class is absent from both maps.
    pub fn iou_error(&self) -> Option<f64> {
        (self.union > 0).then(|| 1.0 - self.intersection as f64 / self.union as f64)
    }

    /// `1 - 2|G ∩ S| / (|G| + |S|)`.
    pub fn dice_error(&self) -> Option<f64> {
        let denom = self.gt_area + self.pred_area;
        (denom > 0).then(|| 1.0 - 2.0 * self.intersection as f64 / denom as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelStats {
    /// Indexed by class id.
    pub per_class: Vec<ClassPixelStats>,
    pub valid_pixels: u64,
    pub correct_pixels: u64,
}

/// Accumulates confusion counts in one pass. Pixels whose ground truth is the
/// ignore id are skipped; prediction ignore/unknown values match nothing.
pub fn pixel_stats(gt: &LabelMap, pred: &LabelMap) -> Result<PixelStats> {
    gt.check_paired(pred)?;
    let k = gt.num_classes() as usize;
    let mut gt_area = vec![0u64; k];
    let mut pred_area = vec![0u64; k];
    let mut inter = vec![0u64; k];
    let mut valid = 0u64;
    let ignore = gt.ignore_id();
    for (&g, &p) in gt.data().iter().zip(pred.data()) {
        if g == ignore {
            continue;
        }
        valid += 1;
        if (g as usize) < k {
            gt_area[g as usize] += 1;
        }
        if (p as usize) < k {
            pred_area[p as usize] += 1;
            if g == p {
                inter[g as usize] += 1;
            }
        }
    }
    let per_class = (0..k)
        .map(|c| ClassPixelStats {
            class_id: c as u16,
            intersection: inter[c],
            union: gt_area[c] + pred_area[c] - inter[c],
            gt_area: gt_area[c],
            pred_area: pred_area[c],
        })
        .collect::<Vec<_>>();
    let correct_pixels = inter.iter().sum();
    Ok(PixelStats {
        per_class,
        valid_pixels: valid,
        correct_pixels,
    })
}

/// Per-class values plus their unweighted mean over the defined classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PerClass {
    pub per_class: Vec<Option<f64>>,
    pub mean: Option<f64>,
}

fn per_class(values: Vec<Option<f64>>) -> PerClass {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    PerClass {
        per_class: values,
        mean,
    }
}

/// IOU error per class; the mean skips classes absent from both maps.
pub fn iou_error(stats: &PixelStats) -> PerClass {
    per_class(stats.per_class.iter().map(ClassPixelStats::iou_error).collect())
}

pub fn dice_error(stats: &PixelStats) -> PerClass {
    per_class(stats.per_class.iter().map(ClassPixelStats::dice_error).collect())
}

/// Fraction of non-ignored pixels whose predicted class is wrong.
pub fn pixel_error(stats: &PixelStats) -> Result<f64> {
    if stats.valid_pixels == 0 {
        return Err(Error::UndefinedInput("every ground-truth pixel is ignored".into()));
    }
    Ok((stats.valid_pixels - stats.correct_pixels) as f64 / stats.valid_pixels as f64)
}
