//! Comparison metrics: pixel-wise IOU / Dice / pixel error, LRE / GCE,
//! Persello's errors, average precision and panoptic quality.

mod gce;
mod instance;
mod pixel;

pub use gce::{class_gce, gce, lre, GceResult};
pub use instance::{
    ap_error, coco_thresholds, persello, pq_error, prediction_order, ApResult, PerselloError, PqResult,
    ThresholdPrecision,
};
pub use pixel::{dice_error, iou_error, pixel_error, pixel_stats, ClassPixelStats, PerClass, PixelStats};
