//! Region-aware evaluation of semantic segmentation.
//!
//! The crate computes the region-wise over- and under-segmentation measures
//! (ROM / RUM) together with pixel-wise and region-matching baselines over
//! pairs of label maps, and ships a synthetic scenario generator plus a naive
//! reference implementation used to cross-check every metric.
//!
//! The layers, bottom-up:
//!
//! * [`mask`]: label maps, confidence maps, connected regions, overlap graphs;
//! * [`region`]: ROM / RUM and region-confidence filtering;
//! * [`baseline`]: IOU, Dice, pixel error, GCE, Persello's errors, AP, PQ;
//! * [`synthetic`]: canonical panels, perturbations, random scenarios and the
//!   oracle;
//! * [`harness`]: per-image and dataset evaluation, confidence sweeps and
//!   report emission.

pub mod baseline;
pub mod error;
pub mod harness;
pub mod mask;
pub mod region;
pub mod synthetic;

pub use error::{Error, Result};
pub use mask::{
    binarize_class, build_overlap_graph, connected_components, BinaryMask, ConfidenceMap, Connectivity, LabelMap,
    Labeling, OverlapGraph, Region, RegionSet,
};
pub use region::{rom, rum, OverSegAccount, UnderSegAccount};
