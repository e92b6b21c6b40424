//! Label maps, confidence maps, connected regions and the overlap graph.
//!
//! Everything upstream of the metric formulas lives here. All types are
//! immutable once built.

mod io;
mod labeling;
mod overlap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_confidence_map, load_label_map, read_binary_confidence, read_binary_label_map, save_confidence_map,
    save_label_map, write_binary_label_map, LabelFormat, LabelMapFormat,
};
pub(crate) use labeling::NO_REGION;
pub use labeling::{connected_components, Labeling, Region, RegionSet};
pub use overlap::{build_overlap_graph, overlap_graphs, Edge, OverlapGraph};

/// Default void label used by PASCAL VOC style annotations.
pub const DEFAULT_IGNORE: u16 = 255;

/// Pixel adjacency used when grouping pixels into regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    /// Offsets of the already-visited neighbours in a row-major raster scan.
    pub(crate) fn backward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0)],
            Connectivity::Eight => &[(0, -1), (-1, -1), (-1, 0), (-1, 1)],
        }
    }

    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl std::str::FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v: u8 = s
            .trim()
            .parse()
            .map_err(|_| format!("connectivity must be 4 or 8, got {s:?}"))?;
        Connectivity::try_from(v)
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// A dense grid of per-pixel class ids.
///
/// Valid entries are class ids in `0..num_classes`, the ignore id, or the
/// unknown sentinel (`num_classes`) produced by confidence filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    num_classes: u16,
    ignore_id: u16,
    data: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, num_classes: u16, ignore_id: u16, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMap(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if num_classes == 0 || num_classes == u16::MAX {
            return Err(Error::InvalidMap(format!(
                "num_classes must be in 1..65535, got {num_classes}"
            )));
        }
        if ignore_id <= num_classes {
            return Err(Error::InvalidMap(format!(
                "ignore id {ignore_id} collides with class ids or the unknown sentinel {num_classes}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidMap(format!(
                "expected {} entries for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|&v| v > num_classes && v != ignore_id) {
            return Err(Error::InvalidMap(format!(
                "value {} at pixel {pos} is neither a class id < {num_classes} nor the ignore id",
                data[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            num_classes,
            ignore_id,
            data,
        })
    }

    /// A map filled with a single value.
    pub fn filled(width: usize, height: usize, num_classes: u16, ignore_id: u16, value: u16) -> Result<Self> {
        Self::new(width, height, num_classes, ignore_id, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn ignore_id(&self) -> u16 {
        self.ignore_id
    }

    /// Sentinel assigned to low-confidence predicted regions.
    pub fn unknown_id(&self) -> u16 {
        self.num_classes
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.data[row * self.width + col]
    }

    /// True when `v` is an ordinary class id (not ignore, not unknown).
    pub fn is_class(&self, v: u16) -> bool {
        v < self.num_classes
    }

    pub fn same_shape(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_paired(&self, other: &LabelMap) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            });
        }
        if self.num_classes != other.num_classes || self.ignore_id != other.ignore_id {
            return Err(Error::InvalidPairing(format!(
                "label spaces differ: K={} ignore={} vs K={} ignore={}",
                self.num_classes, self.ignore_id, other.num_classes, other.ignore_id
            )));
        }
        Ok(())
    }

    /// Copy of this map with `data` replaced; values are re-validated.
    pub fn with_data(&self, data: Vec<u16>) -> Result<Self> {
        Self::new(self.width, self.height, self.num_classes, self.ignore_id, data)
    }
}

/// Per-pixel foreground flags for a single class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidMap(format!(
                "mask of {} entries does not fit {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Foreground mask of class `class` in `map`. Ignore and unknown pixels are 0.
///
/// Class 0 is rejected because background never forms regions.
pub fn binarize_class(map: &LabelMap, class: u16) -> Result<BinaryMask> {
    if class == 0 || class >= map.num_classes() {
        return Err(Error::InvalidClass {
            class,
            num_classes: map.num_classes(),
        });
    }
    Ok(BinaryMask {
        width: map.width(),
        height: map.height(),
        data: map.data().iter().map(|&v| v == class).collect(),
    })
}

/// Per-pixel prediction confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ConfidenceMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidMap(format!(
                "confidence map of {} entries does not fit {width}x{height}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidMap(format!(
                "confidence {} at pixel {pos} outside [0, 1]",
                data[pos]
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub(crate) fn check_paired(&self, map: &LabelMap) -> Result<()> {
        if self.width != map.width() || self.height != map.height() {
            return Err(Error::DimensionMismatch {
                expected_w: map.width(),
                expected_h: map.height(),
                got_w: self.width,
                got_h: self.height,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, k: u16, data: &[u16]) -> LabelMap {
        LabelMap::new(w, h, k, DEFAULT_IGNORE, data.to_vec()).unwrap()
    }

    #[test]
    fn binarize_all_background_is_empty() {
        let m = LabelMap::filled(5, 3, 3, DEFAULT_IGNORE, 0).unwrap();
        assert_eq!(binarize_class(&m, 1).unwrap().count_ones(), 0);
    }

    #[test]
    fn binarize_constant_class_is_full() {
        let m = LabelMap::filled(5, 3, 3, DEFAULT_IGNORE, 2).unwrap();
        assert_eq!(binarize_class(&m, 2).unwrap().count_ones(), 15);
    }

    #[test]
    fn binarize_block() {
        #[rustfmt::skip]
        let m = map(4, 4, 3, &[
            0, 0, 0, 0,
            0, 2, 2, 0,
            0, 2, 2, 1,
            0, 0, 255, 1,
        ]);
        let b = binarize_class(&m, 2).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(b.get(r, c), m.get(r, c) == 2);
            }
        }
        assert_eq!(b.count_ones(), 4);
        let ones = binarize_class(&m, 1).unwrap();
        assert!(!ones.get(3, 2), "ignore pixels never become foreground");
    }

    #[test]
    fn binarize_rejects_background_and_out_of_range() {
        let m = LabelMap::filled(2, 2, 3, DEFAULT_IGNORE, 0).unwrap();
        assert!(matches!(binarize_class(&m, 0), Err(Error::InvalidClass { .. })));
        assert!(matches!(binarize_class(&m, 3), Err(Error::InvalidClass { .. })));
    }

    #[test]
    fn label_map_validation() {
        assert!(LabelMap::new(0, 2, 3, 255, vec![]).is_err());
        assert!(LabelMap::new(2, 2, 3, 255, vec![0, 1, 2]).is_err());
        assert!(LabelMap::new(2, 1, 3, 255, vec![0, 4]).is_err());
        // the unknown sentinel (== K) and ignore are accepted
        assert!(LabelMap::new(2, 1, 3, 255, vec![3, 255]).is_ok());
        assert!(LabelMap::new(2, 1, 3, 3, vec![0, 0]).is_err());
    }

    #[test]
    fn confidence_rejects_nan_and_out_of_range() {
        assert!(ConfidenceMap::new(1, 1, vec![f64::NAN]).is_err());
        assert!(ConfidenceMap::new(1, 1, vec![1.5]).is_err());
        assert!(ConfidenceMap::new(1, 2, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn connectivity_parse() {
        assert_eq!("4".parse::<Connectivity>().unwrap(), Connectivity::Four);
        assert_eq!("8".parse::<Connectivity>().unwrap(), Connectivity::Eight);
        assert!("6".parse::<Connectivity>().is_err());
    }
}
