//! Reading and writing label and confidence maps.
//!
//! Two encodings are supported:
//!
//! * single-channel PNG (grayscale or palette indices, 1 to 16 bits), where the
//!   sample value is the class id (label maps) or a confidence scaled by the
//!   maximum sample value (confidence maps);
//! * a headerless little-endian binary layout: `u16` width, `u16` height, then
//!   row-major `u16` class ids or `f32` confidences.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ConfidenceMap, LabelMap};
use crate::error::{Error, Result};

const HEADER_LEN: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelFormat {
    Png,
    Binary,
}

impl LabelFormat {
    /// `.png` files are PNG; anything else is the binary layout.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("png") => LabelFormat::Png,
            _ => LabelFormat::Binary,
        }
    }
}

impl std::str::FromStr for LabelFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "png" => Ok(LabelFormat::Png),
            "bin" | "binary" => Ok(LabelFormat::Binary),
            other => Err(format!("unknown input format {other:?}")),
        }
    }
}

/// How raw stored values become class ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapFormat {
    /// `None` picks the format from the file extension.
    pub format: Option<LabelFormat>,
    pub num_classes: u16,
    pub ignore_id: u16,
    /// Raw value to class id. When present, every raw value other than the
    /// ignore id must appear in the table.
    pub remap: Option<BTreeMap<u16, u16>>,
}

impl LabelMapFormat {
    pub fn new(num_classes: u16, ignore_id: u16) -> Self {
        Self {
            format: None,
            num_classes,
            ignore_id,
            remap: None,
        }
    }

    fn decode(&self, raw: u16, offset: u64) -> Result<u16> {
        if raw == self.ignore_id {
            return Ok(raw);
        }
        let v = match &self.remap {
            Some(table) => *table
                .get(&raw)
                .ok_or_else(|| Error::format(offset, format!("value {raw} missing from the remap table")))?,
            None => raw,
        };
        if v < self.num_classes || v == self.ignore_id {
            Ok(v)
        } else {
            Err(Error::format(
                offset,
                format!("class id {v} out of range for {} classes", self.num_classes),
            ))
        }
    }
}

pub fn load_label_map(path: impl AsRef<Path>, fmt: &LabelMapFormat) -> Result<LabelMap> {
    let path = path.as_ref();
    match fmt.format.unwrap_or_else(|| LabelFormat::from_path(path)) {
        LabelFormat::Png => {
            let img = read_png(path)?;
            let bytes_per_sample = if img.bit_depth == 16 { 2 } else { 1 };
            let data = img
                .samples
                .iter()
                .enumerate()
                .map(|(i, &raw)| fmt.decode(raw, (i * bytes_per_sample) as u64))
                .collect::<Result<Vec<_>>>()?;
            LabelMap::new(img.width, img.height, fmt.num_classes, fmt.ignore_id, data)
        }
        LabelFormat::Binary => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            read_binary_label_map(&bytes, fmt)
        }
    }
}

/// Decodes the binary label layout from memory.
pub fn read_binary_label_map(bytes: &[u8], fmt: &LabelMapFormat) -> Result<LabelMap> {
    let (width, height) = read_header(bytes)?;
    let expected = HEADER_LEN as usize + width * height * 2;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected) as u64,
            format!(
                "expected {expected} bytes for {width}x{height} u16 ids, found {}",
                bytes.len()
            ),
        ));
    }
    let data = bytes[HEADER_LEN as usize..]
        .chunks_exact(2)
        .enumerate()
        .map(|(i, b)| fmt.decode(u16::from_le_bytes([b[0], b[1]]), HEADER_LEN + 2 * i as u64))
        .collect::<Result<Vec<_>>>()?;
    LabelMap::new(width, height, fmt.num_classes, fmt.ignore_id, data)
}

pub fn write_binary_label_map(map: &LabelMap, out: &mut impl Write) -> std::io::Result<()> {
    write_header(map.width(), map.height(), out)?;
    for &v in map.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes `map` as PNG (by extension) or the binary layout. PNGs are 8-bit
/// when every value fits, 16-bit otherwise, so a reload is bit-exact.
pub fn save_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match LabelFormat::from_path(path) {
        LabelFormat::Png => {
            let wide = map.data().iter().any(|&v| v > 255);
            write_png(path, map.width(), map.height(), wide, map.data())
        }
        LabelFormat::Binary => {
            check_header_dims(map.width(), map.height())?;
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            write_binary_label_map(map, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))
        }
    }
}

pub fn load_confidence_map(path: impl AsRef<Path>) -> Result<ConfidenceMap> {
    let path = path.as_ref();
    match LabelFormat::from_path(path) {
        LabelFormat::Png => {
            let img = read_png(path)?;
            let max = ((1u32 << img.bit_depth) - 1) as f64;
            let data = img.samples.iter().map(|&v| v as f64 / max).collect();
            ConfidenceMap::new(img.width, img.height, data)
        }
        LabelFormat::Binary => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            read_binary_confidence(&bytes)
        }
    }
}

/// Decodes the binary confidence layout (`f32` values) from memory.
pub fn read_binary_confidence(bytes: &[u8]) -> Result<ConfidenceMap> {
    // f32 round-off tolerance at the ends of [0, 1]
    const SLACK: f64 = 1e-6;
    let (width, height) = read_header(bytes)?;
    let expected = HEADER_LEN as usize + width * height * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected) as u64,
            format!(
                "expected {expected} bytes for {width}x{height} f32 values, found {}",
                bytes.len()
            ),
        ));
    }
    let data = bytes[HEADER_LEN as usize..]
        .chunks_exact(4)
        .enumerate()
        .map(|(i, b)| {
            let offset = HEADER_LEN + 4 * i as u64;
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
            if v.is_nan() {
                Err(Error::format(offset, "NaN confidence"))
            } else if (-SLACK..0.0).contains(&v) {
                Ok(0.0)
            } else if v > 1.0 && v <= 1.0 + SLACK {
                Ok(1.0)
            } else if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(Error::format(offset, format!("confidence {v} outside [0, 1]")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ConfidenceMap::new(width, height, data)
}

/// Writes a confidence map as 16-bit PNG (by extension) or binary `f32`.
pub fn save_confidence_map(conf: &ConfidenceMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match LabelFormat::from_path(path) {
        LabelFormat::Png => {
            let samples: Vec<u16> = conf.data().iter().map(|&v| (v * 65535.0).round() as u16).collect();
            write_png(path, conf.width(), conf.height(), true, &samples)
        }
        LabelFormat::Binary => {
            check_header_dims(conf.width(), conf.height())?;
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            let res = write_header(conf.width(), conf.height(), &mut w).and_then(|_| {
                for &v in conf.data() {
                    w.write_all(&(v as f32).to_le_bytes())?;
                }
                w.flush()
            });
            res.map_err(|e| Error::io(path, e))
        }
    }
}

fn read_header(bytes: &[u8]) -> Result<(usize, usize)> {
    if bytes.len() < HEADER_LEN as usize {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    let width = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
    let height = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
    if width == 0 || height == 0 {
        return Err(Error::format(0, format!("zero dimension {width}x{height}")));
    }
    Ok((width, height))
}

fn check_header_dims(width: usize, height: usize) -> Result<()> {
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::format(
            0,
            format!("{width}x{height} does not fit the u16 binary header"),
        ));
    }
    Ok(())
}

fn write_header(width: usize, height: usize, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(&(width as u16).to_le_bytes())?;
    out.write_all(&(height as u16).to_le_bytes())
}

struct PngSamples {
    width: usize,
    height: usize,
    bit_depth: u32,
    samples: Vec<u16>,
}

fn read_png(path: &Path) -> Result<PngSamples> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut raw = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut raw)
        .map_err(|e| Error::io(path, e))?;
    decode_png(&raw)
}

fn decode_png(raw: &[u8]) -> Result<PngSamples> {
    let decoder = png::Decoder::new(std::io::Cursor::new(raw));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(0, format!("invalid PNG: {e}")))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(0, "PNG dimensions overflow"))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(0, format!("invalid PNG: {e}")))?;
    if !matches!(info.color_type, png::ColorType::Grayscale | png::ColorType::Indexed) {
        return Err(Error::format(
            0,
            format!("expected a single-channel PNG, found {:?}", info.color_type),
        ));
    }
    let width = info.width as usize;
    let height = info.height as usize;
    let bit_depth = info.bit_depth as u32;
    let mut samples = Vec::with_capacity(width * height);
    for row in buf.chunks_exact(info.line_size).take(height) {
        match bit_depth {
            16 => samples.extend(
                row.chunks_exact(2)
                    .take(width)
                    .map(|b| u16::from_be_bytes([b[0], b[1]])),
            ),
            8 => samples.extend(row.iter().take(width).map(|&b| b as u16)),
            1 | 2 | 4 => {
                let per_byte = 8 / bit_depth as usize;
                let mask = (1u16 << bit_depth) - 1;
                samples.extend((0..width).map(|x| {
                    let byte = row[x / per_byte] as u16;
                    let shift = 8 - bit_depth as usize * (x % per_byte + 1);
                    (byte >> shift) & mask
                }));
            }
            other => {
                return Err(Error::format(0, format!("unsupported bit depth {other}")));
            }
        }
    }
    Ok(PngSamples {
        width,
        height,
        bit_depth,
        samples,
    })
}

fn write_png(path: &Path, width: usize, height: usize, wide: bool, samples: &[u16]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let to_err = |e: png::EncodingError| Error::Serialize(format!("{}: {e}", path.display()));
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    let bytes: Vec<u8> = if wide {
        enc.set_depth(png::BitDepth::Sixteen);
        samples.iter().flat_map(|v| v.to_be_bytes()).collect()
    } else {
        enc.set_depth(png::BitDepth::Eight);
        samples.iter().map(|&v| v as u8).collect()
    };
    let mut writer = enc.write_header().map_err(to_err)?;
    writer.write_image_data(&bytes).map_err(to_err)?;
    writer.finish().map_err(to_err)
}
