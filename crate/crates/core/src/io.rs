//! PNG and raw tensor file formats.
//!
//! The raw tensor format ("TELT") is:
//!
//! ```text
//! b"TELT" | channels: u32 LE | height: u32 LE | width: u32 LE | data: f32 LE × (C·H·W)
//! ```
//!
//! Data is row-major `(channel, row, column)`. Values are narrowed to `f32` on
//! save, so `load(save(t))` reproduces `t` bit-exactly whenever `t` holds
//! `f32`-representable values (anything that was itself loaded from a file).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use png::{BitDepth, ColorType};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, LabelMap, IGNORE_INDEX};

pub const TENSOR_MAGIC: &[u8; 4] = b"TELT";
const HEADER_LEN: usize = 16;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

struct RawPng {
    width: usize,
    height: usize,
    color: ColorType,
    samples: Vec<u8>,
}

fn decode_png(path: &Path) -> Result<RawPng> {
    let decoder = png::Decoder::new(open(path)?);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if depth != BitDepth::Eight {
        return Err(Error::format(
            path,
            format!("unsupported bit depth {depth:?}, expected 8-bit"),
        ));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let width = info.width as usize;
    let height = info.height as usize;
    let row_len = width * color.samples();
    let mut samples = Vec::with_capacity(row_len * height);
    for row in buf.chunks(info.line_size).take(height) {
        samples.extend_from_slice(&row[..row_len]);
    }
    Ok(RawPng {
        width,
        height,
        color,
        samples,
    })
}

/// Reads an 8-bit grayscale or RGB PNG, scaling values to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let raw = decode_png(path)?;
    let channels = match raw.color {
        ColorType::Grayscale => 1,
        ColorType::Rgb => 3,
        other => {
            return Err(Error::format(
                path,
                format!("unsupported color type {other:?}, expected grayscale or RGB"),
            ))
        }
    };
    let n = raw.width * raw.height;
    let mut data = vec![0.0; channels * n];
    for i in 0..n {
        for c in 0..channels {
            data[c * n + i] = f64::from(raw.samples[i * channels + c]) / 255.0;
        }
    }
    DenseTensor::new(channels, raw.height, raw.width, data)
}

/// Writes a 1- or 3-channel tensor as an 8-bit PNG, clamping to `[0, 1]`.
pub fn save_image(tensor: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match tensor.channels() {
        1 => ColorType::Grayscale,
        3 => ColorType::Rgb,
        c => {
            return Err(Error::Argument(format!(
                "cannot write a {c}-channel tensor as PNG"
            )))
        }
    };
    let n = tensor.num_pixels();
    let channels = tensor.channels();
    let mut bytes = vec![0u8; n * channels];
    for i in 0..n {
        for c in 0..channels {
            bytes[i * channels + c] = (tensor.at(c, i).clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    write_png(path, tensor.width(), tensor.height(), color, None, &bytes)
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: ColorType,
    palette: Option<Vec<u8>>,
    bytes: &[u8],
) -> Result<()> {
    let mut encoder = png::Encoder::new(create(path)?, width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(BitDepth::Eight);
    if let Some(palette) = palette {
        encoder.set_palette(palette);
    }
    let encode_err = |e: png::EncodingError| Error::format(path, e.to_string());
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

/// Reads an indexed or grayscale 8-bit PNG as raw class indices.
pub fn load_label_map(path: impl AsRef<Path>, num_classes: usize) -> Result<LabelMap> {
    let path = path.as_ref();
    let raw = decode_png(path)?;
    if !matches!(raw.color, ColorType::Indexed | ColorType::Grayscale) {
        return Err(Error::format(
            path,
            format!(
                "unsupported color type {:?} for a label map, expected indexed or grayscale",
                raw.color
            ),
        ));
    }
    LabelMap::new(raw.height, raw.width, num_classes, raw.samples)
}

/// Writes a label map as an indexed PNG whose palette colors each class.
pub fn save_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write_png(
        path.as_ref(),
        map.width(),
        map.height(),
        ColorType::Indexed,
        Some(label_palette()),
        map.labels(),
    )
}

/// 256-entry palette: the bit-interleaved scheme common to segmentation
/// datasets for class colors, white for the ignore index.
fn label_palette() -> Vec<u8> {
    let mut palette = Vec::with_capacity(256 * 3);
    for index in 0..=255u8 {
        if index == IGNORE_INDEX {
            palette.extend_from_slice(&[255, 255, 255]);
            continue;
        }
        let (mut r, mut g, mut b) = (0u8, 0u8, 0u8);
        let mut cid = index;
        for shift in (0..8).rev() {
            r |= (cid & 1) << shift;
            g |= ((cid >> 1) & 1) << shift;
            b |= ((cid >> 2) & 1) << shift;
            cid >>= 3;
        }
        palette.extend_from_slice(&[r, g, b]);
    }
    palette
}

/// Serializes a tensor in the raw TELT layout.
pub fn encode_tensor(tensor: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * tensor.data().len());
    out.extend_from_slice(TENSOR_MAGIC);
    let (c, h, w) = tensor.shape();
    for dim in [c, h, w] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for &v in tensor.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<DenseTensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "truncated header"));
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::format(path, "bad magic, expected TELT"));
    }
    let dim = |k: usize| {
        let off = 4 + 4 * k;
        u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize
    };
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let count = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::format(path, "dimensions overflow"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * count {
        return Err(Error::format(
            path,
            format!(
                "expected {} data bytes for {c}x{h}x{w}, found {}",
                4 * count,
                body.len()
            ),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect();
    DenseTensor::new(c, h, w, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_tensor(tensor: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_all(&encode_tensor(tensor))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes, path)
}
