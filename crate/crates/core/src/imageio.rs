//! Grayscale image container plus the decode, crop and resize stages that
//! normalize a face region before encoding.
//!
//! Only binary PGM (`P5`, 8-bit) and PNG are understood. Colour PNGs are
//! reduced to luma with BT.601 weights.

use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Shape {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Image filled with a single intensity.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    /// Build an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

/// Region of interest in pixel coordinates, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        BoundingBox { x, y, w, h }
    }

    pub fn full(img: &GrayImage) -> Self {
        BoundingBox::new(0, 0, img.width(), img.height())
    }
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Decode a PGM (P5) or PNG file into grayscale.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::UnsupportedFormat(format!(
            "netpbm variant P{} (only binary P5 is supported)",
            bytes[1] as char
        )))
    } else {
        Err(Error::UnsupportedFormat(
            "unrecognized file signature (expected PGM P5 or PNG)".into(),
        ))
    }
}

/// BT.601 luma, rounded half-up.
#[inline]
pub fn to_grayscale(r: u8, g: u8, b: u8) -> u8 {
    // Integer weights keep the half-up rounding exact.
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(pgm_error(format!("missing {what} in header")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| pgm_error(format!("{what} out of range")))
    }
}

fn pgm_error(reason: impl Into<String>) -> Error {
    Error::Decode {
        format: "PGM",
        reason: reason.into(),
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = PgmCursor { bytes, pos: 2 };
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    let maxval = cur.read_uint("maxval")?;
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(pgm_error("truncated header")),
    }
    if width == 0 || height == 0 {
        return Err(pgm_error(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 {
        return Err(pgm_error("maxval must be positive"));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "16-bit PGM (maxval {maxval})"
        )));
    }
    let len = width
        .checked_mul(height)
        .ok_or_else(|| pgm_error("dimensions overflow"))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < len {
        return Err(pgm_error(format!(
            "raster truncated: expected {len} bytes, found {}",
            raster.len()
        )));
    }
    let mut data = raster[..len].to_vec();
    if maxval < 255 {
        let m = maxval as u32;
        for v in &mut data {
            let s = (*v as u32).min(m);
            *v = ((s * 255 * 2 + m) / (2 * m)) as u8;
        }
    }
    GrayImage::new(width, height, data)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let png_err = |e: png::DecodingError| Error::Decode {
        format: "PNG",
        reason: e.to_string(),
    };
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Decode {
        format: "PNG",
        reason: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (width, height) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let stride = info.line_size;
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let line = &buf[y * stride..y * stride + width * channels];
        match info.color_type {
            png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => {
                data.extend(line.chunks_exact(channels).map(|px| px[0]));
            }
            png::ColorType::Rgb | png::ColorType::Rgba => {
                data.extend(
                    line.chunks_exact(channels)
                        .map(|px| to_grayscale(px[0], px[1], px[2])),
                );
            }
            png::ColorType::Indexed => {
                return Err(Error::UnsupportedFormat(
                    "indexed PNG was not expanded".into(),
                ))
            }
        }
    }
    GrayImage::new(width, height, data)
}

/// Encode as binary PGM (P5).
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

/// Encode as an 8-bit grayscale PNG.
pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let png_err = |e: png::EncodingError| Error::Decode {
        format: "PNG",
        reason: e.to_string(),
    };
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(img.data()).map_err(png_err)?;
    }
    Ok(out)
}

/// Extract the sub-image covered by `bbox`.
pub fn crop(img: &GrayImage, bbox: &BoundingBox) -> Result<GrayImage> {
    if bbox.w == 0 || bbox.h == 0 {
        return Err(Error::Argument(format!(
            "crop box must be non-empty, got {}x{}",
            bbox.w, bbox.h
        )));
    }
    if bbox.x.saturating_add(bbox.w) > img.width() {
        return Err(Error::Range {
            edge: "right",
            detail: format!("x + w = {} > width {}", bbox.x + bbox.w, img.width()),
        });
    }
    if bbox.y.saturating_add(bbox.h) > img.height() {
        return Err(Error::Range {
            edge: "bottom",
            detail: format!("y + h = {} > height {}", bbox.y + bbox.h, img.height()),
        });
    }
    let mut data = Vec::with_capacity(bbox.w * bbox.h);
    for y in bbox.y..bbox.y + bbox.h {
        data.extend_from_slice(&img.row(y)[bbox.x..bbox.x + bbox.w]);
    }
    GrayImage::new(bbox.w, bbox.h, data)
}

/// Per-axis sample positions for a pixel-centre bilinear resize.
fn axis_taps(src_len: usize, dst_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = src_len as f64 / dst_len as f64;
    let last = (src_len - 1) as f64;
    (0..dst_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src_len - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear resize with pixel-centre mapping and edge clamping.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Argument(format!(
            "output dimensions must be positive, got {out_w}x{out_h}"
        )));
    }
    let xs = axis_taps(img.width(), out_w);
    let ys = axis_taps(img.height(), out_h);
    let mut data = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        let (r0, r1) = (img.row(y0), img.row(y1));
        for &(x0, x1, fx) in &xs {
            let top = lerp(r0[x0] as f64, r0[x1] as f64, fx);
            let bottom = lerp(r1[x0] as f64, r1[x1] as f64, fx);
            let v = lerp(top, bottom, fy);
            data.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(out_w, out_h, data)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}
