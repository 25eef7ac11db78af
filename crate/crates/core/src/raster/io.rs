//! Mask and raster file formats: binary PGM (P5) and 8-bit PNG.
//!
//! Masks are thresholded at 128 on an 8-bit scale: a sample `v` with maxval
//! `m` is foreground when `v * 255 / m >= 128`.

use std::fs;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use super::{BinaryMask, Raster};
use crate::error::{Error, Result};

const THRESHOLD: u32 = 128;

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Decoded 8-bit grayscale samples from a P5 file, rescaled to maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let begin = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if begin == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[begin..pos]).map_err(|_| Error::Format("non-ascii PGM header".into()))?);
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("unsupported PGM magic {:?}", fields[0])));
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM {what}: {s:?}")))
    };
    let width = parse(fields[1], "width")?;
    let height = parse(fields[2], "height")?;
    let maxval = parse(fields[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
    let raw = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    let data = raw
        .iter()
        .map(|&v| ((v as usize * 255) / maxval).min(255) as u8)
        .collect();
    Ok((width, height, data))
}

pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

fn threshold(width: usize, height: usize, gray: &[u8]) -> Result<BinaryMask> {
    BinaryMask::from_vec(
        width,
        height,
        gray.iter().map(|&v| v as u32 >= THRESHOLD).collect(),
    )
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    if is_pgm(path) {
        let (w, h, data) = decode_pgm(&fs::read(path)?)?;
        threshold(w, h, &data)
    } else {
        let img = image::open(path)?.to_luma8();
        threshold(img.width() as usize, img.height() as usize, img.as_raw())
    }
}

fn mask_bytes(mask: &BinaryMask) -> Vec<u8> {
    mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect()
}

pub fn write_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let bytes = mask_bytes(mask);
    if is_pgm(path) {
        fs::write(path, encode_pgm(mask.width(), mask.height(), &bytes))?;
    } else {
        let img: GrayImage =
            ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, bytes)
                .expect("buffer matches dimensions");
        img.save(path)?;
    }
    Ok(())
}

/// Loads an image as a raster with samples on the 0..=255 scale. Grayscale
/// inputs give one channel, anything else three (RGB).
pub fn read_raster(path: &Path) -> Result<Raster> {
    if is_pgm(path) {
        let (w, h, data) = decode_pgm(&fs::read(path)?)?;
        return Raster::from_vec(w, h, 1, data.into_iter().map(f32::from).collect());
    }
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLumaA16(_) => {
            let g = img.to_luma8();
            Raster::from_vec(w, h, 1, g.into_raw().into_iter().map(f32::from).collect())
        }
        _ => {
            let rgb = img.to_rgb8();
            Raster::from_vec(w, h, 3, rgb.into_raw().into_iter().map(f32::from).collect())
        }
    }
}

fn to_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Writes a raster as 8-bit PNG (or PGM for single-channel `.pgm` paths).
/// One channel gives grayscale, three give RGB; other counts write channel 0.
pub fn write_raster(raster: &Raster, path: &Path) -> Result<()> {
    let (w, h, c) = (raster.width(), raster.height(), raster.channels());
    if c == 3 && !is_pgm(path) {
        let bytes = raster.data().iter().map(|&v| to_u8(v)).collect();
        let img: image::RgbImage =
            ImageBuffer::from_raw(w as u32, h as u32, bytes).expect("buffer matches dimensions");
        img.save(path)?;
        return Ok(());
    }
    let gray: Vec<u8> = raster.data().iter().step_by(c).map(|&v| to_u8(v)).collect();
    if is_pgm(path) {
        fs::write(path, encode_pgm(w, h, &gray))?;
    } else {
        let img: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(w as u32, h as u32, gray).expect("buffer matches dimensions");
        img.save(path)?;
    }
    Ok(())
}

/// Sidecar describing a flat little-endian `f32` dump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloatSidecar {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// Writes `path` as raw little-endian `f32` samples and `path.json` as the sidecar.
pub fn write_float_raster(raster: &Raster, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = raster.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    let sidecar = FloatSidecar {
        height: raster.height(),
        width: raster.width(),
        channels: raster.channels(),
    };
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    fs::write(side, serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_float_raster(path: &Path) -> Result<Raster> {
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    let meta: FloatSidecar = serde_json::from_slice(&fs::read(side)?)?;
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format("float raster length is not a multiple of 4".into()));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Raster::from_vec(meta.width, meta.height, meta.channels, data)
}
