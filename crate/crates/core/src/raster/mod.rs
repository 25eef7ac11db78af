//! Raster primitives: binary masks, float maps, multi-channel images, the exact
//! Euclidean distance transform, connected components and contour tracing.

mod components;
mod contour;
mod edt;
pub mod io;

pub use components::{connected_components, label_components};
pub use contour::{trace_contour, Contour};
pub use edt::{euclidean_distance_transform, squared_distance_transform};

use crate::error::{Error, Result};
use crate::point::Point;

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

/// Row-major binary raster. `true` marks foreground (kernel) pixels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![false; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::DataLength {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Parses rows of `#` (foreground) and `.` (background). Handy in tests.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(width * height);
        for row in rows {
            if row.len() != width {
                return Err(Error::Format("ragged ascii mask".into()));
            }
            data.extend(row.bytes().map(|b| b == b'#'));
        }
        Self::from_vec(width, height, data)
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

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Like [`get`](Self::get) but treats anything outside the image as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize]
    }

    /// Foreground lookup for a continuous position.
    pub fn contains_point(&self, p: Point) -> bool {
        p.is_finite() && self.get_signed(p.x.floor() as i64, p.y.floor() as i64)
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Inclusive pixel bounds `(min_x, min_y, max_x, max_y)` of the foreground.
    pub fn bounds(&self) -> Option<(usize, usize, usize, usize)> {
        self.foreground().fold(None, |acc, (x, y)| match acc {
            None => Some((x, y, x, y)),
            Some((x0, y0, x1, y1)) => Some((x0.min(x), y0.min(y), x1.max(x), y1.max(y))),
        })
    }

    /// Pixelwise OR. Shapes must match.
    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    /// Pixelwise AND. Shapes must match.
    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data,
        })
    }

    /// Corners of the foreground pixel squares that touch the background.
    /// Their hull is the hull of the region's area.
    pub fn outline_corners(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for (x, y) in self.foreground() {
            let (xi, yi) = (x as i64, y as i64);
            let boundary = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dx, dy)| !self.get_signed(xi + dx, yi + dy));
            if boundary {
                let (fx, fy) = (x as f64, y as f64);
                out.extend([
                    Point::new(fx, fy),
                    Point::new(fx + 1.0, fy),
                    Point::new(fx + 1.0, fy + 1.0),
                    Point::new(fx, fy + 1.0),
                ]);
            }
        }
        out
    }

    /// Block-downscale by an integer factor; a block is foreground when at
    /// least half of its in-image pixels are.
    pub fn downscale(&self, factor: usize) -> Result<BinaryMask> {
        if factor == 0 {
            return Err(Error::InvalidParameter("downscale factor must be > 0".into()));
        }
        let w = self.width.div_ceil(factor);
        let h = self.height.div_ceil(factor);
        BinaryMask::from_fn(w, h, |bx, by| {
            let (mut on, mut total) = (0usize, 0usize);
            for y in by * factor..((by + 1) * factor).min(self.height) {
                for x in bx * factor..((bx + 1) * factor).min(self.width) {
                    total += 1;
                    on += self.get(x, y) as usize;
                }
            }
            2 * on >= total
        })
    }
}

/// Row-major map of floating-point values, e.g. a soft segmentation output.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FloatMap {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::DataLength {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            data: mask.data.iter().map(|&b| b as u8 as f64).collect(),
        }
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
}

/// Per-pixel Euclidean distance to the nearest background pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DistanceMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Multi-channel raster with interleaved `f32` samples (an image or a feature map).
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::from_vec(width, height, channels, vec![0.0; width * height * channels])
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        if channels == 0 {
            return Err(Error::InvalidParameter("raster needs at least one channel".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::DataLength {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut r = Self::new(width, height, channels)?;
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    r.data[(y * width + x) * channels + c] = f(x, y, c);
                }
            }
        }
        Ok(r)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Bilinear sample of channel `c` at a continuous position. Positions
    /// outside the image area return 0; inside it, neighbors clamp to the edge.
    pub fn sample_bilinear(&self, p: Point, c: usize) -> f32 {
        if !p.is_finite()
            || p.x < 0.0
            || p.y < 0.0
            || p.x > self.width as f64
            || p.y > self.height as f64
        {
            return 0.0;
        }
        let fx = p.x - 0.5;
        let fy = p.y - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let ax = fx - x0;
        let ay = fy - y0;
        let clamp_x = |v: f64| v.clamp(0.0, (self.width - 1) as f64) as usize;
        let clamp_y = |v: f64| v.clamp(0.0, (self.height - 1) as f64) as usize;
        let (xa, xb) = (clamp_x(x0), clamp_x(x0 + 1.0));
        let (ya, yb) = (clamp_y(y0), clamp_y(y0 + 1.0));
        let top = self.get(xa, ya, c) as f64 * (1.0 - ax) + self.get(xb, ya, c) as f64 * ax;
        let bottom = self.get(xa, yb, c) as f64 * (1.0 - ax) + self.get(xb, yb, c) as f64 * ax;
        (top * (1.0 - ay) + bottom * ay) as f32
    }

    /// Box-average downscale by an integer factor.
    pub fn downscale(&self, factor: usize) -> Result<Raster> {
        if factor == 0 {
            return Err(Error::InvalidParameter("downscale factor must be > 0".into()));
        }
        let w = self.width.div_ceil(factor);
        let h = self.height.div_ceil(factor);
        Raster::from_fn(w, h, self.channels, |bx, by, c| {
            let (mut sum, mut n) = (0.0f64, 0usize);
            for y in by * factor..((by + 1) * factor).min(self.height) {
                for x in bx * factor..((bx + 1) * factor).min(self.width) {
                    sum += self.get(x, y, c) as f64;
                    n += 1;
                }
            }
            (sum / n as f64) as f32
        })
    }
}
