//! Inspection overlays: center points with their radii, center-lines,
//! enclosing boxes and rectification grids drawn over a mask or image.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::Result;
use crate::point::Point;
use crate::raster::{BinaryMask, Raster};

pub type Color = [u8; 3];

pub const BOX: Color = [0, 200, 0];
pub const LINE: Color = [30, 90, 255];
pub const CIRCLE: Color = [230, 40, 40];
pub const GRID: Color = [240, 200, 0];

/// RGB drawing surface.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<Color>,
}

impl Canvas {
    /// Foreground gray, background black.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            pixels: mask.data().iter().map(|&b| if b { [90; 3] } else { [0; 3] }).collect(),
        }
    }

    /// Channel 0 of the raster, dimmed, as gray (or its RGB when it has three channels).
    pub fn from_raster(raster: &Raster) -> Self {
        let c = raster.channels();
        let mut pixels = Vec::with_capacity(raster.width() * raster.height());
        for y in 0..raster.height() {
            for x in 0..raster.width() {
                let v = |k: usize| (raster.get(x, y, k).clamp(0.0, 255.0) * 0.6) as u8;
                pixels.push(if c == 3 { [v(0), v(1), v(2)] } else { [v(0); 3] });
            }
        }
        Self { width: raster.width(), height: raster.height(), pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Color {
        self.pixels[y * self.width + x]
    }

    /// Colors the pixel containing `p`, if on the canvas.
    pub fn plot(&mut self, p: Point, color: Color) {
        if p.x >= 0.0 && p.y >= 0.0 {
            let (x, y) = (p.x as usize, p.y as usize);
            if x < self.width && y < self.height {
                self.pixels[y * self.width + x] = color;
            }
        }
    }

    pub fn segment(&mut self, a: Point, b: Point, color: Color) {
        let n = ((a.distance(b) * 2.0).ceil() as usize).max(1);
        for k in 0..=n {
            self.plot(a + (b - a) * (k as f64 / n as f64), color);
        }
    }

    pub fn polyline(&mut self, pts: &[Point], closed: bool, color: Color) {
        for w in pts.windows(2) {
            self.segment(w[0], w[1], color);
        }
        if closed && pts.len() > 2 {
            self.segment(pts[pts.len() - 1], pts[0], color);
        }
    }

    pub fn circle(&mut self, center: Point, radius: f64, color: Color) {
        let n = ((radius * std::f64::consts::TAU * 2.0).ceil() as usize).max(8);
        for k in 0..n {
            let t = k as f64 / n as f64 * std::f64::consts::TAU;
            self.plot(center + Point::new(t.cos(), t.sin()) * radius, color);
        }
        self.plot(center, color);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let img: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes)
                .expect("buffer matches dimensions");
        img.save(path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drawing_stays_on_canvas() {
        let mut c = Canvas::from_mask(&BinaryMask::from_ascii(&["#...", "....", "...."]).unwrap());
        assert_eq!(c.get(0, 0), [90; 3]);
        c.segment(Point::new(-3.0, 0.5), Point::new(10.0, 0.5), LINE);
        assert!((0..4).all(|x| c.get(x, 0) == LINE));
        c.circle(Point::new(2.0, 1.5), 1.0, CIRCLE);
        assert_eq!(c.get(2, 1), CIRCLE);
        c.polyline(&[Point::new(0.5, 2.5), Point::new(3.5, 2.5)], false, BOX);
        assert_eq!(c.get(3, 2), BOX);
    }

    #[test]
    fn saves_png() {
        let dir = tempfile::tempdir().unwrap();
        let c = Canvas::from_raster(&Raster::from_fn(3, 2, 3, |x, _, k| (x * 100 + k) as f32).unwrap());
        let p = dir.path().join("o.png");
        c.save(&p).unwrap();
        let back = image::open(&p).unwrap().to_rgb8();
        assert_eq!(back.get_pixel(2, 1).0, [120, 120, 121]);
    }
}
