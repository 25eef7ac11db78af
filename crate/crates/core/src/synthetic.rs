//! Synthetic text strips with known medial lines, for oracle testing.
//!
//! A strip is the set of points within `half_height` of a sinusoidal spine
//! `y = A sin(2πx / P)`, `0 ≤ x ≤ length`, measured along the spine normal,
//! with flat caps at both ends. The spine is then rotated by `rotation_deg`
//! (positive = counter-clockwise in a y-up frame).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{PageId, PageRecord, TextBox};
use crate::point::Point;
use crate::polygon::{smallest_enclosing_rectangle, Polygon};
use crate::raster::{BinaryMask, Raster};

/// Foreground intensity of painted textures.
pub const INK: f32 = 255.0;
/// Blank border around a rendered strip, in pixels.
pub const STRIP_MARGIN: f64 = 2.0;
/// Blank border around a rendered page, in pixels.
pub const PAGE_MARGIN: usize = 8;
const MAX_SIDE: f64 = 16384.0;
const ARC_STEP: f64 = 0.25;

/// Pattern painted inside a strip, in strip coordinates (arc length along the
/// spine, signed offset across it).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    Constant,
    VerticalBars { width: f64 },
    Checker { size: f64 },
}

impl Default for Texture {
    fn default() -> Self {
        Texture::Constant
    }
}

fn default_period() -> f64 {
    1.0
}

/// Geometry and texture of one strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripSpec {
    pub length: f64,
    pub half_height: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub rotation_deg: f64,
    #[serde(default)]
    pub texture: Texture,
    /// Transcript for page ground truth; generated from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl StripSpec {
    pub fn straight(length: f64, half_height: f64) -> Self {
        Self {
            length,
            half_height,
            amplitude: 0.0,
            period: 1.0,
            rotation_deg: 0.0,
            texture: Texture::Constant,
            text: None,
        }
    }

    pub fn sine(length: f64, half_height: f64, amplitude: f64, period: f64) -> Self {
        Self { amplitude, period, ..Self::straight(length, half_height) }
    }

    pub fn with_rotation(mut self, degrees: f64) -> Self {
        self.rotation_deg = degrees;
        self
    }

    pub fn with_texture(mut self, texture: Texture) -> Self {
        self.texture = texture;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SpecOutOfBounds(msg));
        let vals = [self.length, self.half_height, self.amplitude, self.period, self.rotation_deg];
        if vals.iter().any(|v| !v.is_finite()) {
            return bad("strip parameters must be finite".into());
        }
        if self.half_height < 2.0 {
            return bad(format!("half_height {} < 2", self.half_height));
        }
        if self.period <= 0.0 {
            return bad(format!("period {} <= 0", self.period));
        }
        if self.amplitude < 0.0 {
            return bad(format!("amplitude {} < 0", self.amplitude));
        }
        if self.length < 4.0 * self.half_height {
            return bad(format!("length {} < 4 * half_height", self.length));
        }
        if self.length + 2.0 * (self.amplitude + self.half_height) > MAX_SIDE {
            return bad("strip too large".into());
        }
        let k = std::f64::consts::TAU / self.period;
        if self.amplitude * k * k * self.half_height >= 1.0 {
            return bad("spine curvature too high for the half height".into());
        }
        match self.texture {
            Texture::VerticalBars { width: w } | Texture::Checker { size: w } if !(w > 0.0 && w.is_finite()) => {
                bad(format!("texture cell size {w} must be positive"))
            }
            _ => Ok(()),
        }
    }

    fn wavenumber(&self) -> f64 {
        std::f64::consts::TAU / self.period
    }

    /// Unrotated spine point at parameter `t`.
    pub fn spine(&self, t: f64) -> Point {
        Point::new(t, self.amplitude * (self.wavenumber() * t).sin())
    }

    fn spine_d1(&self, t: f64) -> Point {
        let k = self.wavenumber();
        Point::new(1.0, self.amplitude * k * (k * t).cos())
    }

    fn spine_d2(&self, t: f64) -> Point {
        let k = self.wavenumber();
        Point::new(0.0, -self.amplitude * k * k * (k * t).sin())
    }

    /// Spine arc length by Simpson's rule.
    pub fn arc_length(&self) -> f64 {
        let n = (((self.length / ARC_STEP).ceil() as usize + 1) & !1usize).max(2);
        let h = self.length / n as f64;
        let f = |t: f64| self.spine_d1(t).norm();
        let mut s = f(0.0) + f(self.length);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    /// `2 · half_height · arc_length`.
    pub fn analytic_area(&self) -> f64 {
        2.0 * self.half_height * self.arc_length()
    }
}

/// Nearest spine parameter of a local-frame point, its signed normal offset,
/// and whether the point lies inside the strip.
struct Foot {
    t: f64,
    offset: f64,
    inside: bool,
}

fn foot(spec: &StripSpec, q: Point) -> Foot {
    let hh = spec.half_height;
    let lo = (q.x - hh - 1.0).max(0.0);
    let hi = (q.x + hh + 1.0).min(spec.length);
    if lo > hi {
        return Foot { t: 0.0, offset: f64::INFINITY, inside: false };
    }
    let mut best = (lo, f64::INFINITY);
    let steps = ((hi - lo) / 0.5).ceil() as usize;
    for i in 0..=steps {
        let t = (lo + i as f64 * 0.5).min(hi);
        let d = spec.spine(t).distance_squared(q);
        if d < best.1 {
            best = (t, d);
        }
    }
    let (a, b) = ((best.0 - 0.5).max(lo), (best.0 + 0.5).min(hi));
    let mut t = best.0;
    for _ in 0..6 {
        let r = spec.spine(t) - q;
        let d1 = spec.spine_d1(t);
        let g = r.dot(d1);
        let dg = d1.dot(d1) + r.dot(spec.spine_d2(t));
        if dg <= 0.0 {
            break;
        }
        t = (t - g / dg).clamp(a, b);
    }
    let tangent = spec.spine_d1(t).normalized().expect("spine derivative has unit x component");
    let r = q - spec.spine(t);
    let along = r.dot(tangent);
    let offset = r.dot(tangent.perp());
    let caps_ok = !(t <= 0.0 && along < -1e-9) && !(t >= spec.length && along > 1e-9);
    let inside = caps_ok && r.norm() <= hh;
    Foot { t, offset, inside }
}

/// Cumulative arc length sampled every `ARC_STEP` along the spine parameter.
struct ArcTable {
    step: f64,
    cum: Vec<f64>,
}

impl ArcTable {
    fn new(spec: &StripSpec) -> Self {
        let n = (spec.length / ARC_STEP).ceil() as usize + 1;
        let step = spec.length / (n - 1) as f64;
        let mut cum = Vec::with_capacity(n);
        cum.push(0.0);
        for i in 1..n {
            let (t0, t1) = ((i - 1) as f64 * step, i as f64 * step);
            let mid = spec.spine_d1(0.5 * (t0 + t1)).norm();
            let ends = spec.spine_d1(t0).norm() + spec.spine_d1(t1).norm();
            cum.push(cum[i - 1] + step * (ends + 4.0 * mid) / 6.0);
        }
        Self { step, cum }
    }

    fn at(&self, t: f64) -> f64 {
        let x = (t / self.step).clamp(0.0, (self.cum.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.cum.len() - 2);
        let f = x - i as f64;
        self.cum[i] * (1.0 - f) + self.cum[i + 1] * f
    }
}

fn paint(texture: Texture, s: f64, n: f64, hh: f64) -> f32 {
    let on = match texture {
        Texture::Constant => true,
        Texture::VerticalBars { width } => (s / width).floor() as i64 % 2 == 0,
        Texture::Checker { size } => ((s / size).floor() as i64 + ((n + hh) / size).floor() as i64) % 2 == 0,
    };
    if on {
        INK
    } else {
        0.0
    }
}

/// Rendered strip with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct StripRender {
    pub mask: BinaryMask,
    /// Spine samples one pixel apart, ordered so that `first.x <= last.x`.
    pub centerline: Vec<Point>,
    /// Single-channel texture, 0 outside the mask.
    pub image: Raster,
}

/// Rotation and translation from the spine frame to raster coordinates.
struct Placement {
    cos: f64,
    sin: f64,
    offset: Point,
}

impl Placement {
    fn forward(&self, p: Point) -> Point {
        Point::new(self.cos * p.x - self.sin * p.y, self.sin * p.x + self.cos * p.y) + self.offset
    }

    fn inverse(&self, p: Point) -> Point {
        let d = p - self.offset;
        Point::new(self.cos * d.x + self.sin * d.y, -self.sin * d.x + self.cos * d.y)
    }
}

/// Renders one strip into a raster just large enough to hold it.
pub fn render_strip(spec: &StripSpec) -> Result<StripRender> {
    spec.validate()?;
    // y-up counter-clockwise is clockwise in raster coordinates.
    let theta = -spec.rotation_deg.to_radians();
    let mut place = Placement { cos: theta.cos(), sin: theta.sin(), offset: Point::default() };
    let reach = spec.half_height + 1.0;
    let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    let samples = spec.length.ceil() as usize;
    for i in 0..=samples {
        let p = place.forward(spec.spine((i as f64).min(spec.length)));
        lo = Point::new(lo.x.min(p.x - reach), lo.y.min(p.y - reach));
        hi = Point::new(hi.x.max(p.x + reach), hi.y.max(p.y + reach));
    }
    place.offset = Point::new(STRIP_MARGIN - lo.x, STRIP_MARGIN - lo.y);
    let width = (hi.x - lo.x + 2.0 * STRIP_MARGIN).ceil() as usize;
    let height = (hi.y - lo.y + 2.0 * STRIP_MARGIN).ceil() as usize;

    let arc = ArcTable::new(spec);
    let mut mask = BinaryMask::new(width, height)?;
    let mut image = Raster::new(width, height, 1)?;
    for j in 0..height {
        for i in 0..width {
            let q = place.inverse(Point::pixel_center(i, j));
            let f = foot(spec, q);
            if f.inside {
                mask.set(i, j, true);
                image.set(i, j, 0, paint(spec.texture, arc.at(f.t), f.offset, spec.half_height));
            }
        }
    }

    let n = (spec.length - 2.0).floor().max(0.0) as usize;
    let mut centerline: Vec<Point> = (0..=n)
        .map(|k| place.forward(spec.spine((1.0 + k as f64).min(spec.length - 1.0))))
        .collect();
    if centerline.first().map(|p| p.x) > centerline.last().map(|p| p.x) {
        centerline.reverse();
    }
    Ok(StripRender { mask, centerline, image })
}

/// Several strips stacked top to bottom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageSpec {
    /// Vertical distance between the tops of consecutive strips.
    pub pitch: f64,
    pub strips: Vec<StripSpec>,
}

impl PageSpec {
    /// Five straight strips, used by `synth` when no spec file is given.
    pub fn demo() -> Self {
        Self {
            pitch: 48.0,
            strips: (0..5)
                .map(|k| StripSpec::straight(320.0 - 24.0 * k as f64, 10.0))
                .collect(),
        }
    }
}

/// Ground truth of one placed strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripTruth {
    /// Minimum-area rectangle around the strip's pixels.
    pub polygon: Polygon,
    pub centerline: Vec<Point>,
    pub half_height: f64,
    pub text: String,
}

/// Composited page.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedPage {
    pub mask: BinaryMask,
    pub image: Raster,
    pub strips: Vec<StripTruth>,
}

impl RenderedPage {
    /// Page record with the strips as ground truth and no predictions.
    pub fn to_page_record(&self, page: PageId) -> PageRecord {
        PageRecord {
            page,
            gt: self.strips.iter().map(|s| TextBox::new(s.polygon.clone(), s.text.clone())).collect(),
            pred: Vec::new(),
        }
    }
}

/// Deterministic CJK transcript of `len` characters for strip `index`.
pub fn synthetic_text(seed: u64, index: usize, len: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..len)
        .map(|_| char::from_u32(0x4E00 + rng.random_range(0..2000)).expect("CJK block"))
        .collect()
}

/// Renders and stacks `strips`, strip `k` with its top edge at
/// `PAGE_MARGIN + k·pitch`. Strips whose pixels touch (8-adjacency) or
/// overlap fail with `OverlapDetected`.
pub fn render_page(strips: &[StripSpec], pitch: f64, seed: u64) -> Result<RenderedPage> {
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(Error::SpecOutOfBounds(format!("pitch {pitch} must be positive")));
    }
    let renders: Vec<StripRender> = strips.iter().map(render_strip).collect::<Result<_>>()?;
    let tops: Vec<usize> =
        (0..strips.len()).map(|k| PAGE_MARGIN + (k as f64 * pitch).round() as usize).collect();
    let width = renders.iter().map(|r| r.mask.width()).max().unwrap_or(0) + 2 * PAGE_MARGIN;
    let height = renders
        .iter()
        .zip(&tops)
        .map(|(r, &t)| t + r.mask.height())
        .max()
        .unwrap_or(0)
        + PAGE_MARGIN;
    if width as f64 > MAX_SIDE || height as f64 > MAX_SIDE {
        return Err(Error::SpecOutOfBounds("page too large".into()));
    }
    let width = width.max(1);
    let height = height.max(1);

    let mut owner = vec![0usize; width * height];
    let mut mask = BinaryMask::new(width, height)?;
    let mut image = Raster::new(width, height, 1)?;
    let mut truths = Vec::with_capacity(strips.len());
    for (k, (render, &top)) in renders.iter().zip(&tops).enumerate() {
        let mut own = BinaryMask::new(width, height)?;
        for (x, y) in render.mask.foreground() {
            let (px, py) = (x + PAGE_MARGIN, y + top);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (px as i64 + dx, py as i64 + dy);
                    if nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height {
                        let o = owner[ny as usize * width + nx as usize];
                        if o != 0 && o != k + 1 {
                            return Err(Error::OverlapDetected(k));
                        }
                    }
                }
            }
            owner[py * width + px] = k + 1;
            mask.set(px, py, true);
            own.set(px, py, true);
            image.set(px, py, 0, render.image.get(x, y, 0));
        }
        let shift = Point::new(PAGE_MARGIN as f64, top as f64);
        let spec = &strips[k];
        let chars = ((spec.arc_length() / (2.0 * spec.half_height)).round() as usize).max(1);
        truths.push(StripTruth {
            polygon: smallest_enclosing_rectangle(&own.outline_corners())?,
            centerline: render.centerline.iter().map(|&p| p + shift).collect(),
            half_height: spec.half_height,
            text: spec.text.clone().unwrap_or_else(|| synthetic_text(seed, k, chars)),
        });
    }
    Ok(RenderedPage { mask, image, strips: truths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::connected_components;

    #[test]
    fn straight_strip_is_a_rectangle() {
        let r = render_strip(&StripSpec::straight(60.0, 5.0)).unwrap();
        let (x0, y0, x1, y1) = r.mask.bounds().unwrap();
        assert_eq!((x1 - x0 + 1, y1 - y0 + 1), (60, 10));
        assert_eq!(r.mask.count(), 600);
        assert!(r.centerline.windows(2).all(|w| (w[0].y - w[1].y).abs() < 1e-12 && w[1].x > w[0].x));
    }

    #[test]
    fn vertical_strip_centerline_is_oriented() {
        let r = render_strip(&StripSpec::straight(60.0, 5.0).with_rotation(90.0)).unwrap();
        let (x0, y0, x1, y1) = r.mask.bounds().unwrap();
        assert_eq!((x1 - x0 + 1, y1 - y0 + 1), (10, 60));
        let (a, b) = (r.centerline[0], *r.centerline.last().unwrap());
        assert!(a.x <= b.x);
        assert!((a.x - b.x).abs() < 1e-9);
    }

    #[test]
    fn sine_strip_area_matches_analytic() {
        let spec = StripSpec::sine(400.0, 10.0, 20.0, 200.0);
        let r = render_strip(&spec).unwrap();
        // Independent arc length: 200k-chord polyline.
        let n = 200_000;
        let chord: f64 = (0..n)
            .map(|i| spec.spine(400.0 * i as f64 / n as f64).distance(spec.spine(400.0 * (i + 1) as f64 / n as f64)))
            .sum();
        assert!((spec.arc_length() - chord).abs() < 1e-6);
        let area = 2.0 * 10.0 * chord;
        assert!((r.mask.count() as f64 - area).abs() <= 0.02 * area);
    }

    #[test]
    fn centerline_lies_inside_mask() {
        for spec in [
            StripSpec::sine(300.0, 6.0, 16.0, 240.0),
            StripSpec::sine(200.0, 4.0, 5.0, 100.0).with_rotation(33.0),
            StripSpec::straight(50.0, 3.0).with_rotation(-120.0),
        ] {
            let r = render_strip(&spec).unwrap();
            assert!(r.centerline.iter().all(|&p| r.mask.contains_point(p)), "{spec:?}");
            assert!(r.centerline[0].x <= r.centerline.last().unwrap().x);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let spec = StripSpec::sine(200.0, 8.0, 10.0, 150.0).with_texture(Texture::Checker { size: 5.0 });
        assert_eq!(render_strip(&spec).unwrap(), render_strip(&spec).unwrap());
    }

    #[test]
    fn textures_are_clipped_to_the_mask() {
        let spec = StripSpec::straight(80.0, 6.0).with_texture(Texture::VerticalBars { width: 4.0 });
        let r = render_strip(&spec).unwrap();
        let mut on = 0;
        for y in 0..r.mask.height() {
            for x in 0..r.mask.width() {
                let v = r.image.get(x, y, 0);
                if !r.mask.get(x, y) {
                    assert_eq!(v, 0.0);
                } else if v == INK {
                    on += 1;
                }
            }
        }
        assert_eq!(on, r.mask.count() / 2);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for spec in [
            StripSpec::straight(60.0, 1.5),
            StripSpec::straight(10.0, 5.0),
            StripSpec::sine(100.0, 5.0, 3.0, 0.0),
            StripSpec::sine(100.0, 5.0, 50.0, 20.0),
            StripSpec::straight(60.0, 5.0).with_texture(Texture::VerticalBars { width: 0.0 }),
        ] {
            assert!(matches!(render_strip(&spec), Err(Error::SpecOutOfBounds(_))), "{spec:?}");
        }
    }

    #[test]
    fn single_strip_page_is_offset_strip() {
        let spec = StripSpec::sine(120.0, 6.0, 8.0, 100.0);
        let strip = render_strip(&spec).unwrap();
        let page = render_page(std::slice::from_ref(&spec), 50.0, 1).unwrap();
        assert_eq!(page.mask.count(), strip.mask.count());
        for (x, y) in strip.mask.foreground() {
            assert!(page.mask.get(x + PAGE_MARGIN, y + PAGE_MARGIN));
        }
    }

    #[test]
    fn stacked_strips_stay_separate() {
        let strips: Vec<_> = (0..5).map(|_| StripSpec::straight(100.0, 5.0)).collect();
        let page = render_page(&strips, 20.0, 3).unwrap();
        assert_eq!(connected_components(&page.mask).len(), 5);
        assert_eq!(page.strips.len(), 5);
        let rec = page.to_page_record(PageId::Number(0));
        assert_eq!(rec.gt.len(), 5);
        assert!(rec.gt.iter().all(|b| b.text.chars().count() == 10));
        let again = render_page(&strips, 20.0, 3).unwrap();
        assert_eq!(again, page);
        assert!(matches!(render_page(&strips, 9.0, 3), Err(Error::OverlapDetected(1))));
        // Rows 11..=20 and 21..=30 touch.
        assert!(matches!(render_page(&strips, 10.0, 3), Err(Error::OverlapDetected(1))));
        assert!(render_page(&strips, 11.0, 3).is_ok());
    }

    #[test]
    fn gt_rectangle_covers_strip() {
        let page = render_page(&[StripSpec::straight(100.0, 5.0).with_rotation(20.0)], 10.0, 0).unwrap();
        let poly = &page.strips[0].polygon;
        assert_eq!(poly.vertices().len(), 4);
        for (x, y) in page.mask.foreground() {
            assert!(poly.contains(Point::pixel_center(x, y)));
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"pitch": 40, "strips": [
            {"length": 100, "half_height": 6},
            {"length": 120, "half_height": 6, "amplitude": 4, "period": 90,
             "texture": {"kind": "vertical_bars", "width": 3}, "text": "甲乙丙"}]}"#;
        let spec: PageSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.strips[0].texture, Texture::Constant);
        assert_eq!(spec.strips[1].texture, Texture::VerticalBars { width: 3.0 });
        let page = render_page(&spec.strips, spec.pitch, 0).unwrap();
        assert_eq!(page.strips[1].text, "甲乙丙");
    }
}
