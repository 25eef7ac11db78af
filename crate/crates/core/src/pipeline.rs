//! End-to-end spotting: mask → components → center-lines → rectified strips,
//! plus kernel-label generation from ground-truth boxes.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centerline::{
    extend_center_line, generate_center_points_with, reorder_center_points, CenterLine, CenterPoint,
    DEFAULT_SUPPRESS_MULT,
};
use crate::error::{Error, Result};
use crate::evaluation::perturb_box;
use crate::point::Point;
use crate::polygon::{shrink_polygon, smallest_enclosing_rectangle, Polygon, ShrinkParams};
use crate::raster::{connected_components, BinaryMask, Raster};
use crate::tps::{rectify_strip, RectifiedStrip, DEFAULT_STRIP_HEIGHT};

/// Downscale factor applied by `downscale4`.
pub const FEATURE_STRIDE: usize = 4;

/// Knobs shared by every stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub shrink_ratio: f64,
    pub height: usize,
    pub suppress_mult: f64,
    pub iou_grid: f64,
    pub amp_v: f64,
    pub amp_h: f64,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
    /// Run on a 4x-downscaled mask and image, reporting geometry at full scale.
    pub downscale4: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            shrink_ratio: ShrinkParams::DEFAULT_RATIO,
            height: DEFAULT_STRIP_HEIGHT,
            suppress_mult: DEFAULT_SUPPRESS_MULT,
            iou_grid: 1.0,
            amp_v: 0.2,
            amp_h: 1.0,
            seed: 0,
            jobs: 0,
            downscale4: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        ShrinkParams::new(self.shrink_ratio)?;
        positive("suppress_mult", self.suppress_mult)?;
        positive("iou_grid", self.iou_grid)?;
        if self.height == 0 {
            return Err(Error::InvalidParameter("height must be positive".into()));
        }
        if !(self.amp_v >= 0.0 && self.amp_h >= 0.0 && self.amp_v.is_finite() && self.amp_h.is_finite()) {
            return Err(Error::InvalidParameter("perturbation amplitudes must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        if self.jobs == 0 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// One recovered text line.
#[derive(Clone, Debug, PartialEq)]
pub struct SpotLine {
    pub centerline: CenterLine,
    /// Minimum-area rectangle around the component.
    pub polygon: Polygon,
    pub strip: RectifiedStrip,
}

/// A component left out of the results, with the reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedComponent {
    pub area: usize,
    pub min_r: f64,
    pub bounds: (usize, usize, usize, usize),
    pub reason: String,
}

/// Output of `spot_page`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpotOutput {
    pub lines: Vec<SpotLine>,
    pub skipped: Vec<SkippedComponent>,
}

/// The component cropped to its bounding box plus a one-pixel border, and
/// the crop origin.
fn crop(region: &BinaryMask) -> Option<(BinaryMask, Point)> {
    let (x0, y0, x1, y1) = region.bounds()?;
    let (ox, oy) = (x0 as i64 - 1, y0 as i64 - 1);
    let sub = BinaryMask::from_fn(x1 - x0 + 3, y1 - y0 + 3, |x, y| {
        region.get_signed(ox + x as i64, oy + y as i64)
    })
    .ok()?;
    Some((sub, Point::new(ox as f64, oy as f64)))
}

fn translate_line(line: &CenterLine, d: Point) -> Result<CenterLine> {
    CenterLine::new(
        line.points().iter().map(|c| CenterPoint::new(c.position + d, c.radius)).collect(),
        line.min_r(),
    )
}

enum Traced {
    Line(CenterLine),
    Skip { min_r: f64, reason: String },
}

/// Center points → reorder → extend on one component. A single center becomes
/// a horizontal segment through it before extension.
fn trace_region(region: &BinaryMask, suppress_mult: f64) -> Result<Traced> {
    let (points, min_r) = generate_center_points_with(region, suppress_mult)?;
    let area = region.count() as f64;
    if area < 4.0 * min_r * min_r {
        return Ok(Traced::Skip { min_r, reason: format!("area {area} below 4*min_r^2") });
    }
    if points.is_empty() {
        return Ok(Traced::Skip { min_r, reason: "no center points".into() });
    }
    let mut line = reorder_center_points(points, min_r)?;
    if line.len() == 1 {
        let c = line.points()[0];
        let half = Point::new(0.5, 0.0);
        line = CenterLine::new(
            vec![
                CenterPoint::new(c.position - half, c.radius),
                CenterPoint::new(c.position + half, c.radius),
            ],
            min_r,
        )?;
    }
    Ok(Traced::Line(extend_center_line(&line, region)))
}

/// Ordered, extended center-line of a single region, or `None` when the
/// region is skipped.
pub fn region_centerline(region: &BinaryMask, suppress_mult: f64) -> Result<Option<CenterLine>> {
    let Some((sub, origin)) = crop(region) else {
        return Err(Error::EmptyRegion);
    };
    match trace_region(&sub, suppress_mult)? {
        Traced::Line(line) => Ok(Some(translate_line(&line, origin)?)),
        Traced::Skip { .. } => Ok(None),
    }
}

/// Center-line and enclosing rectangle of one component.
#[derive(Clone, Debug, PartialEq)]
pub struct TracedLine {
    pub centerline: CenterLine,
    pub polygon: Polygon,
}

/// Output of `trace_page`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceOutput {
    pub lines: Vec<TracedLine>,
    pub skipped: Vec<SkippedComponent>,
}

enum Item {
    Line(TracedLine, Option<RectifiedStrip>),
    Skip(SkippedComponent),
}

fn process(
    region: &BinaryMask,
    image: Option<&Raster>,
    cfg: &PipelineConfig,
    scale: f64,
) -> Result<Item> {
    let (sub, origin) = crop(region).ok_or(Error::EmptyRegion)?;
    let bounds = region.bounds().expect("component is non-empty");
    let line = match trace_region(&sub, cfg.suppress_mult)? {
        Traced::Line(line) => translate_line(&line, origin)?,
        Traced::Skip { min_r, reason } => {
            return Ok(Item::Skip(SkippedComponent { area: region.count(), min_r, bounds, reason }));
        }
    };
    let strip = image.map(|img| rectify_strip(img, &line, cfg.height)).transpose()?;
    let corners: Vec<Point> = sub.outline_corners().into_iter().map(|p| p + origin).collect();
    let polygon = smallest_enclosing_rectangle(&corners)?;
    let traced = if scale == 1.0 {
        TracedLine { centerline: line, polygon }
    } else {
        TracedLine { centerline: line.scaled(scale), polygon: polygon.scale(scale) }
    };
    Ok(Item::Line(traced, strip))
}

fn run_page(
    mask: &BinaryMask,
    image: Option<&Raster>,
    cfg: &PipelineConfig,
) -> Result<(Vec<(TracedLine, Option<RectifiedStrip>)>, Vec<SkippedComponent>)> {
    cfg.validate()?;
    if let Some(img) = image {
        if mask.width() != img.width() || mask.height() != img.height() {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} vs image {}x{}",
                mask.width(),
                mask.height(),
                img.width(),
                img.height()
            )));
        }
    }
    let (mask, image, scale) = if cfg.downscale4 {
        let img = image.map(|i| i.downscale(FEATURE_STRIDE)).transpose()?;
        (mask.downscale(FEATURE_STRIDE)?, img, FEATURE_STRIDE as f64)
    } else {
        (mask.clone(), image.cloned(), 1.0)
    };
    let components = connected_components(&mask);
    debug!("{} components", components.len());
    let items: Vec<Result<Item>> = cfg.run(|| {
        components.par_iter().map(|c| process(c, image.as_ref(), cfg, scale)).collect()
    })?;
    let mut lines = Vec::new();
    let mut skipped = Vec::new();
    for item in items {
        match item? {
            Item::Line(l, s) => lines.push((l, s)),
            Item::Skip(s) => {
                warn!("skipping component at {:?}: {}", s.bounds, s.reason);
                skipped.push(s);
            }
        }
    }
    reading_order(&mut lines);
    Ok((lines, skipped))
}

/// Reading order: lines are banded top to bottom (a line joins the current
/// band when its vertical middle falls inside the band's extent), and each
/// band is sorted by leftmost x, then top y.
fn reading_order<T>(lines: &mut Vec<(TracedLine, T)>) {
    let key_y = |a: &(TracedLine, T), b: &(TracedLine, T)| {
        a.0.polygon.min_y().total_cmp(&b.0.polygon.min_y()).then(a.0.polygon.min_x().total_cmp(&b.0.polygon.min_x()))
    };
    lines.sort_by(key_y);
    let mut out = Vec::with_capacity(lines.len());
    let mut band: Vec<(TracedLine, T)> = Vec::new();
    let mut bottom = f64::NEG_INFINITY;
    let flush = |band: &mut Vec<(TracedLine, T)>, out: &mut Vec<(TracedLine, T)>| {
        band.sort_by(|a, b| {
            a.0.polygon.min_x().total_cmp(&b.0.polygon.min_x()).then(a.0.polygon.min_y().total_cmp(&b.0.polygon.min_y()))
        });
        out.append(band);
    };
    for line in lines.drain(..) {
        let (lo, hi) = line.0.polygon.bounding_box();
        let mid = 0.5 * (lo.y + hi.y);
        if band.is_empty() || mid > bottom {
            flush(&mut band, &mut out);
            bottom = hi.y;
        } else {
            bottom = bottom.max(hi.y);
        }
        band.push(line);
    }
    flush(&mut band, &mut out);
    *lines = out;
}

/// Center-lines and enclosing rectangles of every component, in reading
/// order, without rectification.
pub fn trace_page(mask: &BinaryMask, cfg: &PipelineConfig) -> Result<TraceOutput> {
    let (lines, skipped) = run_page(mask, None, cfg)?;
    Ok(TraceOutput { lines: lines.into_iter().map(|(l, _)| l).collect(), skipped })
}

/// Spots every text line of a kernel mask: one center-line, enclosing
/// rectangle and rectified strip per connected component, in reading order.
/// Components that are too small or yield no centers are reported in
/// `skipped` and logged.
pub fn spot_page(mask: &BinaryMask, image: &Raster, cfg: &PipelineConfig) -> Result<SpotOutput> {
    let (lines, skipped) = run_page(mask, Some(image), cfg)?;
    let lines = lines
        .into_iter()
        .map(|(l, s)| SpotLine {
            centerline: l.centerline,
            polygon: l.polygon,
            strip: s.expect("image given"),
        })
        .collect();
    Ok(SpotOutput { lines, skipped })
}

/// Union of the shrunken boxes: the kernel segmentation target.
pub fn make_kernel_labels(
    boxes: &[Polygon],
    width: usize,
    height: usize,
    cfg: &PipelineConfig,
) -> Result<BinaryMask> {
    let params = ShrinkParams::new(cfg.shrink_ratio)?;
    let mut labels = BinaryMask::new(width, height)?;
    for b in boxes {
        labels = labels.union(&shrink_polygon(b, params, width, height)?)?;
    }
    Ok(labels)
}

/// Seed for box `index` derived from the run seed.
pub fn box_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Perturbs every box with the configured amplitudes.
pub fn perturb_boxes(boxes: &[Polygon], cfg: &PipelineConfig) -> Result<Vec<Polygon>> {
    boxes
        .iter()
        .enumerate()
        .map(|(i, b)| perturb_box(b, cfg.amp_v, cfg.amp_h, box_seed(cfg.seed, i)))
        .collect()
}
