//! Center-line extraction from a kernel region.
//!
//! Center points are the centers of successively largest inscribed circles:
//! the pixel with the largest distance to the background is taken, every
//! pixel closer than `suppress_mult * min_r` to it is zeroed, and the process
//! repeats while the remaining maximum exceeds `min_r = area / perimeter`.
//! The unordered centers are then threaded into a polyline by head/tail/middle
//! insertion and finally extended to the region ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::raster::{euclidean_distance_transform, trace_contour, BinaryMask};

/// Suppression radius multiplier applied to `min_r`.
pub const DEFAULT_SUPPRESS_MULT: f64 = 4.0;

/// Ray-march step used when extending the line ends, in pixels.
const EXTEND_STEP: f64 = 0.25;
/// Largest sideways correction per pixel walked when extending.
const MAX_RECENTER: f64 = 0.25;

/// Inscribed-circle center with its radius. Serialized as `{"x", "y", "r"}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "CenterPointRepr", into = "CenterPointRepr")]
pub struct CenterPoint {
    pub position: Point,
    pub radius: f64,
}

#[derive(Serialize, Deserialize)]
struct CenterPointRepr {
    x: f64,
    y: f64,
    r: f64,
}

impl From<CenterPointRepr> for CenterPoint {
    fn from(r: CenterPointRepr) -> Self {
        CenterPoint::new(Point::new(r.x, r.y), r.r)
    }
}

impl From<CenterPoint> for CenterPointRepr {
    fn from(c: CenterPoint) -> Self {
        CenterPointRepr {
            x: c.position.x,
            y: c.position.y,
            r: c.radius,
        }
    }
}

impl CenterPoint {
    pub fn new(position: Point, radius: f64) -> Self {
        Self { position, radius }
    }
}

/// Ordered center points of one text strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterLine {
    min_r: f64,
    points: Vec<CenterPoint>,
}

impl CenterLine {
    /// Wraps already-ordered points. At least one point is required.
    pub fn new(points: Vec<CenterPoint>, min_r: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NoCenterPoints);
        }
        if points.iter().any(|p| !(p.radius > 0.0) || !p.position.is_finite()) {
            return Err(Error::InvalidParameter(
                "center points need a finite position and positive radius".into(),
            ));
        }
        Ok(Self { min_r, points })
    }

    pub fn points(&self) -> &[CenterPoint] {
        &self.points
    }

    pub fn min_r(&self) -> f64 {
        self.min_r
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.points.iter().map(|p| p.position).collect()
    }

    /// Summed length of the polyline segments.
    pub fn arc_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].position.distance(w[1].position))
            .sum()
    }

    pub fn mean_radius(&self) -> f64 {
        self.points.iter().map(|p| p.radius).sum::<f64>() / self.points.len() as f64
    }

    /// Scales positions, radii and `min_r` by `factor`.
    pub fn scaled(&self, factor: f64) -> CenterLine {
        CenterLine {
            min_r: self.min_r * factor,
            points: self
                .points
                .iter()
                .map(|p| CenterPoint::new(p.position * factor, p.radius * factor))
                .collect(),
        }
    }
}

/// `min_r` of a region: its pixel count over the length of its traced boundary.
pub fn region_min_r(region: &BinaryMask) -> Result<f64> {
    let area = region.count();
    if area == 0 {
        return Err(Error::EmptyRegion);
    }
    let perimeter = trace_contour(region)?.length();
    Ok(area as f64 / perimeter)
}

/// Center points with the default suppression multiplier.
pub fn generate_center_points(region: &BinaryMask) -> Result<(Vec<CenterPoint>, f64)> {
    generate_center_points_with(region, DEFAULT_SUPPRESS_MULT)
}

/// Greedy inscribed-circle centers of a single-component region, in selection
/// order, together with the region's `min_r`. Ties on the maximum go to the
/// smallest row-major index.
pub fn generate_center_points_with(
    region: &BinaryMask,
    suppress_mult: f64,
) -> Result<(Vec<CenterPoint>, f64)> {
    if !(suppress_mult > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "suppression multiplier must be positive, got {suppress_mult}"
        )));
    }
    let min_r = region_min_r(region)?;
    let distances = euclidean_distance_transform(region).into_vec();
    let centers = select_centers(distances, region.width(), region.height(), min_r, suppress_mult);
    Ok((centers, min_r))
}

/// Greedy selection over a row-major distance field.
fn select_centers(
    mut distances: Vec<f64>,
    w: usize,
    h: usize,
    min_r: f64,
    suppress_mult: f64,
) -> Vec<CenterPoint> {
    let reach = suppress_mult * min_r;
    let span = reach.ceil() as usize;
    let mut centers = Vec::new();
    loop {
        let (best, max) = distances
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if !(max > min_r) {
            break;
        }
        let (cx, cy) = (best % w, best / w);
        centers.push(CenterPoint::new(Point::pixel_center(cx, cy), max));
        distances[best] = 0.0;
        for y in cy.saturating_sub(span)..=(cy + span).min(h - 1) {
            for x in cx.saturating_sub(span)..=(cx + span).min(w - 1) {
                let dx = x as f64 - cx as f64;
                let dy = y as f64 - cy as f64;
                if (dx * dx + dy * dy).sqrt() < reach {
                    distances[y * w + x] = 0.0;
                }
            }
        }
    }
    centers
}

/// Threads unordered centers into a polyline.
///
/// The first two points seed the line. Each further point goes to the head if
/// it is farther from the tail than both the head and the current head-tail
/// span, to the tail in the mirrored case, and otherwise between the adjacent
/// pair of the current line that minimizes its summed distance to the pair,
/// less the pair's own length (zero exactly when the point lies on the pair's
/// segment).
/// The result is reversed if it runs right to left.
pub fn reorder_center_points(points: Vec<CenterPoint>, min_r: f64) -> Result<CenterLine> {
    let mut input = points.into_iter();
    let first = input.next().ok_or(Error::NoCenterPoints)?;
    let mut line = vec![first];
    if let Some(second) = input.next() {
        line.push(second);
    }
    for p in input {
        let pos = p.position;
        let head = line[0].position;
        let tail = line[line.len() - 1].position;
        let left_d = pos.distance(head);
        let right_d = pos.distance(tail);
        let span = head.distance(tail);
        if right_d > span && right_d > left_d {
            line.insert(0, p);
        } else if left_d > span && right_d < left_d {
            line.push(p);
        } else {
            let mut best = 1;
            let mut best_cost = f64::INFINITY;
            for j in 1..line.len() {
                let (a, b) = (line[j - 1].position, line[j].position);
                let cost = pos.distance(a) + pos.distance(b) - a.distance(b);
                if cost < best_cost {
                    best_cost = cost;
                    best = j;
                }
            }
            line.insert(best, p);
        }
    }
    if line[0].position.x > line[line.len() - 1].position.x {
        line.reverse();
    }
    CenterLine::new(line, min_r)
}

/// Distance from `from` along `dir` to the last in-region position, capped at `reach`.
fn extent(region: &BinaryMask, from: Point, dir: Point, reach: f64) -> f64 {
    let mut t = 0.0;
    while t + EXTEND_STEP <= reach && region.contains_point(from + dir * (t + EXTEND_STEP)) {
        t += EXTEND_STEP;
    }
    t
}

/// Walks from `from` along `dir` one pixel at a time, re-centering each step
/// across the region and steering toward the re-centered point, and returns
/// the last in-region position. `None` when the first step already leaves the
/// region.
fn follow_ridge(region: &BinaryMask, from: Point, dir: Point, radius: f64) -> Option<Point> {
    let limit = (region.width() + region.height()) * 2;
    let reach = 2.0 * radius + 2.0;
    let lag = radius.ceil().max(1.0) as usize;
    let mut trail = vec![from];
    let mut heading = dir;
    for _ in 0..limit {
        let pos = trail[trail.len() - 1];
        let probe = pos + heading;
        if !region.contains_point(probe) {
            break;
        }
        let n = heading.perp();
        let (a, b) = (extent(region, probe, n, reach), extent(region, probe, -n, reach));
        if a + b < radius {
            // Cross-section cut by the region's end.
            break;
        }
        let centered = probe + n * ((a - b) / 2.0).clamp(-MAX_RECENTER, MAX_RECENTER);
        trail.push(if region.contains_point(centered) { centered } else { probe });
        let anchor = trail[trail.len().saturating_sub(lag + 1)];
        heading = (trail[trail.len() - 1] - anchor).normalized().unwrap_or(heading);
    }
    (trail.len() > 1).then(|| trail[trail.len() - 1])
}

/// Adds one point past each end of the line. Starting along the direction
/// from the end's neighbor, the walk follows the middle of the region until
/// it leaves, and the last position inside becomes the new end. The new
/// points carry their endpoint's radius. Lines with fewer than two points are
/// returned unchanged.
pub fn extend_center_line(line: &CenterLine, region: &BinaryMask) -> CenterLine {
    let pts = line.points();
    if pts.len() < 2 {
        return line.clone();
    }
    let mut out = pts.to_vec();
    let extension = |end: CenterPoint, neighbor: CenterPoint| {
        let dir = (end.position - neighbor.position).normalized()?;
        follow_ridge(region, end.position, dir, end.radius).map(|p| CenterPoint::new(p, end.radius))
    };
    if let Some(p) = extension(pts[0], pts[1]) {
        out.insert(0, p);
    }
    if let Some(p) = extension(pts[pts.len() - 1], pts[pts.len() - 2]) {
        out.push(p);
    }
    CenterLine {
        min_r: line.min_r,
        points: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disk(radius: f64, size: usize) -> BinaryMask {
        let c = size as f64 / 2.0;
        BinaryMask::from_fn(size, size, |x, y| {
            Point::pixel_center(x, y).distance(Point::new(c, c)) <= radius
        })
        .unwrap()
    }

    fn bar(w: usize, h: usize, pad: usize) -> BinaryMask {
        BinaryMask::from_fn(w + 2 * pad, h + 2 * pad, |x, y| {
            (pad..pad + w).contains(&x) && (pad..pad + h).contains(&y)
        })
        .unwrap()
    }

    fn cp(x: f64, y: f64) -> CenterPoint {
        CenterPoint::new(Point::new(x, y), 1.0)
    }

    #[test]
    fn disk_gives_one_center() {
        let m = disk(20.0, 50);
        let (pts, min_r) = generate_center_points(&m).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].position.x - 25.0).abs() <= 1.0 && (pts[0].position.y - 25.0).abs() <= 1.0);
        assert!((pts[0].radius - 20.0).abs() <= 1.5, "radius {}", pts[0].radius);
        assert!((min_r - 10.0).abs() < 1.5, "min_r {min_r}");
    }

    #[test]
    fn bar_centers_on_mid_rows() {
        let m = bar(200, 20, 3);
        let (pts, min_r) = generate_center_points(&m).unwrap();
        assert!((min_r - 200.0 * 20.0 / 440.0).abs() < 0.2, "min_r {min_r}");
        assert!(pts.len() >= 4);
        for p in &pts {
            // Mid-height rows 9 and 10 of the bar (offset by padding).
            assert!((p.position.y - 13.0).abs() <= 0.5 + 1e-9, "{p:?}");
            assert_eq!(p.radius, 10.0);
        }
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                assert!(a.position.distance(b.position) >= 4.0 * min_r - 2f64.sqrt());
            }
        }
    }

    #[test]
    fn field_below_min_r_gives_no_centers() {
        let field = vec![0.0, 0.4, 0.5, 0.2];
        assert!(select_centers(field, 2, 2, 0.5, 4.0).is_empty());
    }

    #[test]
    fn one_pixel_line_keeps_unit_radius_centers() {
        let m = bar(30, 1, 1);
        let (pts, min_r) = generate_center_points(&m).unwrap();
        assert!((min_r - 30.0 / 58.0).abs() < 1e-12);
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| p.radius == 1.0));
    }

    #[test]
    fn empty_region_errors() {
        let m = BinaryMask::new(4, 4).unwrap();
        assert!(matches!(generate_center_points(&m), Err(Error::EmptyRegion)));
    }

    #[test]
    fn reorder_single_and_sorted() {
        let line = reorder_center_points(vec![cp(3.0, 1.0)], 1.0).unwrap();
        assert_eq!(line.len(), 1);
        let pts: Vec<_> = (0..6).map(|i| cp(i as f64 * 3.0, 2.0)).collect();
        let line = reorder_center_points(pts.clone(), 1.0).unwrap();
        assert_eq!(line.points(), &pts[..]);
        assert!(matches!(reorder_center_points(vec![], 1.0), Err(Error::NoCenterPoints)));
    }

    #[test]
    fn reorder_recovers_shuffled_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sorted: Vec<_> = (0..10).map(|i| cp(i as f64 * 5.0, 4.0)).collect();
        for _ in 0..100 {
            let mut shuffled = sorted.clone();
            shuffled.shuffle(&mut rng);
            assert_eq!(reorder_center_points(shuffled, 1.0).unwrap().points(), &sorted[..]);
        }
    }

    #[test]
    fn extension_reaches_bar_ends() {
        let m = bar(200, 20, 3);
        let (pts, min_r) = generate_center_points(&m).unwrap();
        let line = reorder_center_points(pts, min_r).unwrap();
        let ext = extend_center_line(&line, &m);
        assert_eq!(ext.len(), line.len() + 2);
        let first = ext.points()[0].position;
        let last = ext.points()[ext.len() - 1].position;
        // Ray-march oracle: in-region extremes along the mid row are x = 3 and x = 203.
        assert!((first.x - 3.0).abs() <= 1.0, "{first:?}");
        assert!((last.x - 203.0).abs() <= 1.0, "{last:?}");
        assert_eq!(ext.points()[0].radius, line.points()[0].radius);
    }

    #[test]
    fn extension_follows_a_bend_to_the_cap() {
        use crate::synthetic::{render_strip, StripSpec};
        let s = render_strip(&StripSpec::sine(480.0, 9.0, 16.0, 240.0)).unwrap();
        let (pts, min_r) = generate_center_points(&s.mask).unwrap();
        let ext = extend_center_line(&reorder_center_points(pts, min_r).unwrap(), &s.mask);
        let (first, last) = (ext.points()[0].position, ext.points()[ext.len() - 1].position);
        // The true spine ends one pixel inside each flat cap.
        assert!(first.distance(s.centerline[0]) < 2.0, "{first:?}");
        assert!(last.distance(s.centerline[s.centerline.len() - 1]) < 2.0, "{last:?}");
    }

    #[test]
    fn extension_is_noop_at_border_or_single_point() {
        let m = bar(10, 4, 0);
        let line = CenterLine::new(
            vec![CenterPoint::new(Point::new(0.1, 2.0), 2.0), CenterPoint::new(Point::new(9.9, 2.0), 2.0)],
            1.0,
        )
        .unwrap();
        assert_eq!(extend_center_line(&line, &m), line);
        let single = CenterLine::new(vec![CenterPoint::new(Point::new(5.0, 2.0), 2.0)], 1.0).unwrap();
        assert_eq!(extend_center_line(&single, &disk(3.0, 10)), single);
    }

    #[test]
    fn json_layout() {
        let line = CenterLine::new(vec![CenterPoint::new(Point::new(1.0, 2.0), 3.0)], 0.5).unwrap();
        assert_eq!(
            serde_json::to_string(&line).unwrap(),
            r#"{"min_r":0.5,"points":[{"x":1.0,"y":2.0,"r":3.0}]}"#
        );
    }

    proptest! {
        #[test]
        fn reorder_is_an_oriented_permutation(
            raw in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..25)
        ) {
            let pts: Vec<_> = raw.iter().map(|&(x, y)| cp(x, y)).collect();
            let line = reorder_center_points(pts.clone(), 1.0).unwrap();
            let key = |p: &CenterPoint| (p.position.x.to_bits(), p.position.y.to_bits());
            let mut a: Vec<_> = pts.iter().map(key).collect();
            let mut b: Vec<_> = line.points().iter().map(key).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            prop_assert!(line.points()[0].position.x <= line.points()[line.len() - 1].position.x);
        }
    }
}
