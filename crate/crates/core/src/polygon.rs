//! Vector polygons: area and perimeter, kernel shrinking, minimum-area
//! enclosing rectangles and rasterized IOU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::raster::{euclidean_distance_transform, BinaryMask};

const EDGE_EPS: f64 = 1e-9;

/// Implicitly closed polygon, stored counter-clockwise (positive shoelace area
/// in raw coordinates) whenever its area is non-zero. Serialized as `[[x, y], ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    /// Builds a polygon from at least three finite vertices, reorienting it to
    /// counter-clockwise. Zero-area polygons are accepted here; use
    /// [`validate`](Self::validate) for the strict checks.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::TooFewVertices(vertices.len()));
        }
        if !vertices.iter().all(|p| p.is_finite()) {
            return Err(Error::Format("polygon vertex is not finite".into()));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle with corners `(x0, y0)` and `(x1, y1)`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
        .expect("four finite corners")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Strict checks: positive area and no self-intersection (O(n²) edge test).
    pub fn validate(&self) -> Result<()> {
        if self.area() == 0.0 {
            return Err(Error::DegeneratePolygon);
        }
        if !self.is_simple() {
            return Err(Error::SelfIntersecting);
        }
        Ok(())
    }

    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Neighbors share one vertex and must not fold back onto each other.
                    let (shared, p, q) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                    let (e1, e2) = (p - shared, q - shared);
                    if e1.cross(e2).abs() <= EDGE_EPS * e1.norm() * e2.norm() && e1.dot(e2) > 0.0 {
                        return false;
                    }
                } else if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Closed point-in-polygon test: boundary points count as inside.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if point_segment_distance(p, a, b) <= EDGE_EPS {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// `(min, max)` corners of the axis-aligned bounding box.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    pub fn min_x(&self) -> f64 {
        self.bounding_box().0.x
    }

    pub fn min_y(&self) -> f64 {
        self.bounding_box().0.y
    }

    pub fn translate(&self, d: Point) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| v + d).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| v * factor).collect(),
        }
    }

    /// Pixels whose centers lie inside (or on) the polygon.
    pub fn rasterize(&self, width: usize, height: usize) -> Result<BinaryMask> {
        let mut mask = BinaryMask::new(width, height)?;
        let (lo, hi) = self.bounding_box();
        let x0 = (lo.x - 0.5).ceil().max(0.0) as usize;
        let y0 = (lo.y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((hi.x - 0.5).floor().min(width as f64 - 1.0)).max(-1.0);
        let y1 = ((hi.y - 0.5).floor().min(height as f64 - 1.0)).max(-1.0);
        if x1 < 0.0 || y1 < 0.0 {
            return Ok(mask);
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                if self.contains(Point::pixel_center(x, y)) {
                    mask.set(x, y, true);
                }
            }
        }
        Ok(mask)
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() / 2.0
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| point_segment_distance(r, p, q) <= EDGE_EPS;
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

/// Kernel shrink ratio `r`, in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkParams {
    ratio: f64,
}

impl ShrinkParams {
    pub const DEFAULT_RATIO: f64 = 0.6;

    pub fn new(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "shrink ratio must be in (0, 1], got {ratio}"
            )));
        }
        Ok(Self { ratio })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

impl Default for ShrinkParams {
    fn default() -> Self {
        Self {
            ratio: Self::DEFAULT_RATIO,
        }
    }
}

/// Shoelace area and edge-length perimeter.
pub fn area_perimeter(poly: &Polygon) -> Result<(f64, f64)> {
    let area = poly.area();
    if area == 0.0 {
        return Err(Error::DegeneratePolygon);
    }
    Ok((area, poly.perimeter()))
}

/// Inward offset `d = A (1 - r²) / L` for a region of area `A` and perimeter `L`.
pub fn shrink_offset(area: f64, perimeter: f64, params: ShrinkParams) -> Result<f64> {
    if !(perimeter > 0.0) {
        return Err(Error::ZeroPerimeter);
    }
    let r = params.ratio();
    Ok(area * (1.0 - r * r) / perimeter)
}

/// Kernel label for one polygon: its rasterization with every pixel within
/// `d` of the background removed. Thin polygons may shrink to nothing.
pub fn shrink_polygon(
    poly: &Polygon,
    params: ShrinkParams,
    width: usize,
    height: usize,
) -> Result<BinaryMask> {
    let full = poly.rasterize(width, height)?;
    let Ok((area, perimeter)) = area_perimeter(poly) else {
        return BinaryMask::new(width, height);
    };
    let d = shrink_offset(area, perimeter, params)?;
    if d == 0.0 {
        return Ok(full);
    }
    let dist = euclidean_distance_transform(&full);
    BinaryMask::from_vec(width, height, dist.data().iter().map(|&v| v > d).collect())
}

/// Convex hull by monotone chain, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Minimum-area oriented rectangle enclosing `points`. One side of the
/// optimum is collinear with a hull edge, so every hull edge direction is
/// tried (rotating calipers). Collinear input yields a zero-height rectangle.
pub fn smallest_enclosing_rectangle(points: &[Point]) -> Result<Polygon> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    let hull = convex_hull(points);
    match hull.len() {
        1 => return Polygon::new(vec![hull[0]; 4]),
        2 => return Polygon::new(vec![hull[0], hull[1], hull[1], hull[0]]),
        _ => {}
    }
    let mut best: Option<(f64, [Point; 4])> = None;
    for i in 0..hull.len() {
        let u = (hull[(i + 1) % hull.len()] - hull[i])
            .normalized()
            .expect("hull vertices are distinct");
        let v = u.perp();
        let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &p in &hull {
            let (a, b) = (p.dot(u), p.dot(v));
            u0 = u0.min(a);
            u1 = u1.max(a);
            v0 = v0.min(b);
            v1 = v1.max(b);
        }
        let area = (u1 - u0) * (v1 - v0);
        if best.as_ref().is_none_or(|(a, _)| area < *a * (1.0 - 1e-12)) {
            let corner = |a: f64, b: f64| u * a + v * b;
            best = Some((area, [corner(u0, v0), corner(u1, v0), corner(u1, v1), corner(u0, v1)]));
        }
    }
    let (_, corners) = best.expect("hull has edges");
    Polygon::new(corners.to_vec())
}

/// Intersection over union of two polygons, sampled at cell centers of a grid
/// with spacing `grid` covering both bounding boxes.
pub fn polygon_iou(a: &Polygon, b: &Polygon, grid: f64) -> Result<f64> {
    if !(grid > 0.0 && grid.is_finite()) {
        return Err(Error::InvalidParameter(format!("iou grid must be positive, got {grid}")));
    }
    let (alo, ahi) = a.bounding_box();
    let (blo, bhi) = b.bounding_box();
    if ahi.x < blo.x || bhi.x < alo.x || ahi.y < blo.y || bhi.y < alo.y {
        return Ok(0.0);
    }
    let lo = Point::new(alo.x.min(blo.x), alo.y.min(blo.y));
    let hi = Point::new(ahi.x.max(bhi.x), ahi.y.max(bhi.y));
    let nx = (((hi.x - lo.x) / grid).ceil() as usize).max(1);
    let ny = (((hi.y - lo.y) / grid).ceil() as usize).max(1);
    let (mut inter, mut union) = (0usize, 0usize);
    for j in 0..ny {
        let y = lo.y + (j as f64 + 0.5) * grid;
        for i in 0..nx {
            let p = Point::new(lo.x + (i as f64 + 0.5) * grid, y);
            let (ia, ib) = (a.contains(p), b.contains(p));
            inter += (ia && ib) as usize;
            union += (ia || ib) as usize;
        }
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hexagon() -> Polygon {
        Polygon::new(
            (0..6)
                .map(|k| {
                    let t = k as f64 * std::f64::consts::PI / 3.0;
                    Point::new(t.cos(), t.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn area_perimeter_examples() {
        assert_eq!(area_perimeter(&Polygon::rect(0.0, 0.0, 1.0, 1.0)).unwrap(), (1.0, 4.0));
        let tri = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(0.0, 4.0)]).unwrap();
        assert_eq!(area_perimeter(&tri).unwrap(), (6.0, 12.0));
        let (a, l) = area_perimeter(&hexagon()).unwrap();
        assert!((a - 3.0 * 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((l - 6.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_polygon_rejected() {
        let flat = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)]).unwrap();
        assert!(matches!(area_perimeter(&flat), Err(Error::DegeneratePolygon)));
        assert!(Polygon::new(vec![Point::new(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn orientation_is_normalized() {
        let cw = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0)]).unwrap();
        assert!(cw.signed_area() > 0.0);
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bow = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(2.0, 2.0), Point::new(2.0, 0.0), Point::new(0.0, 1.0)]).unwrap();
        assert!(matches!(bow.validate(), Err(Error::SelfIntersecting)));
        assert!(hexagon().validate().is_ok());
    }

    #[test]
    fn shrink_offsets() {
        let p = ShrinkParams::new(0.6).unwrap();
        assert!((shrink_offset(1.0, 4.0, p).unwrap() - 0.16).abs() < 1e-12);
        assert!((shrink_offset(20.0, 24.0, p).unwrap() - 20.0 * 0.64 / 24.0).abs() < 1e-12);
        assert_eq!(shrink_offset(7.0, 3.0, ShrinkParams::new(1.0).unwrap()).unwrap(), 0.0);
        assert!(matches!(shrink_offset(1.0, 0.0, p), Err(Error::ZeroPerimeter)));
        assert!(ShrinkParams::new(0.0).is_err());
        assert!(ShrinkParams::new(1.2).is_err());
    }

    #[test]
    fn shrink_square() {
        let sq = Polygon::rect(5.0, 5.0, 25.0, 25.0);
        let full = shrink_polygon(&sq, ShrinkParams::new(1.0).unwrap(), 30, 30).unwrap();
        assert_eq!(full, sq.rasterize(30, 30).unwrap());
        assert_eq!(full.count(), 400);

        // d = 3.2: oracle keeps pixels whose in-square distance to the
        // outside (counted to the first outside pixel center) exceeds 3.2.
        let shrunk = shrink_polygon(&sq, ShrinkParams::new(0.6).unwrap(), 30, 30).unwrap();
        let oracle = BinaryMask::from_fn(30, 30, |x, y| {
            let inside = |v: usize| (5..25).contains(&v);
            if !(inside(x) && inside(y)) {
                return false;
            }
            let dx = (x as i64 - 4).min(25 - x as i64);
            let dy = (y as i64 - 4).min(25 - y as i64);
            dx.min(dy) as f64 > 3.2
        })
        .unwrap();
        assert_eq!(shrunk, oracle);
        let (x0, _, x1, _) = shrunk.bounds().unwrap();
        assert_eq!(x1 - x0 + 1, 14);
    }

    #[test]
    fn sliver_shrinks_to_nothing() {
        let sliver = Polygon::rect(0.0, 0.1, 40.0, 0.4);
        let m = shrink_polygon(&sliver, ShrinkParams::default(), 50, 10).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn enclosing_rectangle_examples() {
        let pts = [Point::new(1.0, 2.0), Point::new(5.0, 2.0), Point::new(5.0, 4.0), Point::new(1.0, 4.0)];
        let r = smallest_enclosing_rectangle(&pts).unwrap();
        assert!((r.area() - 8.0).abs() < 1e-9);
        for p in pts {
            assert!(r.vertices().iter().any(|v| v.distance(p) < 1e-9));
        }

        let diamond = [Point::new(1.0, 0.0), Point::new(2.0, 1.0), Point::new(1.0, 2.0), Point::new(0.0, 1.0)];
        let r = smallest_enclosing_rectangle(&diamond).unwrap();
        assert!((r.area() - 2.0).abs() < 1e-9, "rotated square keeps area 2, not 4");

        let line = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(3.0, 3.0)];
        let r = smallest_enclosing_rectangle(&line).unwrap();
        assert_eq!(r.area(), 0.0);
        assert!(r.vertices().contains(&Point::new(3.0, 3.0)));

        let one = smallest_enclosing_rectangle(&[Point::new(2.0, 2.0)]).unwrap();
        assert_eq!(one.vertices().len(), 4);
    }

    #[test]
    fn iou_examples() {
        let a = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        let b = Polygon::rect(0.5, 0.0, 1.5, 1.0);
        assert_eq!(polygon_iou(&a, &a, 0.01).unwrap(), 1.0);
        assert_eq!(polygon_iou(&a, &Polygon::rect(3.0, 3.0, 4.0, 4.0), 0.01).unwrap(), 0.0);
        assert!((polygon_iou(&a, &b, 0.01).unwrap() - 1.0 / 3.0).abs() < 0.01);
        assert!(polygon_iou(&a, &b, 0.0).is_err());
    }

    fn arb_points() -> impl Strategy<Value = Vec<Point>> {
        proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..30)
            .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
    }

    proptest! {
        #[test]
        fn enclosing_rectangle_beats_axis_box(pts in arb_points()) {
            let r = smallest_enclosing_rectangle(&pts).unwrap();
            let xs = pts.iter().map(|p| p.x);
            let ys = pts.iter().map(|p| p.y);
            let w = xs.clone().fold(f64::NEG_INFINITY, f64::max) - xs.fold(f64::INFINITY, f64::min);
            let h = ys.clone().fold(f64::NEG_INFINITY, f64::max) - ys.fold(f64::INFINITY, f64::min);
            prop_assert!(r.area() <= w * h + 1e-6);
            let v = r.vertices();
            for p in &pts {
                let on_edge = (0..4).any(|i| point_segment_distance(*p, v[i], v[(i + 1) % 4]) < 1e-6);
                prop_assert!(on_edge || r.contains(*p));
            }
        }

        #[test]
        fn shrink_offset_decreases_with_ratio(a in 1.0f64..1e4, l in 1.0f64..1e3, r1 in 0.01f64..1.0, r2 in 0.01f64..1.0) {
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let d_lo = shrink_offset(a, l, ShrinkParams::new(lo).unwrap()).unwrap();
            let d_hi = shrink_offset(a, l, ShrinkParams::new(hi).unwrap()).unwrap();
            prop_assert!(d_hi <= d_lo);
        }

        #[test]
        fn iou_symmetric_and_translation_invariant(
            x0 in 0.0f64..20.0, y0 in 0.0f64..20.0, w0 in 1.0f64..15.0, h0 in 1.0f64..15.0,
            x1 in 0.0f64..20.0, y1 in 0.0f64..20.0, w1 in 1.0f64..15.0, h1 in 1.0f64..15.0,
            tx in -8i32..8, ty in -8i32..8,
        ) {
            let a = Polygon::rect(x0, y0, x0 + w0, y0 + h0);
            let b = Polygon::rect(x1, y1, x1 + w1, y1 + h1);
            let ab = polygon_iou(&a, &b, 0.5).unwrap();
            prop_assert_eq!(ab, polygon_iou(&b, &a, 0.5).unwrap());
            let d = Point::new(tx as f64 * 0.5, ty as f64 * 0.5);
            let moved = polygon_iou(&a.translate(d), &b.translate(d), 0.5).unwrap();
            prop_assert!((ab - moved).abs() < 1e-9);
        }
    }
}
