//! Thin-plate-spline fitting and text strip rectification.
//!
//! A spline maps `p` to `A p + Σ wᵢ U(|p - sᵢ|)` with `U(r) = r² ln r`. The
//! weights come from the usual bordered system
//!
//! ```text
//! | K + λI  P | | w |   | t |
//! | Pᵀ      0 | | a | = | 0 |
//! ```
//!
//! where `K[i][j] = U(|sᵢ - sⱼ|)` and `P` rows are `[1, x, y]`. With `λ = 0`
//! the map interpolates the targets and has minimal bending energy.

use nalgebra::{DMatrix, DVector};

use crate::centerline::CenterLine;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::raster::Raster;

/// Default strip height in pixels.
pub const DEFAULT_STRIP_HEIGHT: usize = 32;

/// Radial basis `r² ln r`, with `U(0) = 0`.
pub fn tps_kernel(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// Fitted thin-plate spline.
#[derive(Clone, Debug, PartialEq)]
pub struct TpsTransform {
    source_points: Vec<Point>,
    radial_weights: Vec<Point>,
    /// Rows `[c, cx, cy]` for the x and y outputs.
    affine: [[f64; 3]; 2],
}

impl TpsTransform {
    pub fn source_points(&self) -> &[Point] {
        &self.source_points
    }

    pub fn radial_weights(&self) -> &[Point] {
        &self.radial_weights
    }

    pub fn affine(&self) -> [[f64; 3]; 2] {
        self.affine
    }

    pub fn apply(&self, p: Point) -> Point {
        let [ax, ay] = self.affine;
        let mut out = Point::new(
            ax[0] + ax[1] * p.x + ax[2] * p.y,
            ay[0] + ay[1] * p.x + ay[2] * p.y,
        );
        for (s, w) in self.source_points.iter().zip(&self.radial_weights) {
            let u = tps_kernel(p.distance(*s));
            out = out + *w * u;
        }
        out
    }

    /// `(Σw, Σw·x, Σw·y)` per output coordinate; all vanish for a valid fit.
    pub fn side_conditions(&self) -> [Point; 3] {
        let mut sums = [Point::default(); 3];
        for (s, w) in self.source_points.iter().zip(&self.radial_weights) {
            sums[0] = sums[0] + *w;
            sums[1] = sums[1] + *w * s.x;
            sums[2] = sums[2] + *w * s.y;
        }
        sums
    }

    /// `wᵀ K w` summed over both output coordinates.
    pub fn bending_energy(&self) -> f64 {
        let n = self.source_points.len();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                let k = tps_kernel(self.source_points[i].distance(self.source_points[j]));
                e += k * self.radial_weights[i].dot(self.radial_weights[j]);
            }
        }
        e
    }
}

/// `apply_tps(t, p)`: evaluates a fitted spline at `p`.
pub fn apply_tps(t: &TpsTransform, p: Point) -> Point {
    t.apply(p)
}

/// `1e-8` times the mean squared distance of the points to their centroid.
pub fn default_regularization(points: &[Point]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Point::default(), |a, &p| a + p) * (1.0 / n);
    1e-8 * points.iter().map(|p| p.distance_squared(c)).sum::<f64>() / n
}

fn collinear(points: &[Point]) -> bool {
    let n = points.len() as f64;
    let c = points.iter().fold(Point::default(), |a, &p| a + p) * (1.0 / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = *p - c;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    let trace = sxx + syy;
    trace == 0.0 || (sxx * syy - sxy * sxy) <= 1e-12 * trace * trace
}

/// Fits the spline taking `source[i]` to `target[i]`.
pub fn fit_tps(source: &[Point], target: &[Point], regularization: f64) -> Result<TpsTransform> {
    let n = source.len();
    if n != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{n} source points vs {} target points",
            target.len()
        )));
    }
    if n < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 control points, got {n}")));
    }
    if !(regularization >= 0.0 && regularization.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "regularization must be finite and >= 0, got {regularization}"
        )));
    }
    if source.iter().chain(target).any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter("control points must be finite".into()));
    }
    if collinear(source) {
        return Err(Error::SingularSystem);
    }
    if regularization == 0.0 {
        for i in 0..n {
            if source[i + 1..].contains(&source[i]) {
                return Err(Error::SingularSystem);
            }
        }
    }

    let m = n + 3;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = tps_kernel(source[i].distance(source[j]));
        }
        a[(i, i)] += regularization;
        let row = [1.0, source[i].x, source[i].y];
        for (k, v) in row.into_iter().enumerate() {
            a[(i, n + k)] = v;
            a[(n + k, i)] = v;
        }
    }
    let lu = a.lu();
    let solve = |rhs: DVector<f64>| lu.solve(&rhs).filter(|x| x.iter().all(|v| v.is_finite()));
    let mut bx = DVector::<f64>::zeros(m);
    let mut by = DVector::<f64>::zeros(m);
    for i in 0..n {
        bx[i] = target[i].x;
        by[i] = target[i].y;
    }
    let sx = solve(bx).ok_or(Error::SingularSystem)?;
    let sy = solve(by).ok_or(Error::SingularSystem)?;

    Ok(TpsTransform {
        source_points: source.to_vec(),
        radial_weights: (0..n).map(|i| Point::new(sx[i], sy[i])).collect(),
        affine: [
            [sx[n], sx[n + 1], sx[n + 2]],
            [sy[n], sy[n + 1], sy[n + 2]],
        ],
    })
}

/// Control-point pairs for rectifying the strip around `line`.
///
/// Each center contributes two sources, `±radius` along the local normal, with
/// targets on `y = 0` and `y = height` at `x` = cumulative arc length scaled so
/// that the mean radius maps to `height / 2`.
pub fn control_points_from_centerline(
    line: &CenterLine,
    height: f64,
) -> Result<(Vec<Point>, Vec<Point>)> {
    let pts = line.points();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(
            "center-line needs at least two points".into(),
        ));
    }
    if !(height > 0.0) {
        return Err(Error::InvalidParameter(format!("strip height must be positive, got {height}")));
    }
    if pts.windows(2).any(|w| w[0].position == w[1].position) {
        return Err(Error::DegenerateLine);
    }
    let n = pts.len();
    let scale = (height / 2.0) / line.mean_radius();
    let mut source = Vec::with_capacity(2 * n);
    let mut target = Vec::with_capacity(2 * n);
    let mut s = 0.0;
    for i in 0..n {
        if i > 0 {
            s += pts[i].position.distance(pts[i - 1].position);
        }
        let prev = pts[i.saturating_sub(1)].position;
        let next = pts[(i + 1).min(n - 1)].position;
        let tangent = (next - prev)
            .normalized()
            .or_else(|| (next - pts[i].position).normalized())
            .or_else(|| (pts[i].position - prev).normalized())
            .ok_or(Error::DegenerateLine)?;
        let normal = tangent.perp();
        let c = pts[i].position;
        let r = pts[i].radius;
        source.push(c - normal * r);
        source.push(c + normal * r);
        target.push(Point::new(s * scale, 0.0));
        target.push(Point::new(s * scale, height));
    }
    Ok((source, target))
}

/// Fixed-height raster produced by rectification.
#[derive(Clone, Debug, PartialEq)]
pub struct RectifiedStrip {
    raster: Raster,
}

impl RectifiedStrip {
    pub fn height(&self) -> usize {
        self.raster.height()
    }

    pub fn width(&self) -> usize {
        self.raster.width()
    }

    pub fn channels(&self) -> usize {
        self.raster.channels()
    }

    pub fn as_raster(&self) -> &Raster {
        &self.raster
    }

    pub fn into_raster(self) -> Raster {
        self.raster
    }
}

/// Warps the strip around `line` into a `height`-row rectangle.
///
/// The spline is fitted from the rectangle back onto the image, so each output
/// pixel center is mapped once and sampled bilinearly; samples falling outside
/// the image are 0.
pub fn rectify_strip(image: &Raster, line: &CenterLine, height: usize) -> Result<RectifiedStrip> {
    if height == 0 {
        return Err(Error::InvalidParameter("strip height must be positive".into()));
    }
    let (source, target) = control_points_from_centerline(line, height as f64)?;
    let width = (target.last().expect("two or more points").x.round() as usize).max(1);
    let inverse = fit_tps(&target, &source, default_regularization(&target))?;
    let channels = image.channels();
    let mut out = Raster::new(width, height, channels)?;
    for v in 0..height {
        for u in 0..width {
            let p = inverse.apply(Point::pixel_center(u, v));
            for c in 0..channels {
                out.set(u, v, c, image.sample_bilinear(p, c));
            }
        }
    }
    Ok(RectifiedStrip { raster: out })
}

/// Image-space polylines of the rectification grid: rows at the top, middle
/// and bottom of the strip and columns every `spacing` output pixels.
pub fn warp_grid(line: &CenterLine, height: usize, spacing: usize) -> Result<Vec<Vec<Point>>> {
    if height == 0 || spacing == 0 {
        return Err(Error::InvalidParameter("grid height and spacing must be positive".into()));
    }
    let h = height as f64;
    let (source, target) = control_points_from_centerline(line, h)?;
    let width = target.last().expect("two or more points").x.max(1.0);
    let inverse = fit_tps(&target, &source, default_regularization(&target))?;
    let samples = |a: Point, b: Point| -> Vec<Point> {
        let n = (a.distance(b).ceil() as usize).max(1);
        (0..=n).map(|k| inverse.apply(a + (b - a) * (k as f64 / n as f64))).collect()
    };
    let mut grid: Vec<Vec<Point>> = [0.0, h / 2.0, h]
        .iter()
        .map(|&y| samples(Point::new(0.0, y), Point::new(width, y)))
        .collect();
    let mut u = 0.0;
    while u <= width {
        grid.push(samples(Point::new(u, 0.0), Point::new(u, h)));
        u += spacing as f64;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centerline::CenterPoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn identity_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src: Vec<_> = (0..8).map(|_| Point::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0))).collect();
        let t = fit_tps(&src, &src, 0.0).unwrap();
        assert!(t.radial_weights().iter().all(|w| w.norm() < 1e-9));
        let a = t.affine();
        let expect = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for r in 0..2 {
            for c in 0..3 {
                assert!((a[r][c] - expect[r][c]).abs() < 1e-9);
            }
        }
        let p = Point::new(17.3, -4.0);
        assert!(apply_tps(&t, p).distance(p) < 1e-9);
    }

    #[test]
    fn displaced_corner_interpolates_and_bends() {
        let src = square();
        let mut dst = src.clone();
        dst[2] = dst[2] + Point::new(0.1, 0.0);
        let t = fit_tps(&src, &dst, 0.0).unwrap();
        for (s, d) in src.iter().zip(&dst) {
            assert!(t.apply(*s).distance(*d) < 1e-9);
        }
        assert!(t.bending_energy() > 0.0);
    }

    #[test]
    fn translation_moves_midpoint() {
        let src = vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 3.0)];
        let shift = Point::new(2.5, -1.0);
        let dst: Vec<_> = src.iter().map(|&p| p + shift).collect();
        let t = fit_tps(&src, &dst, 0.0).unwrap();
        let mid = Point::new(2.0, 0.0);
        assert!(t.apply(mid).distance(mid + shift) < 1e-9);
    }

    #[test]
    fn singular_inputs() {
        let line = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert!(matches!(fit_tps(&line, &line, 0.0), Err(Error::SingularSystem)));
        let mut dup = square();
        dup.push(dup[0]);
        assert!(matches!(fit_tps(&dup, &dup, 0.0), Err(Error::SingularSystem)));
        assert!(fit_tps(&dup, &dup, 1e-3).is_ok());
        assert!(fit_tps(&square(), &square()[..3], 0.0).is_err());
    }

    fn horizontal(n: usize, r: f64) -> CenterLine {
        CenterLine::new(
            (0..n).map(|i| CenterPoint::new(Point::new(10.0 + 7.0 * i as f64, 20.0), r)).collect(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn straight_line_control_points_are_a_translation() {
        let (src, dst) = control_points_from_centerline(&horizontal(5, 6.0), 12.0).unwrap();
        let shift = src[0] - dst[0];
        for (s, d) in src.iter().zip(&dst) {
            assert!((*s - *d - shift).norm() < 1e-12);
        }
        let (src, dst) = control_points_from_centerline(&horizontal(2, 6.0), 12.0).unwrap();
        assert_eq!(src.len(), 4);
        assert_eq!(dst, vec![Point::new(0.0, 0.0), Point::new(0.0, 12.0), Point::new(7.0, 0.0), Point::new(7.0, 12.0)]);
    }

    #[test]
    fn semicircle_width_tracks_arc_length() {
        let big_r = 50.0;
        let k = 60;
        let pts: Vec<_> = (0..=k)
            .map(|i| {
                let t = std::f64::consts::PI * (1.0 - i as f64 / k as f64);
                CenterPoint::new(Point::new(100.0 + big_r * t.cos(), 100.0 - big_r * t.sin()), 5.0)
            })
            .collect();
        let line = CenterLine::new(pts, 1.0).unwrap();
        let (_, dst) = control_points_from_centerline(&line, 32.0).unwrap();
        // Chord sum of 60 equal chords of a half circle.
        let chord_sum = 2.0 * big_r * (std::f64::consts::PI / (2.0 * k as f64)).sin() * k as f64;
        let scale = 16.0 / 5.0;
        assert!((dst.last().unwrap().x - chord_sum * scale).abs() < 1e-9);
        assert!((chord_sum - std::f64::consts::PI * big_r).abs() < 0.05);
        assert!(dst.windows(2).all(|w| w[1].x >= w[0].x));
    }

    #[test]
    fn coincident_centers_are_degenerate() {
        let p = CenterPoint::new(Point::new(1.0, 1.0), 2.0);
        let line = CenterLine::new(vec![p, p], 1.0).unwrap();
        assert!(matches!(control_points_from_centerline(&line, 32.0), Err(Error::DegenerateLine)));
    }

    #[test]
    fn grid_of_straight_line_is_axis_aligned() {
        let grid = warp_grid(&horizontal(3, 8.0), 16, 4).unwrap();
        assert_eq!(grid.len(), 3 + 4);
        assert!(grid[0].iter().all(|p| (p.y - 12.0).abs() < 1e-6));
        assert!(grid[2].iter().all(|p| (p.y - 28.0).abs() < 1e-6));
        assert!(grid[3].iter().all(|p| (p.x - 10.0).abs() < 1e-6));
    }

    #[test]
    fn constant_image_rectifies_to_constant() {
        let img = Raster::from_fn(80, 40, 2, |_, _, c| 100.0 + c as f32).unwrap();
        let strip = rectify_strip(&img, &horizontal(6, 6.0), 32).unwrap();
        assert_eq!(strip.height(), 32);
        assert_eq!(strip.channels(), 2);
        for v in 0..32 {
            for u in 0..strip.width() {
                assert!((strip.as_raster().get(u, v, 0) - 100.0).abs() < 1e-3);
                assert!((strip.as_raster().get(u, v, 1) - 101.0).abs() < 1e-3);
            }
        }
    }

    fn random_config(rng: &mut ChaCha8Rng) -> Vec<Point> {
        loop {
            let n = rng.random_range(4..=20);
            let pts: Vec<_> = (0..n)
                .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect();
            let separated = (0..n).all(|i| (i + 1..n).all(|j| pts[i].distance(pts[j]) > 0.5));
            if separated && !collinear(&pts) {
                return pts;
            }
        }
    }

    #[test]
    fn random_fits_interpolate_and_satisfy_side_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let src = random_config(&mut rng);
            let dst: Vec<_> = src
                .iter()
                .map(|p| *p + Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
                .collect();
            let t = fit_tps(&src, &dst, 0.0).unwrap();
            for (s, d) in src.iter().zip(&dst) {
                assert!(t.apply(*s).distance(*d) <= 1e-6);
            }
            let mag = src.iter().map(|p| p.x.abs().max(p.y.abs())).fold(1.0, f64::max);
            let [sw, swx, swy] = t.side_conditions();
            assert!(sw.x.abs() <= 1e-8 && sw.y.abs() <= 1e-8, "{sw:?}");
            assert!(swx.x.abs() <= 1e-6 * mag && swx.y.abs() <= 1e-6 * mag);
            assert!(swy.x.abs() <= 1e-6 * mag && swy.y.abs() <= 1e-6 * mag);
        }
    }

    #[test]
    fn affine_targets_are_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let src = random_config(&mut rng);
            let m: [f64; 6] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let dst: Vec<_> = src
                .iter()
                .map(|p| Point::new(m[0] + m[1] * p.x + m[2] * p.y, m[3] + m[4] * p.x + m[5] * p.y))
                .collect();
            let t = fit_tps(&src, &dst, 0.0).unwrap();
            assert!(t.radial_weights().iter().all(|w| w.x.abs() <= 1e-6 && w.y.abs() <= 1e-6));
            let a = t.affine();
            let got = [a[0][0], a[0][1], a[0][2], a[1][0], a[1][1], a[1][2]];
            for (g, e) in got.iter().zip(&m) {
                assert!((g - e).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn straight_strip_matches_crop_and_resize() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Raster::from_fn(120, 60, 1, |_, _, _| rng.random_range(0.0..255.0f32)).unwrap();
        let (r, cy, x0) = (8.0, 30.0, 10.0);
        let line = CenterLine::new(
            (0..12).map(|i| CenterPoint::new(Point::new(x0 + 8.0 * i as f64, cy), r)).collect(),
            1.0,
        )
        .unwrap();
        let h = 32;
        let strip = rectify_strip(&img, &line, h).unwrap();
        let scale = h as f64 / (2.0 * r);
        assert_eq!(strip.width(), (88.0 * scale).round() as usize);
        let mut err = 0.0;
        for v in 0..h {
            for u in 0..strip.width() {
                let src = Point::new(x0 + (u as f64 + 0.5) / scale, cy - r + (v as f64 + 0.5) / scale);
                err += (strip.as_raster().get(u, v, 0) - img.sample_bilinear(src, 0)).abs() as f64;
            }
        }
        assert!(err / (h * strip.width()) as f64 <= 2.0);
    }
}
