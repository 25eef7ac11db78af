//! Outer-boundary tracing of an 8-connected region (Moore neighborhood).
//!
//! Orientation convention used throughout the crate: "counter-clockwise" means
//! a positive shoelace sum over raw `(x, y)` coordinates, i.e. counter-clockwise
//! in a y-up frame. On screen, with y pointing down, such a walk appears clockwise.

use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::error::{Error, Result};
use crate::point::Point;

/// Moore neighborhood, clockwise on screen starting from west.
const RING: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

/// Closed boundary walk over integer pixel coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    points: Vec<(i64, i64)>,
}

impl Contour {
    pub fn points(&self) -> &[(i64, i64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Length of the closed walk: unit steps count 1, diagonal steps √2.
    pub fn length(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (ax, ay) = self.points[i];
                let (bx, by) = self.points[(i + 1) % n];
                (((bx - ax).pow(2) + (by - ay).pow(2)) as f64).sqrt()
            })
            .sum()
    }

    /// Signed shoelace area of the walk (positive when counter-clockwise).
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let twice: i64 = (0..n)
            .map(|i| {
                let (ax, ay) = self.points[i];
                let (bx, by) = self.points[(i + 1) % n];
                ax * by - bx * ay
            })
            .sum();
        twice as f64 / 2.0
    }

    /// Walk vertices as pixel-center points.
    pub fn to_points(&self) -> Vec<Point> {
        self.points
            .iter()
            .map(|&(x, y)| Point::new(x as f64 + 0.5, y as f64 + 0.5))
            .collect()
    }
}

fn ring_index(d: (i64, i64)) -> usize {
    RING.iter()
        .position(|&r| r == d)
        .expect("backtrack pixel is 8-adjacent")
}

/// One Moore step: scan clockwise from the backtrack pixel for the next
/// foreground neighbor. Returns the neighbor and its new backtrack pixel.
fn step(mask: &BinaryMask, c: (i64, i64), b: (i64, i64)) -> Option<((i64, i64), (i64, i64))> {
    let k = ring_index((b.0 - c.0, b.1 - c.1));
    (1..=8).find_map(|i| {
        let (dx, dy) = RING[(k + i) % 8];
        let n = (c.0 + dx, c.1 + dy);
        mask.get_signed(n.0, n.1).then(|| {
            let (px, py) = RING[(k + i - 1) % 8];
            (n, (c.0 + px, c.1 + py))
        })
    })
}

/// Unit-step lattice outline of a pixel bounding box, used for regions too
/// small to produce a three-point walk.
fn box_outline(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(i64, i64)> {
    let mut pts = Vec::new();
    pts.extend((x0..x1).map(|x| (x, y0)));
    pts.extend((y0..y1).map(|y| (x1, y)));
    pts.extend((x0 + 1..=x1).rev().map(|x| (x, y1)));
    pts.extend((y0 + 1..=y1).rev().map(|y| (x0, y)));
    pts
}

/// Traces the outer boundary of the region containing the first foreground
/// pixel (row-major). Boundary pixels are visited in order, counter-clockwise
/// by the crate convention; pixels on one-pixel-wide necks are visited once
/// per side.
pub fn trace_contour(component: &BinaryMask) -> Result<Contour> {
    let (sx, sy) = component.foreground().next().ok_or(Error::EmptyMask)?;
    let start = (sx as i64, sy as i64);
    let b0 = (start.0 - 1, start.1);

    let mut points = vec![start];
    if let Some((p1, b1)) = step(component, start, b0) {
        let (mut c, mut b) = (p1, b1);
        let limit = 8 * component.count() + 16;
        while points.len() <= limit {
            let (next, nb) = step(component, c, b).expect("walk stays on a connected region");
            if c == start && next == p1 && nb == b1 {
                break;
            }
            points.push(c);
            c = next;
            b = nb;
        }
    }

    if points.len() < 3 {
        let xs = points.iter().map(|p| p.0);
        let ys = points.iter().map(|p| p.1);
        let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap() + 1);
        let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap() + 1);
        return Ok(Contour {
            points: box_outline(x0, y0, x1, y1),
        });
    }

    let mut contour = Contour { points };
    if contour.signed_area() < 0.0 {
        contour.points[1..].reverse();
    }
    Ok(contour)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn boundary_pixels(mask: &BinaryMask) -> HashSet<(i64, i64)> {
        mask.foreground()
            .map(|(x, y)| (x as i64, y as i64))
            .filter(|&(x, y)| {
                [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .any(|&(dx, dy)| !mask.get_signed(x + dx, y + dy))
            })
            .collect()
    }

    fn assert_closed_walk(c: &Contour) {
        let pts = c.points();
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            assert!((a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1, "{a:?} -> {b:?}");
            assert_ne!(a, b);
        }
    }

    #[test]
    fn empty_mask_errors() {
        assert!(matches!(
            trace_contour(&BinaryMask::new(3, 3).unwrap()),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn single_pixel_is_square_outline() {
        let m = BinaryMask::from_ascii(&["...", ".#.", "..."]).unwrap();
        let c = trace_contour(&m).unwrap();
        assert_eq!(c.points(), &[(1, 1), (2, 1), (2, 2), (1, 2)]);
        assert_eq!(c.length(), 4.0);
        assert!(c.signed_area() > 0.0);
    }

    #[test]
    fn block_3x3_has_eight_boundary_pixels() {
        let m = BinaryMask::from_ascii(&[".....", ".###.", ".###.", ".###.", "....."]).unwrap();
        let c = trace_contour(&m).unwrap();
        // Hand enumeration: the ring around (2, 2), in walk order.
        assert_eq!(
            c.points(),
            &[(1, 1), (2, 1), (3, 1), (3, 2), (3, 3), (2, 3), (1, 3), (1, 2)]
        );
        assert!(c.signed_area() > 0.0);
        assert_closed_walk(&c);
    }

    #[test]
    fn block_5x2_visits_all_ten_pixels_once() {
        let m = BinaryMask::from_ascii(&["#####", "#####"]).unwrap();
        let c = trace_contour(&m).unwrap();
        assert_eq!(c.len(), 10);
        let set: HashSet<_> = c.points().iter().copied().collect();
        assert_eq!(set.len(), 10);
        assert_eq!(set, boundary_pixels(&m));
        assert_closed_walk(&c);
    }

    #[test]
    fn thin_line_walks_both_sides() {
        let m = BinaryMask::from_ascii(&["###"]).unwrap();
        let c = trace_contour(&m).unwrap();
        assert_eq!(c.points(), &[(0, 0), (1, 0), (2, 0), (1, 0)]);
        assert_closed_walk(&c);
    }

    #[test]
    fn two_pixels_fall_back_to_box_outline() {
        let m = BinaryMask::from_ascii(&["##"]).unwrap();
        let c = trace_contour(&m).unwrap();
        assert_eq!(c.len(), 6);
        assert_closed_walk(&c);
        assert_eq!(c.length(), 6.0);
    }

    #[test]
    fn disk_boundary_matches_boundary_set() {
        let m = BinaryMask::from_fn(31, 31, |x, y| {
            let (dx, dy) = (x as f64 - 15.0, y as f64 - 15.0);
            dx * dx + dy * dy <= 144.0
        })
        .unwrap();
        let c = trace_contour(&m).unwrap();
        let set: HashSet<_> = c.points().iter().copied().collect();
        assert_eq!(set.len(), c.len());
        assert_eq!(set, boundary_pixels(&m));
        assert_closed_walk(&c);
        assert!(c.signed_area() > 0.0);
    }
}
