//! Exact Euclidean distance transform (Meijster, Roerdink and Hesselink).
//!
//! Two separable passes in integer arithmetic: a column scan giving the 1-D
//! distance to background, then a lower-envelope scan of parabolas per row.
//! Pixels beyond the image border count as background, so the transform runs
//! on a grid padded by one background pixel on every side.

use super::{BinaryMask, DistanceMap};

/// Squared distance (in pixel units) from every pixel to the nearest
/// background pixel. Background pixels hold 0.
pub fn squared_distance_transform(mask: &BinaryMask) -> Vec<u64> {
    let (w, h) = (mask.width(), mask.height());
    let pw = w + 2;
    let ph = h + 2;
    let inside = |x: usize, y: usize| x >= 1 && y >= 1 && x <= w && y <= h && mask.get(x - 1, y - 1);

    // Column pass: g = vertical distance to the nearest background pixel.
    let mut g = vec![0i64; pw * ph];
    for x in 0..pw {
        for y in 1..ph {
            if inside(x, y) {
                g[y * pw + x] = g[(y - 1) * pw + x] + 1;
            }
        }
        for y in (0..ph - 1).rev() {
            let below = g[(y + 1) * pw + x];
            if below < g[y * pw + x] {
                g[y * pw + x] = below + 1;
            }
        }
    }

    let mut out = vec![0u64; w * h];
    let mut s = vec![0i64; pw];
    let mut t = vec![0i64; pw];
    let width = pw as i64;
    for y in 1..=h {
        let row = &g[y * pw..(y + 1) * pw];
        let f = |x: i64, i: i64| (x - i) * (x - i) + row[i as usize] * row[i as usize];
        let sep = |i: i64, u: i64| {
            let gi = row[i as usize];
            let gu = row[u as usize];
            (u * u - i * i + gu * gu - gi * gi).div_euclid(2 * (u - i))
        };

        let mut q: i64 = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..width {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let wpos = 1 + sep(s[q as usize], u);
                if wpos < width {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = wpos;
                }
            }
        }
        for u in (0..width).rev() {
            if u >= 1 && u <= w as i64 {
                out[(y - 1) * w + (u as usize - 1)] = f(u, s[q as usize]) as u64;
            }
            if u == t[q as usize] {
                q -= 1;
            }
        }
    }
    out
}

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel, treating the area outside the image as background.
pub fn euclidean_distance_transform(mask: &BinaryMask) -> DistanceMap {
    let data = squared_distance_transform(mask)
        .into_iter()
        .map(|d| (d as f64).sqrt())
        .collect();
    DistanceMap {
        width: mask.width(),
        height: mask.height(),
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Nearest background by exhaustive scan over the padded grid.
    fn brute_force(mask: &BinaryMask) -> Vec<u64> {
        let (w, h) = (mask.width() as i64, mask.height() as i64);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !mask.get_signed(x, y) {
                    out.push(0);
                    continue;
                }
                let mut best = u64::MAX;
                for by in -1..=h {
                    for bx in -1..=w {
                        if !mask.get_signed(bx, by) {
                            let d = ((bx - x) * (bx - x) + (by - y) * (by - y)) as u64;
                            best = best.min(d);
                        }
                    }
                }
                out.push(best);
            }
        }
        out
    }

    #[test]
    fn empty_mask_is_all_zero() {
        let m = BinaryMask::new(4, 4).unwrap();
        assert!(euclidean_distance_transform(&m).data().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn isolated_center_pixel() {
        let m = BinaryMask::from_ascii(&["...", ".#.", "..."]).unwrap();
        let d = euclidean_distance_transform(&m);
        assert_eq!(d.get(1, 1), 1.0);
        assert_eq!(d.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn full_7x7_center_is_four() {
        let m = BinaryMask::from_fn(7, 7, |_, _| true).unwrap();
        assert_eq!(brute_force(&m)[3 * 7 + 3], 16);
        let d = euclidean_distance_transform(&m);
        assert_eq!(d.get(3, 3), 4.0);
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(1, 2), 2.0);
    }

    #[test]
    fn single_row_strip() {
        let m = BinaryMask::from_fn(9, 1, |_, _| true).unwrap();
        assert!(squared_distance_transform(&m).iter().all(|&d| d == 1));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            w in 1usize..24,
            h in 1usize..24,
            density in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let mut state = seed;
            let m = BinaryMask::from_fn(w, h, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64 / (1u64 << 31) as f64) < density
            }).unwrap();
            prop_assert_eq!(squared_distance_transform(&m), brute_force(&m));
        }
    }
}
