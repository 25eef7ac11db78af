use std::collections::VecDeque;

use super::BinaryMask;

const NEIGHBORS_8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Labels 8-connected foreground components. Label 0 is background; components
/// are numbered from 1 in the row-major order of their first pixel.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, usize) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (x, y) = ((idx % w) as i64, (idx / w) as i64);
            for (dx, dy) in NEIGHBORS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let n = ny as usize * w + nx as usize;
                    if labels[n] == 0 {
                        labels[n] = next;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

/// One full-size mask per 8-connected foreground component.
pub fn connected_components(mask: &BinaryMask) -> Vec<BinaryMask> {
    let (labels, count) = label_components(mask);
    let mut out: Vec<Vec<bool>> = vec![vec![false; labels.len()]; count];
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            out[l as usize - 1][i] = true;
        }
    }
    out.into_iter()
        .map(|data| {
            BinaryMask::from_vec(mask.width(), mask.height(), data)
                .expect("component mask shares the input shape")
        })
        .collect()
}
