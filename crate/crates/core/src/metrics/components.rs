use alloc::vec;
use alloc::vec::Vec;

use crate::video::{BinaryMask, BoundingBox};

/// Tight box around the largest 8-connected component. Equal-sized
/// components resolve to the one reached first in raster order.
pub fn largest_component_box(mask: &BinaryMask) -> Option<BoundingBox> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut best: Option<(usize, [usize; 4])> = None;
    for start in 0..w * h {
        if seen[start] || !mask.bits()[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        let mut ext = [usize::MAX, usize::MAX, 0, 0];
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            size += 1;
            ext = [ext[0].min(x), ext[1].min(y), ext[2].max(x + 1), ext[3].max(y + 1)];
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let j = ny * w + nx;
                    if !seen[j] && mask.bits()[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, ext));
        }
    }
    best.map(|(_, [x0, y0, x1, y1])| BoundingBox {
        x0: x0 as f64,
        y0: y0 as f64,
        x1: x1 as f64,
        y1: y1 as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_largest() {
        let m = BinaryMask::from_fn(10, 6, |x, y| (x < 2 && y < 2) || ((5..9).contains(&x) && (2..5).contains(&y)));
        assert_eq!(
            largest_component_box(&m),
            Some(BoundingBox::new(5.0, 2.0, 9.0, 5.0).unwrap())
        );
    }

    #[test]
    fn diagonal_is_connected() {
        let m = BinaryMask::from_fn(4, 4, |x, y| x == y);
        assert_eq!(
            largest_component_box(&m),
            Some(BoundingBox::new(0.0, 0.0, 4.0, 4.0).unwrap())
        );
    }

    #[test]
    fn ties_go_to_raster_order() {
        let m = BinaryMask::from_fn(7, 3, |x, y| y == 1 && (x == 5 || x == 1));
        assert_eq!(
            largest_component_box(&m),
            Some(BoundingBox::new(1.0, 1.0, 2.0, 2.0).unwrap())
        );
        assert_eq!(largest_component_box(&BinaryMask::empty(3, 3)), None);
    }
}
