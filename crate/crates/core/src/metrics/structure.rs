//! Structure measure (Fan et al., ICCV 2017), following the reference MATLAB
//! code including its 1-based centroid rounding.

use alloc::vec::Vec;

use super::SoftMap;
use crate::error::{Error, Result};
use crate::video::BinaryMask;

const EPS: f64 = f64::EPSILON;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; a single value has deviation 0.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64)
}

fn object_score(values: &[f64]) -> f64 {
    let x = mean(values);
    2.0 * x / (x * x + 1.0 + std_dev(values) + EPS)
}

fn s_object(pred: &SoftMap, gt: &BinaryMask) -> f64 {
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (&p, &g) in pred.values().iter().zip(gt.bits()) {
        if g {
            fg.push(p);
        } else {
            bg.push(1.0 - p);
        }
    }
    let u = fg.len() as f64 / gt.bits().len() as f64;
    u * object_score(&fg) + (1.0 - u) * object_score(&bg)
}

/// MATLAB `round` for non-negative input.
fn round_half_up(v: f64) -> usize {
    libm::floor(v + 0.5) as usize
}

/// 1-based `(X, Y)` centroid of the foreground.
fn centroid(gt: &BinaryMask) -> (usize, usize) {
    let (w, h) = gt.dims();
    let total = gt.count();
    if total == 0 {
        return (round_half_up(w as f64 / 2.0), round_half_up(h as f64 / 2.0));
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if gt.get(x, y) {
                sx += (x + 1) as f64;
                sy += (y + 1) as f64;
            }
        }
    }
    (
        round_half_up(sx / total as f64),
        round_half_up(sy / total as f64),
    )
}

fn region_ssim(pred: &[f64], gt: &[f64]) -> f64 {
    let n = pred.len() as f64;
    let x = mean(pred);
    let y = mean(gt);
    let (mut sx2, mut sy2, mut sxy) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        sx2 += (p - x) * (p - x);
        sy2 += (g - y) * (g - y);
        sxy += (p - x) * (g - y);
    }
    let denom = n - 1.0 + EPS;
    let (sx2, sy2, sxy) = (sx2 / denom, sy2 / denom, sxy / denom);
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx2 + sy2);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn s_region(pred: &SoftMap, gt: &BinaryMask) -> f64 {
    let (w, h) = gt.dims();
    let (cx, cy) = centroid(gt);
    let area = (w * h) as f64;
    let quadrants = [(0, cx, 0, cy), (cx, w, 0, cy), (0, cx, cy, h), (cx, w, cy, h)];
    let weights = {
        let w1 = (cx * cy) as f64 / area;
        let w2 = ((w - cx) * cy) as f64 / area;
        let w3 = (cx * (h - cy)) as f64 / area;
        [w1, w2, w3, 1.0 - w1 - w2 - w3]
    };
    let mut q = 0.0;
    let (mut ps, mut gs) = (Vec::new(), Vec::new());
    for ((x0, x1, y0, y1), wq) in quadrants.into_iter().zip(weights) {
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        ps.clear();
        gs.clear();
        for y in y0..y1 {
            for x in x0..x1 {
                ps.push(pred.at(x, y));
                gs.push(if gt.get(x, y) { 1.0 } else { 0.0 });
            }
        }
        q += wq * region_ssim(&ps, &gs);
    }
    q
}

pub fn s_measure(pred: &SoftMap, gt: &BinaryMask) -> Result<f64> {
    Error::check_dims(gt.dims(), pred.dims())?;
    let y = gt.count() as f64 / gt.bits().len() as f64;
    let x = mean(pred.values());
    let q = if y == 0.0 {
        1.0 - x
    } else if y == 1.0 {
        x
    } else {
        (0.5 * s_object(pred, gt) + 0.5 * s_region(pred, gt)).max(0.0)
    };
    Ok(q.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_rounding() {
        // foreground at 1-based columns 1 and 2 -> 1.5 rounds up to 2
        let m = BinaryMask::from_fn(4, 2, |x, _| x < 2);
        assert_eq!(centroid(&m), (2, 2));
        assert_eq!(centroid(&BinaryMask::empty(5, 3)), (3, 2));
    }

    #[test]
    fn perfect_and_inverted() {
        let gt = BinaryMask::from_fn(8, 8, |x, y| (2..5).contains(&x) && (1..6).contains(&y));
        let good = s_measure(&SoftMap::from_mask(&gt), &gt).unwrap();
        assert!((good - 1.0).abs() < 1e-12);
        let inv = SoftMap::from_mask(&BinaryMask::from_fn(8, 8, |x, y| !gt.get(x, y)));
        assert!(s_measure(&inv, &gt).unwrap() < good);
    }

    #[test]
    fn uniform_ground_truth() {
        let empty = BinaryMask::empty(4, 4);
        let p = SoftMap::new(4, 4, alloc::vec![0.25; 16]).unwrap();
        assert_eq!(s_measure(&p, &empty).unwrap(), 0.75);
        assert_eq!(s_measure(&p, &BinaryMask::full(4, 4)).unwrap(), 0.25);
    }
}
