//! Weighted F-measure (Margolin et al., CVPR 2014), beta = 1.

use alloc::vec::Vec;

use super::edt::distance_transform;
use super::SoftMap;
use crate::error::{Error, Result};
use crate::video::BinaryMask;

const EPS: f64 = f64::EPSILON;
const KERNEL_RADIUS: usize = 3;
const KERNEL_SIGMA: f64 = 5.0;

/// Normalized 7x7 Gaussian; entries below `eps * max` are zeroed first.
fn gaussian_kernel() -> [[f64; 7]; 7] {
    let mut k = [[0.0; 7]; 7];
    let r = KERNEL_RADIUS as f64;
    let mut max = 0.0f64;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (y, x) = (i as f64 - r, j as f64 - r);
            *v = libm::exp(-(x * x + y * y) / (2.0 * KERNEL_SIGMA * KERNEL_SIGMA));
            max = max.max(*v);
        }
    }
    let mut sum = 0.0;
    for v in k.iter_mut().flatten() {
        if *v < EPS * max {
            *v = 0.0;
        }
        sum += *v;
    }
    for v in k.iter_mut().flatten() {
        *v /= sum;
    }
    k
}

/// Same-size correlation with zero padding.
fn correlate(src: &[f64], w: usize, h: usize, k: &[[f64; 7]; 7]) -> Vec<f64> {
    let r = KERNEL_RADIUS as i64;
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for dy in -r..=r {
                let sy = y + dy;
                if sy < 0 || sy >= h as i64 {
                    continue;
                }
                for dx in -r..=r {
                    let sx = x + dx;
                    if sx < 0 || sx >= w as i64 {
                        continue;
                    }
                    acc += k[(dy + r) as usize][(dx + r) as usize] * src[sy as usize * w + sx as usize];
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Empty ground truth scores 1 for an all-zero prediction and 0 otherwise; an
/// all-zero prediction against non-empty ground truth scores 0.
pub fn weighted_f(pred: &SoftMap, gt: &BinaryMask) -> Result<f64> {
    Error::check_dims(gt.dims(), pred.dims())?;
    let pred_empty = pred.values().iter().all(|&v| v == 0.0);
    let Some(dt) = distance_transform(gt) else {
        return Ok(if pred_empty { 1.0 } else { 0.0 });
    };
    if pred_empty {
        return Ok(0.0);
    }
    let (w, h) = gt.dims();
    let g = gt.bits();
    let e: Vec<f64> = pred
        .values()
        .iter()
        .zip(g)
        .map(|(&p, &b)| (p - if b { 1.0 } else { 0.0 }).abs())
        .collect();
    // background pixels take the error of their nearest foreground pixel
    let mut et = e.clone();
    for y in 0..h {
        for x in 0..w {
            if !g[y * w + x] {
                let (nx, ny) = dt.nearest(x, y);
                et[y * w + x] = e[ny * w + nx];
            }
        }
    }
    let ea = correlate(&et, w, h, &gaussian_kernel());
    let decay = libm::log(0.5) / 5.0;
    let (mut tp_sum, mut fp, mut n_fg, mut err_fg) = (0.0, 0.0, 0usize, 0.0);
    for i in 0..e.len() {
        if g[i] {
            let min_e = if ea[i] < e[i] { ea[i] } else { e[i] };
            err_fg += min_e;
            n_fg += 1;
            tp_sum += 1.0;
        } else {
            let b = 2.0 - libm::exp(decay * dt.distances()[i]);
            fp += e[i] * b;
        }
    }
    let tp = tp_sum - err_fg;
    let r = 1.0 - err_fg / n_fg as f64;
    let p = tp / (EPS + tp + fp);
    Ok((2.0 * r * p / (EPS + r + p)).clamp(0.0, 1.0))
}
