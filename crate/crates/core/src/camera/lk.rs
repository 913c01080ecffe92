//! Pyramidal Lucas–Kanade point tracking (forward additive, coarse to fine).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::features::FeaturePoint;
use super::gray::Gray;
use crate::video::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LkParams {
    /// Window half-size; the window is `2 * half_window + 1` pixels wide.
    pub half_window: usize,
    pub levels: usize,
    pub max_iterations: usize,
    /// Iteration stops once the update is shorter than this, in pixels.
    pub epsilon: f64,
    /// Minimum eigenvalue of the window gradient matrix, per window pixel.
    pub min_eigen: f64,
    /// Mean absolute intensity residual above which a track is dropped.
    pub max_residual: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        LkParams {
            half_window: 10,
            levels: 3,
            max_iterations: 30,
            epsilon: 0.01,
            min_eigen: 1e-2,
            max_residual: 15.0,
        }
    }
}

/// A point in the previous frame and where it went in the current one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub from: (f64, f64),
    pub to: (f64, f64),
}

struct Level {
    img: Gray,
    gx: Gray,
    gy: Gray,
}

fn pyramid(frame: &Frame, levels: usize) -> Vec<Level> {
    let mut out: Vec<Level> = Vec::with_capacity(levels);
    let mut img = Gray::from_frame(frame);
    for l in 0..levels.max(1) {
        if l > 0 {
            if img.w < 8 || img.h < 8 {
                break;
            }
            img = img.pyr_down();
        }
        let (gx, gy) = img.gradients();
        out.push(Level {
            img: img.clone(),
            gx,
            gy,
        });
    }
    out
}

/// Track `points` from `prev` into `curr` with the default parameters.
pub fn track_features(prev: &Frame, curr: &Frame, points: &[FeaturePoint]) -> Vec<PointPair> {
    track_features_with(prev, curr, points, &LkParams::default())
}

/// Lost points (flat window, large residual, or a window leaving the frame)
/// are omitted.
pub fn track_features_with(
    prev: &Frame,
    curr: &Frame,
    points: &[FeaturePoint],
    params: &LkParams,
) -> Vec<PointPair> {
    if prev.dims() != curr.dims() || points.is_empty() {
        return Vec::new();
    }
    let pa = pyramid(prev, params.levels);
    let pb = pyramid(curr, params.levels);
    let (w, h) = prev.dims();
    // windows hanging over the border see replicated pixels and bias the fit
    let m = params.half_window as f64;
    let fits = |(x, y): (f64, f64)| x >= m && y >= m && x <= w as f64 - 1.0 - m && y <= h as f64 - 1.0 - m;
    points
        .iter()
        .filter_map(|p| {
            let d = track_one(&pa, &pb, (p.x, p.y), params)?;
            let to = (p.x + d.0, p.y + d.1);
            (fits((p.x, p.y)) && fits(to)).then_some(PointPair {
                from: (p.x, p.y),
                to,
            })
        })
        .collect()
}

fn track_one(pa: &[Level], pb: &[Level], pt: (f64, f64), params: &LkParams) -> Option<(f64, f64)> {
    let r = params.half_window as isize;
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut guess = (0.0, 0.0);
    let top = pa.len() - 1;
    for l in (0..=top).rev() {
        let scale = (1u64 << l) as f64;
        let (px, py) = (pt.0 / scale, pt.1 / scale);
        let a = &pa[l];
        let b = &pb[l];

        let mut tmpl = Vec::with_capacity(n as usize);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let x = px + dx as f64;
                let y = py + dy as f64;
                let ix = a.gx.sample(x, y);
                let iy = a.gy.sample(x, y);
                tmpl.push((a.img.sample(x, y), ix, iy));
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
            }
        }
        let det = gxx * gyy - gxy * gxy;
        let min_eig = 0.5 * (gxx + gyy) - libm::sqrt(0.25 * (gxx - gyy) * (gxx - gyy) + gxy * gxy);
        if min_eig / n < params.min_eigen || det.abs() < f64::EPSILON {
            return None;
        }

        let mut v = (0.0, 0.0);
        for _ in 0..params.max_iterations {
            let (mut bx, mut by) = (0.0, 0.0);
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (i0, ix, iy) = tmpl[k];
                    k += 1;
                    let j = b.img.sample(
                        px + dx as f64 + guess.0 + v.0,
                        py + dy as f64 + guess.1 + v.1,
                    );
                    let diff = i0 - j;
                    bx += diff * ix;
                    by += diff * iy;
                }
            }
            let ex = (gyy * bx - gxy * by) / det;
            let ey = (gxx * by - gxy * bx) / det;
            v.0 += ex;
            v.1 += ey;
            if !v.0.is_finite() || !v.1.is_finite() {
                return None;
            }
            if libm::hypot(ex, ey) < params.epsilon {
                break;
            }
        }
        guess = if l > 0 {
            (2.0 * (guess.0 + v.0), 2.0 * (guess.1 + v.1))
        } else {
            (guess.0 + v.0, guess.1 + v.1)
        };
    }

    let a = &pa[0];
    let b = &pb[0];
    let mut residual = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let x = pt.0 + dx as f64;
            let y = pt.1 + dy as f64;
            residual += (a.img.sample(x, y) - b.img.sample(x + guess.0, y + guess.1)).abs();
        }
    }
    (residual / n <= params.max_residual).then_some(guess)
}
