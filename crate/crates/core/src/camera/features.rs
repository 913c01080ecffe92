//! Shi–Tomasi corner detection.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::gray::Gray;
use crate::error::{Error, Result};
use crate::video::Frame;

/// Scores below this are treated as texture-free.
const MIN_SCORE: f64 = 1e-6;
/// Candidates must reach this fraction of the strongest score.
const QUALITY_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    pub x: f64,
    pub y: f64,
    /// Minimum eigenvalue of the local structure tensor.
    pub score: f64,
}

/// Sobel gradients, scaled to intensity units per pixel.
fn sobel(g: &Gray, x: usize, y: usize) -> (f64, f64) {
    let p = |dx: isize, dy: isize| g.at((x as isize + dx) as usize, (y as isize + dy) as usize);
    let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
    let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
    (gx / 8.0, gy / 8.0)
}

/// Minimum-eigenvalue response for every pixel; zero where the 3x3 window
/// of gradients does not fit.
pub(crate) fn min_eigen_map(g: &Gray) -> Vec<f64> {
    let (w, h) = (g.w, g.h);
    let mut ixx = alloc::vec![0.0; w * h];
    let mut ixy = alloc::vec![0.0; w * h];
    let mut iyy = alloc::vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let (gx, gy) = sobel(g, x, y);
            let i = y * w + x;
            ixx[i] = gx * gx;
            ixy[i] = gx * gy;
            iyy[i] = gy * gy;
        }
    }
    let mut out = alloc::vec![0.0; w * h];
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for yy in y - 1..=y + 1 {
                for xx in x - 1..=x + 1 {
                    let i = yy * w + xx;
                    a += ixx[i];
                    b += ixy[i];
                    c += iyy[i];
                }
            }
            let half_trace = 0.5 * (a + c);
            let disc = libm::sqrt(0.25 * (a - c) * (a - c) + b * b);
            out[y * w + x] = (half_trace - disc).max(0.0);
        }
    }
    out
}

/// Strongest corners, sorted by descending score and at least
/// `min_distance` pixels apart.
pub fn detect_features(
    frame: &Frame,
    max_points: usize,
    min_distance: f64,
) -> Result<Vec<FeaturePoint>> {
    if frame.width() < 5 || frame.height() < 5 {
        return Err(Error::FrameTooSmall {
            width: frame.width(),
            height: frame.height(),
            min: 5,
        });
    }
    if max_points == 0 {
        return Err(Error::invalid("max_points", "must be at least 1"));
    }
    let g = Gray::from_frame(frame);
    let score = min_eigen_map(&g);
    let (w, h) = (g.w, g.h);
    let best = score.iter().copied().fold(0.0, f64::max);
    if best < MIN_SCORE {
        return Ok(Vec::new());
    }
    let floor = (best * QUALITY_LEVEL).max(MIN_SCORE);

    let mut candidates = Vec::new();
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let s = score[y * w + x];
            if s < floor {
                continue;
            }
            // 3x3 non-maximum suppression
            let is_max = (y - 1..=y + 1)
                .all(|yy| (x - 1..=x + 1).all(|xx| score[yy * w + xx] <= s));
            if is_max {
                candidates.push(FeaturePoint {
                    x: x as f64,
                    y: y as f64,
                    score: s,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });

    let min_d2 = min_distance * min_distance;
    let mut kept: Vec<FeaturePoint> = Vec::new();
    for c in candidates {
        if kept.len() >= max_points {
            break;
        }
        let far = kept.iter().all(|k| {
            let dx = k.x - c.x;
            let dy = k.y - c.y;
            dx * dx + dy * dy >= min_d2
        });
        if far {
            kept.push(c);
        }
    }
    Ok(kept)
}
