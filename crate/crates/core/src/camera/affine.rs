//! Robust 2D affine estimation from point correspondences.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lk::PointPair;
use crate::error::{Error, Result};

/// `x' = a x + b y + tx`, `y' = c x + d y + ty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub c: f64,
    pub d: f64,
    pub ty: f64,
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        a: 1.0,
        b: 0.0,
        tx: 0.0,
        c: 0.0,
        d: 1.0,
        ty: 0.0,
    };

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineTransform {
            tx,
            ty,
            ..Self::IDENTITY
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x + self.b * y + self.tx,
            self.c * x + self.d * y + self.ty,
        )
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &AffineTransform) -> AffineTransform {
        AffineTransform {
            a: self.a * first.a + self.b * first.c,
            b: self.a * first.b + self.b * first.d,
            tx: self.a * first.tx + self.b * first.ty + self.tx,
            c: self.c * first.a + self.d * first.c,
            d: self.c * first.b + self.d * first.d,
            ty: self.c * first.tx + self.d * first.ty + self.ty,
        }
    }

    pub fn inverse(&self) -> Option<AffineTransform> {
        let det = self.determinant();
        if det.abs() < 1e-12 || !det.is_finite() {
            return None;
        }
        let a = self.d / det;
        let b = -self.b / det;
        let c = -self.c / det;
        let d = self.a / det;
        Some(AffineTransform {
            a,
            b,
            tx: -(a * self.tx + b * self.ty),
            c,
            d,
            ty: -(c * self.tx + d * self.ty),
        })
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.tx, self.c, self.d, self.ty]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RansacParams {
    pub inlier_threshold: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            inlier_threshold: 2.0,
            iterations: 100,
            seed: 0,
        }
    }
}

/// Least-squares affine fit in centered coordinates. `None` when the source
/// points are (numerically) collinear.
fn least_squares(pairs: &[&PointPair]) -> Option<AffineTransform> {
    let n = pairs.len() as f64;
    if pairs.len() < 3 {
        return None;
    }
    let (mut mx, mut my, mut mu, mut mv) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        mx += p.from.0;
        my += p.from.1;
        mu += p.to.0;
        mv += p.to.1;
    }
    mx /= n;
    my /= n;
    mu /= n;
    mv /= n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut sux, mut suy, mut svx, mut svy) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        let x = p.from.0 - mx;
        let y = p.from.1 - my;
        let u = p.to.0 - mu;
        let v = p.to.1 - mv;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sux += u * x;
        suy += u * y;
        svx += v * x;
        svy += v * y;
    }
    let det = sxx * syy - sxy * sxy;
    let scale = (sxx + syy) * (sxx + syy);
    if scale <= 0.0 || det <= 1e-10 * scale {
        return None;
    }
    let a = (sux * syy - suy * sxy) / det;
    let b = (suy * sxx - sux * sxy) / det;
    let c = (svx * syy - svy * sxy) / det;
    let d = (svy * sxx - svx * sxy) / det;
    let t = AffineTransform {
        a,
        b,
        tx: mu - a * mx - b * my,
        c,
        d,
        ty: mv - c * mx - d * my,
    };
    t.is_finite().then_some(t)
}

fn residual(t: &AffineTransform, p: &PointPair) -> f64 {
    let (x, y) = t.apply(p.from.0, p.from.1);
    libm::hypot(x - p.to.0, y - p.to.1)
}

/// RANSAC over minimal 3-point samples, then a least-squares refit on the
/// inliers of the best hypothesis.
pub fn estimate_affine(pairs: &[PointPair], params: &RansacParams) -> Result<AffineTransform> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateGeometry("need at least 3 point pairs"));
    }
    let all: Vec<&PointPair> = pairs.iter().collect();
    if least_squares(&all).is_none() {
        return Err(Error::DegenerateGeometry("source points are collinear"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = pairs.len();
    let mut best: Option<(usize, AffineTransform)> = None;
    for _ in 0..params.iterations.max(100) {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.gen_range(0..n - 2);
        for m in [i.min(j), i.max(j)] {
            if k >= m {
                k += 1;
            }
        }
        let Some(model) = least_squares(&[&pairs[i], &pairs[j], &pairs[k]]) else {
            continue;
        };
        let inliers = pairs
            .iter()
            .filter(|p| residual(&model, p) < params.inlier_threshold)
            .count();
        if best.is_none_or(|(b, _)| inliers > b) {
            best = Some((inliers, model));
        }
    }

    let model = match best {
        Some((_, m)) => m,
        None => least_squares(&all).expect("checked above"),
    };
    // Two refinement rounds: refit on inliers, recompute inliers, refit.
    let mut current = model;
    for _ in 0..2 {
        let inliers: Vec<&PointPair> = pairs
            .iter()
            .filter(|p| residual(&current, p) < params.inlier_threshold)
            .collect();
        match least_squares(&inliers) {
            Some(refit) => current = refit,
            None => break,
        }
    }
    Ok(current)
}
