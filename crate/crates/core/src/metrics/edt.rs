//! Exact Euclidean distance transform with nearest-feature indices.
//!
//! Separable Voronoi sweep (Maurer et al.): columns first, then rows. Ties
//! between equidistant features resolve exactly as in `scipy.ndimage`, which
//! matters for weighted-F where the nearest foreground value is copied.

use alloc::vec;
use alloc::vec::Vec;

use crate::video::BinaryMask;

pub struct DistanceField {
    width: usize,
    dist: Vec<f64>,
    /// `(x, y)` of the nearest feature pixel.
    nearest: Vec<(usize, usize)>,
}

impl DistanceField {
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[y * self.width + x]
    }

    pub fn nearest(&self, x: usize, y: usize) -> (usize, usize) {
        self.nearest[y * self.width + x]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }
}

/// Distance from every pixel to the nearest `true` pixel of `features`;
/// `None` when there are no features.
pub fn distance_transform(features: &BinaryMask) -> Option<DistanceField> {
    if features.is_empty() {
        return None;
    }
    let (w, h) = features.dims();
    // [y, x] of the nearest feature, -1 when unknown
    let mut ft = vec![[-1i64; 2]; w * h];
    let mut line = Vec::new();
    let mut g = Vec::new();

    for x in 0..w {
        line.clear();
        line.extend((0..h).map(|y| {
            if features.get(x, y) {
                [y as i64, x as i64]
            } else {
                [-1, -1]
            }
        }));
        voronoi_line(&mut line, 0, [0, x as i64], &mut g);
        for (y, v) in line.iter().enumerate() {
            ft[y * w + x] = *v;
        }
    }
    for y in 0..h {
        let row = &mut ft[y * w..(y + 1) * w];
        line.clear();
        line.extend_from_slice(row);
        voronoi_line(&mut line, 1, [y as i64, 0], &mut g);
        row.copy_from_slice(&line);
    }

    let mut dist = Vec::with_capacity(w * h);
    let mut nearest = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let [fy, fx] = ft[y * w + x];
            let dy = (fy - y as i64) as f64;
            let dx = (fx - x as i64) as f64;
            dist.push(libm::sqrt(dy * dy + dx * dx));
            nearest.push((fx as usize, fy as usize));
        }
    }
    Some(DistanceField {
        width: w,
        dist,
        nearest,
    })
}

/// One 1-D pass along axis `d` (0 = y, 1 = x). `coor` holds the fixed
/// coordinate of the other axis.
fn voronoi_line(line: &mut [[i64; 2]], d: usize, coor: [i64; 2], g: &mut Vec<usize>) {
    let f: Vec<[i64; 2]> = line.to_vec();
    let o = 1 - d;
    let sq = |v: i64| (v * v) as f64;
    g.clear();
    for (ii, fi) in f.iter().enumerate() {
        if fi[0] < 0 {
            continue;
        }
        let fd = fi[d] as f64;
        let wr = sq(fi[o] - coor[o]);
        while g.len() >= 2 {
            let idx1 = g[g.len() - 1];
            let idx2 = g[g.len() - 2];
            let f1 = f[idx1][d] as f64;
            let a = f1 - f[idx2][d] as f64;
            let b = fd - f1;
            let ur = sq(f[idx2][o] - coor[o]);
            let vr = sq(f[idx1][o] - coor[o]);
            let c = a + b;
            if c * vr - b * ur - a * wr - a * b * c <= 0.0 {
                break;
            }
            g.pop();
        }
        g.push(ii);
    }
    if g.is_empty() {
        return;
    }
    let maxl = g.len() - 1;
    let dist2 = |k: usize, ii: usize| {
        let fk = f[g[k]];
        let td = (fk[d] - ii as i64) as f64;
        let to = (fk[o] - coor[o]) as f64;
        td * td + to * to
    };
    let mut l = 0;
    for (ii, out) in line.iter_mut().enumerate() {
        let mut delta1 = dist2(l, ii);
        while l < maxl {
            let delta2 = dist2(l + 1, ii);
            if delta1 <= delta2 {
                break;
            }
            delta1 = delta2;
            l += 1;
        }
        *out = f[g[l]];
    }
}
