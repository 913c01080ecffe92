//! Seeded value noise for background and object textures.

use serde::{Deserialize, Serialize};

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of several words, used to derive independent seeds.
pub(crate) fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x2545_F491_4F6C_DD1D, |h, &w| splitmix(h ^ w))
}

/// Uniform in `[0, 1)` from a hash.
pub(crate) fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    unit(mix(&[seed, ix as u64, iy as u64]))
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Bilinear value noise in `[0, 1]` on a lattice of `cell` pixels.
pub fn value_noise(seed: u64, cell: f64, x: f64, y: f64) -> f64 {
    let (gx, gy) = (x / cell, y / cell);
    let (fx, fy) = (libm::floor(gx), libm::floor(gy));
    let (ix, iy) = (fx as i64, fy as i64);
    let (tx, ty) = (smoothstep(gx - fx), smoothstep(gy - fy));
    let top = lattice(seed, ix, iy) * (1.0 - tx) + lattice(seed, ix + 1, iy) * tx;
    let bottom = lattice(seed, ix, iy + 1) * (1.0 - tx) + lattice(seed, ix + 1, iy + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Two-octave earthy texture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    pub seed: u64,
    /// Coarse lattice spacing in pixels; the fine octave uses a third of it.
    pub cell: f64,
}

impl TextureSpec {
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        0.65 * value_noise(self.seed, self.cell, x, y)
            + 0.35 * value_noise(splitmix(self.seed), self.cell / 3.0, x, y)
    }

    /// Brown-green palette with little blue, so a blue highlight stands out.
    pub fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let n = self.sample(x, y);
        [70.0 + 120.0 * n, 60.0 + 100.0 * n, 40.0 + 60.0 * n]
    }
}
