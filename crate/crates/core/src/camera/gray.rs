use alloc::vec::Vec;

use crate::video::Frame;

/// Single-channel floating point image used by the feature tracker.
#[derive(Debug, Clone)]
pub(crate) struct Gray {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f64>,
}

impl Gray {
    pub fn from_frame(frame: &Frame) -> Self {
        Gray {
            w: frame.width(),
            h: frame.height(),
            data: frame.luma(),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x]
    }

    #[inline]
    fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.at(x, y)
    }

    /// Bilinear sample with replicated borders.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = libm::floor(x);
        let fy = libm::floor(y);
        let ax = x - fx;
        let ay = y - fy;
        let ix = fx as isize;
        let iy = fy as isize;
        let p00 = self.at_clamped(ix, iy);
        let p10 = self.at_clamped(ix + 1, iy);
        let p01 = self.at_clamped(ix, iy + 1);
        let p11 = self.at_clamped(ix + 1, iy + 1);
        (1.0 - ay) * ((1.0 - ax) * p00 + ax * p10) + ay * ((1.0 - ax) * p01 + ax * p11)
    }

    /// Central-difference gradients with replicated borders.
    pub fn gradients(&self) -> (Gray, Gray) {
        let mut gx = Vec::with_capacity(self.data.len());
        let mut gy = Vec::with_capacity(self.data.len());
        for y in 0..self.h as isize {
            for x in 0..self.w as isize {
                gx.push(0.5 * (self.at_clamped(x + 1, y) - self.at_clamped(x - 1, y)));
                gy.push(0.5 * (self.at_clamped(x, y + 1) - self.at_clamped(x, y - 1)));
            }
        }
        (
            Gray {
                w: self.w,
                h: self.h,
                data: gx,
            },
            Gray {
                w: self.w,
                h: self.h,
                data: gy,
            },
        )
    }

    /// Gaussian 5-tap blur followed by 2x decimation.
    pub fn pyr_down(&self) -> Gray {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let mut tmp = Vec::with_capacity(self.data.len());
        for y in 0..self.h as isize {
            for x in 0..self.w as isize {
                let s: f64 = (0..5)
                    .map(|k| K[k] * self.at_clamped(x + k as isize - 2, y))
                    .sum();
                tmp.push(s);
            }
        }
        let tmp = Gray {
            w: self.w,
            h: self.h,
            data: tmp,
        };
        let w = self.w.div_ceil(2);
        let h = self.h.div_ceil(2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h as isize {
            for x in 0..w as isize {
                let s: f64 = (0..5)
                    .map(|k| K[k] * tmp.at_clamped(2 * x, 2 * y + k as isize - 2))
                    .sum();
                data.push(s);
            }
        }
        Gray { w, h, data }
    }
}
