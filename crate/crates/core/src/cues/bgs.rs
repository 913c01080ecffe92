//! Per-pixel Gaussian-mixture background model (MOG2 style).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::RawMap;
use super::IntensityMap;
use crate::error::{Error, Result};
use crate::video::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BgsParams {
    /// Components per pixel.
    pub k: usize,
    /// Learning rate.
    pub alpha: f64,
    pub var_floor: f64,
    pub var_init: f64,
    /// A pixel matches a component within this many standard deviations.
    pub match_sigmas: f64,
}

impl Default for BgsParams {
    fn default() -> Self {
        BgsParams {
            k: 5,
            alpha: 0.01,
            var_floor: 4.0,
            var_init: 15.0,
            match_sigmas: 3.0,
        }
    }
}

impl BgsParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("bgs.k", "need at least one component"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("bgs.alpha", "must lie in (0, 1)"));
        }
        if !(self.var_floor > 0.0) || self.var_init < self.var_floor {
            return Err(Error::invalid(
                "bgs.var_floor",
                "need 0 < var_floor <= var_init",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Component {
    pub weight: f32,
    pub mean: [f32; 3],
    /// Isotropic per-channel variance.
    pub var: f32,
}

/// Mixture state for every pixel; uninitialized until the first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    params: BgsParams,
    width: usize,
    height: usize,
    components: Vec<Component>,
    initialized: bool,
}

impl BackgroundModel {
    pub fn new(width: usize, height: usize, params: BgsParams) -> Result<Self> {
        params.validate()?;
        Ok(BackgroundModel {
            params,
            width,
            height,
            components: vec![Component::default(); width * height * params.k],
            initialized: false,
        })
    }

    pub fn params(&self) -> &BgsParams {
        &self.params
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// The mixture at pixel `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[Component] {
        let k = self.params.k;
        let i = (y * self.width + x) * k;
        &self.components[i..i + k]
    }

    fn leader(mix: &[Component]) -> &Component {
        // first maximum wins ties
        mix.iter()
            .fold(&mix[0], |best, c| if c.weight > best.weight { c } else { best })
    }

    /// Mean color of the heaviest component at each pixel.
    pub fn background(&self) -> Frame {
        let k = self.params.k;
        let mut pixels = Vec::with_capacity(self.width * self.height * 3);
        for mix in self.components.chunks_exact(k) {
            let c = Self::leader(mix);
            for ch in 0..3 {
                pixels.push(libm::roundf(c.mean[ch]).clamp(0.0, 255.0) as u8);
            }
        }
        Frame::new(self.width, self.height, pixels, 0).expect("model dimensions are valid")
    }

    fn update_pixel(p: &BgsParams, mix: &mut [Component], x: [f32; 3]) {
        let alpha = p.alpha as f32;
        let gate = (p.match_sigmas * p.match_sigmas) as f32;
        let mut matched: Option<usize> = None;
        let mut best_d = f32::INFINITY;
        for (i, c) in mix.iter().enumerate() {
            if c.weight <= 0.0 {
                continue;
            }
            let d2: f32 = (0..3).map(|ch| (x[ch] - c.mean[ch]) * (x[ch] - c.mean[ch])).sum::<f32>() / 3.0;
            let d = d2 / c.var;
            if d < gate && d < best_d {
                best_d = d;
                matched = Some(i);
            }
        }
        for c in mix.iter_mut() {
            c.weight *= 1.0 - alpha;
        }
        match matched {
            Some(m) => {
                let c = &mut mix[m];
                c.weight += alpha;
                let mut d2 = 0.0;
                for (mean, &v) in c.mean.iter_mut().zip(x.iter()) {
                    let diff = v - *mean;
                    *mean += alpha * diff;
                    d2 += diff * diff;
                }
                c.var = (c.var + alpha * (d2 / 3.0 - c.var)).max(p.var_floor as f32);
            }
            None => {
                let slot = mix
                    .iter()
                    .enumerate()
                    .fold(0, |lo, (i, c)| if c.weight < mix[lo].weight { i } else { lo });
                mix[slot] = Component {
                    weight: alpha,
                    mean: x,
                    var: p.var_init as f32,
                };
            }
        }
        let total: f32 = mix.iter().map(|c| c.weight).sum();
        if total > 0.0 {
            for c in mix.iter_mut() {
                c.weight = (c.weight / total).min(1.0);
            }
        }
    }
}

/// Feed one frame into the model and return the updated model together with
/// its current background estimate.
pub fn bgs_update(mut model: BackgroundModel, frame: &Frame) -> Result<(BackgroundModel, Frame)> {
    Error::check_dims(model.dims(), frame.dims())?;
    let k = model.params.k;
    let params = model.params;
    if !model.initialized {
        for (mix, px) in model
            .components
            .chunks_exact_mut(k)
            .zip(frame.pixels().chunks_exact(3))
        {
            mix[0] = Component {
                weight: 1.0,
                mean: [px[0] as f32, px[1] as f32, px[2] as f32],
                var: params.var_init as f32,
            };
        }
        model.initialized = true;
    } else {
        for (mix, px) in model
            .components
            .chunks_exact_mut(k)
            .zip(frame.pixels().chunks_exact(3))
        {
            BackgroundModel::update_pixel(&params, mix, [px[0] as f32, px[1] as f32, px[2] as f32]);
        }
    }
    let bg = model.background().with_index(frame.index);
    Ok((model, bg))
}

/// Per-pixel L1 RGB difference, before normalization.
pub fn bgs_difference(frame: &Frame, background: &Frame) -> Result<RawMap> {
    Error::check_dims(frame.dims(), background.dims())?;
    let values = frame
        .pixels()
        .chunks_exact(3)
        .zip(background.pixels().chunks_exact(3))
        .map(|(a, b)| (0..3).map(|c| (a[c] as f64 - b[c] as f64).abs()).sum())
        .collect();
    Ok(RawMap {
        width: frame.width(),
        height: frame.height(),
        values,
    })
}

/// L1 difference to the background, min-max normalized to `[0, 255]`.
pub fn bgs_intensity(frame: &Frame, background: &Frame) -> Result<IntensityMap> {
    Ok(bgs_difference(frame, background)?.normalize())
}
