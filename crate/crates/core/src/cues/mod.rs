//! Per-frame motion intensity maps and the colored highlight.

mod bgs;
mod flow;
mod highlight;

pub use bgs::{bgs_difference, bgs_intensity, bgs_update, BackgroundModel, BgsParams, Component};
pub use flow::{apply_momentum, flow_intensity, flow_magnitude, subtract_mean_flow, FlowEmaState};
pub use highlight::{blend_highlight, HighlightedFrame, StrengthLaw, DEFAULT_HIGHLIGHT};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this spread a map is treated as constant and normalizes to zeros.
pub const DEGENERATE_RANGE: f64 = 1e-12;

/// Motion strength per pixel in `[0, 255]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl IntensityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid("intensity map", "buffer length mismatch"));
        }
        if values.iter().any(|v| !(0.0..=255.0).contains(v)) {
            return Err(Error::invalid("intensity map", "values must lie in [0, 255]"));
        }
        Ok(IntensityMap {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        IntensityMap {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Unnormalized per-pixel motion magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl RawMap {
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Min-max scale to `[0, 255]` using this map's own range.
    pub fn normalize(&self) -> IntensityMap {
        let (lo, hi) = self.range();
        self.normalize_with(lo, hi)
    }

    /// Min-max scale with an externally supplied range (per-video scope).
    /// A spread below [`DEGENERATE_RANGE`] yields all zeros.
    pub fn normalize_with(&self, lo: f64, hi: f64) -> IntensityMap {
        let spread = hi - lo;
        let values = if !(spread >= DEGENERATE_RANGE) {
            vec![0.0; self.values.len()]
        } else {
            self.values
                .iter()
                .map(|v| ((v - lo) / spread * 255.0).clamp(0.0, 255.0))
                .collect()
        };
        IntensityMap {
            width: self.width,
            height: self.height,
            values,
        }
    }
}

/// Whether intensity is normalized per frame or over the whole video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeScope {
    #[default]
    Frame,
    Video,
}

/// Normalize a batch of raw maps under `scope`.
pub fn normalize_all(raw: &[RawMap], scope: NormalizeScope) -> Vec<IntensityMap> {
    match scope {
        NormalizeScope::Frame => raw.iter().map(RawMap::normalize).collect(),
        NormalizeScope::Video => {
            let (lo, hi) = raw.iter().map(RawMap::range).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), (a, b)| (lo.min(a), hi.max(b)),
            );
            raw.iter().map(|r| r.normalize_with(lo, hi)).collect()
        }
    }
}
