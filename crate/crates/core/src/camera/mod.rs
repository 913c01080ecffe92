//! Static vs. moving camera classification.
//!
//! Corners are tracked between consecutive frames, a robust affine is fitted
//! per pair, and the per-pair affines are composed from frame 0. The image
//! center is pushed through every cumulative transform; its largest distance
//! from the start is the camera excursion. Small excursions route the video to
//! background subtraction, everything else to optical flow.

mod affine;
mod features;
mod gray;
mod lk;

pub use affine::{estimate_affine, AffineTransform, RansacParams};
pub use features::{detect_features, FeaturePoint};
pub use lk::{track_features, track_features_with, LkParams, PointPair};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::video::VideoSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    OpticalFlow,
    BackgroundSubtraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionRoute {
    pub route: Route,
    /// Furthest distance of the image center from its start, in pixels.
    pub max_excursion: f64,
    pub degenerate_pairs: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraParams {
    /// Static-camera threshold as a fraction of the frame diagonal.
    pub theta_cam_frac: f64,
    pub max_points: usize,
    pub min_distance: f64,
    pub lk: LkParams,
    pub ransac: RansacParams,
}

impl Default for CameraParams {
    fn default() -> Self {
        CameraParams {
            theta_cam_frac: 0.02,
            max_points: 100,
            min_distance: 7.0,
            lk: LkParams::default(),
            ransac: RansacParams::default(),
        }
    }
}

/// Per-pair affines mapping frame `k` coordinates into frame `k+1`.
/// Pairs whose geometry is degenerate are `None`.
pub fn pairwise_affines(
    seq: &VideoSequence,
    params: &CameraParams,
) -> Result<alloc::vec::Vec<Option<AffineTransform>>> {
    let frames = seq.frames();
    let mut out = alloc::vec::Vec::with_capacity(frames.len() - 1);
    for pair in frames.windows(2) {
        let pts = detect_features(&pair[0], params.max_points, params.min_distance)?;
        let tracked = track_features_with(&pair[0], &pair[1], &pts, &params.lk);
        out.push(estimate_affine(&tracked, &params.ransac).ok());
    }
    Ok(out)
}

pub fn classify_camera_motion(seq: &VideoSequence, params: &CameraParams) -> Result<MotionRoute> {
    let affines = pairwise_affines(seq, params)?;
    let (w, h) = seq.dims();
    let center = (w as f64 / 2.0, h as f64 / 2.0);
    let threshold = params.theta_cam_frac * libm::hypot(w as f64, h as f64);

    let mut cumulative = AffineTransform::IDENTITY;
    let mut max_excursion: f64 = 0.0;
    let mut degenerate = 0;
    for t in &affines {
        let step = match t {
            Some(t) => *t,
            None => {
                degenerate += 1;
                AffineTransform::IDENTITY
            }
        };
        cumulative = step.compose(&cumulative);
        let (x, y) = cumulative.apply(center.0, center.1);
        max_excursion = max_excursion.max(libm::hypot(x - center.0, y - center.1));
    }

    let collapsed = 2 * degenerate > affines.len();
    let route = if collapsed || max_excursion >= threshold {
        Route::OpticalFlow
    } else {
        Route::BackgroundSubtraction
    };
    Ok(MotionRoute {
        route,
        max_excursion,
        degenerate_pairs: degenerate,
        pairs: affines.len(),
    })
}
