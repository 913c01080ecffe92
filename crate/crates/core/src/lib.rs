//! Zero-shot video camouflaged-object segmentation.
//!
//! The pipeline has four stages, each in its own module:
//!
//! 1. **camera** – sparse Lucas–Kanade tracking and affine composition decide
//!    whether a video has a static camera (background subtraction route) or a
//!    moving one (optical flow route).
//! 2. **cues** – per-frame motion intensity maps from dense flow (mean
//!    subtraction, momentum, magnitude) or from a Gaussian-mixture background
//!    model, blended into the frame as a colored highlight.
//! 3. **detection** – open-vocabulary detection with one positive and several
//!    negative text queries; the best positive box per frame is kept.
//! 4. **tracking** – boxes plus intensity center-of-mass points prompt a video
//!    segmenter in both temporal directions; the two mask series are OR-merged.
//!
//! `metrics` implements the evaluation protocol (IoU, Dice, MAE, S-measure,
//! E-measure, weighted F-measure, detection success rate) with explicit
//! aggregation modes. `synth` generates camouflaged test videos with exact
//! ground truth and oracle providers, and `pipeline` wires everything together.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, HTTP providers
//! and the command line live in the `camoseg` companion crate.

#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
extern crate std;

extern crate alloc;

pub mod camera;
pub mod cues;
pub mod detection;
pub mod error;
pub mod flow;
pub mod metrics;
pub mod pipeline;
pub mod provider;
pub mod synth;
pub mod tracking;
pub mod video;

pub use error::{Error, Result};
pub use flow::FlowField;
pub use video::{BinaryMask, BoundingBox, Frame, GroundTruth, MaskSeries, VideoSequence};
