//! Synthetic camouflaged-motion videos and test doubles for every provider.
//!
//! Objects share the texture statistics of the background and differ by at
//! most 5 levels per channel, so appearance alone does not give them away
//! while motion does. [`generate`] renders a [`SceneScript`] with exact masks,
//! boxes and forward flow. The oracle providers answer from that ground truth
//! with seeded degradations ([`OracleKnobs`]); the heuristic providers work on
//! arbitrary frames and back the mock HTTP server.

mod heuristic;
mod oracle;
mod scene;
mod texture;

pub use heuristic::{propagate_boxes, BlockMatchFlow, BlueHighlightDetector, BoxTracker};
pub use oracle::{
    highlight_contrast, oracle_providers, OracleDetector, OracleFlow, OracleKnobs, OracleTracker,
    HIT_COVERAGE, MIN_HIGHLIGHT_CONTRAST,
};
pub use scene::{
    generate, Distractor, ObjectSpec, SceneScript, Shape, SyntheticVideo, MAX_CONTRAST_DELTA,
};
pub use texture::{value_noise, TextureSpec};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Id of video `index` in a standard synthetic dataset.
pub fn standard_video_id(index: usize) -> String {
    format!("synth_{index:03}")
}

/// Scripts of a standard dataset, keyed by video id.
pub fn standard_dataset(videos: usize, width: usize, height: usize, frames: usize) -> Vec<(String, SceneScript)> {
    (0..videos)
        .map(|i| (standard_video_id(i), SceneScript::standard(i, width, height, frames)))
        .collect()
}
