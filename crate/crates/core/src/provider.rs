//! Interfaces to the three external neural capabilities.
//!
//! Dense flow, open-vocabulary detection and promptable video segmentation are
//! reached only through these traits. In-process oracles live in
//! [`crate::synth`]; HTTP clients live in the companion crate.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::detection::Detection;
use crate::flow::FlowField;
use crate::tracking::{Direction, PromptTimeline};
use crate::video::{Frame, MaskSeries, VideoSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Transport,
    Timeout,
    Malformed,
    UnknownReference,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind:?}: {message}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub message: String,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, message: impl Into<String>) -> Self {
        ProviderError {
            kind,
            message: message.into(),
        }
    }

    /// Transport failures and timeouts may succeed on retry.
    pub fn is_retriable(&self) -> bool {
        matches!(
            self.kind,
            ProviderErrorKind::Transport | ProviderErrorKind::Timeout
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderCapabilities {
    pub supports_concurrent: bool,
    pub max_image_edge: u32,
    pub model_name: String,
}

impl ProviderCapabilities {
    pub fn new(model_name: impl Into<String>, supports_concurrent: bool) -> Self {
        ProviderCapabilities {
            supports_concurrent,
            max_image_edge: 4096,
            model_name: model_name.into(),
        }
    }
}

pub type ProviderResult<T> = core::result::Result<T, ProviderError>;

pub trait FlowProvider: Send + Sync {
    fn capabilities(&self) -> ProviderCapabilities;

    /// Forward flow from `prev` to `curr`, same dimensions as the frames.
    fn compute(&self, prev: &Frame, curr: &Frame) -> ProviderResult<FlowField>;
}

pub trait DetectorProvider: Send + Sync {
    fn capabilities(&self) -> ProviderCapabilities;

    /// Detections scoring at least `threshold`, labeled by query index.
    fn detect(&self, image: &Frame, queries: &[String], threshold: f64)
        -> ProviderResult<Vec<Detection>>;
}

/// Opaque handle for a video uploaded to a segmenter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionId(pub String);

pub trait SegmenterProvider: Send + Sync {
    fn capabilities(&self) -> ProviderCapabilities;

    fn open_session(&self, video: &VideoSequence) -> ProviderResult<SessionId>;

    /// Propagate `prompts` through the session video played in `direction`.
    ///
    /// Frame indices in `prompts` and in the returned series are playback
    /// indices: for [`Direction::Backward`] index `k` is original frame
    /// `t-1-k`. Callers normally go through [`crate::tracking::propagate`],
    /// which does the index mapping.
    fn track(
        &self,
        session: &SessionId,
        direction: Direction,
        prompts: &PromptTimeline,
    ) -> ProviderResult<MaskSeries>;
}

impl<T: FlowProvider + ?Sized> FlowProvider for &T {
    fn capabilities(&self) -> ProviderCapabilities {
        (**self).capabilities()
    }
    fn compute(&self, prev: &Frame, curr: &Frame) -> ProviderResult<FlowField> {
        (**self).compute(prev, curr)
    }
}

impl<T: DetectorProvider + ?Sized> DetectorProvider for &T {
    fn capabilities(&self) -> ProviderCapabilities {
        (**self).capabilities()
    }
    fn detect(
        &self,
        image: &Frame,
        queries: &[String],
        threshold: f64,
    ) -> ProviderResult<Vec<Detection>> {
        (**self).detect(image, queries, threshold)
    }
}

impl<T: SegmenterProvider + ?Sized> SegmenterProvider for &T {
    fn capabilities(&self) -> ProviderCapabilities {
        (**self).capabilities()
    }
    fn open_session(&self, video: &VideoSequence) -> ProviderResult<SessionId> {
        (**self).open_session(video)
    }
    fn track(
        &self,
        session: &SessionId,
        direction: Direction,
        prompts: &PromptTimeline,
    ) -> ProviderResult<MaskSeries> {
        (**self).track(session, direction, prompts)
    }
}

impl<T: FlowProvider + ?Sized> FlowProvider for alloc::boxed::Box<T> {
    fn capabilities(&self) -> ProviderCapabilities {
        (**self).capabilities()
    }
    fn compute(&self, prev: &Frame, curr: &Frame) -> ProviderResult<FlowField> {
        (**self).compute(prev, curr)
    }
}

impl<T: DetectorProvider + ?Sized> DetectorProvider for alloc::boxed::Box<T> {
    fn capabilities(&self) -> ProviderCapabilities {
        (**self).capabilities()
    }
    fn detect(
        &self,
        image: &Frame,
        queries: &[String],
        threshold: f64,
    ) -> ProviderResult<Vec<Detection>> {
        (**self).detect(image, queries, threshold)
    }
}

impl<T: SegmenterProvider + ?Sized> SegmenterProvider for alloc::boxed::Box<T> {
    fn capabilities(&self) -> ProviderCapabilities {
        (**self).capabilities()
    }
    fn open_session(&self, video: &VideoSequence) -> ProviderResult<SessionId> {
        (**self).open_session(video)
    }
    fn track(
        &self,
        session: &SessionId,
        direction: Direction,
        prompts: &PromptTimeline,
    ) -> ProviderResult<MaskSeries> {
        (**self).track(session, direction, prompts)
    }
}
