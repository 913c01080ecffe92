//! Open-vocabulary detection with positive/negative text queries.
//!
//! Query 0 is always the positive prompt. Negative queries act as sinks for
//! distractors: a box labeled with a negative query is never selected.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cues::HighlightedFrame;
use crate::error::{Error, Result};
use crate::provider::{DetectorProvider, ProviderError, ProviderErrorKind};
use crate::video::BoundingBox;

pub const POSITIVE_PROMPT: &str = "an animal or insect being highlighted in blue";
pub const NEGATIVE_PROMPTS: [&str; 3] = ["background", "logo or sign", "plant"];

/// Index of the positive query in every [`PromptSet`].
pub const POSITIVE_LABEL: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub positive: String,
    pub negatives: Vec<String>,
}

impl PromptSet {
    pub fn new(positive: impl Into<String>, negatives: Vec<String>) -> Result<Self> {
        let positive = positive.into();
        if positive.trim().is_empty() {
            return Err(Error::invalid("prompt set", "positive prompt is empty"));
        }
        Ok(PromptSet {
            positive,
            negatives,
        })
    }

    /// Positive first, then the negatives in order.
    pub fn queries(&self) -> Vec<String> {
        core::iter::once(self.positive.clone())
            .chain(self.negatives.iter().cloned())
            .collect()
    }
}

/// Prompt wording ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    #[default]
    Default,
    /// Generic "object" instead of "animal or insect".
    NoAnimal,
    /// No mention of the highlight.
    NoHighlight,
    /// Positive prompt only.
    NoNegatives,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    pub variant: PromptVariant,
    /// Overrides the variant's positive prompt.
    pub positive: Option<String>,
    /// Overrides the variant's negative prompts.
    pub negatives: Option<Vec<String>>,
}

pub fn build_prompt_set(config: &PromptConfig) -> Result<PromptSet> {
    let default_negatives = || NEGATIVE_PROMPTS.iter().map(|s| s.to_string()).collect();
    let (positive, negatives): (String, Vec<String>) = match config.variant {
        PromptVariant::Default => (POSITIVE_PROMPT.into(), default_negatives()),
        PromptVariant::NoAnimal => ("an object being highlighted in blue".into(), default_negatives()),
        PromptVariant::NoHighlight => ("an animal or insect".into(), default_negatives()),
        PromptVariant::NoNegatives => (POSITIVE_PROMPT.into(), Vec::new()),
    };
    PromptSet::new(
        config.positive.clone().unwrap_or(positive),
        config.negatives.clone().unwrap_or(negatives),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
    pub label_index: usize,
}

/// Detect on one (possibly highlighted) frame, keeping scores `>= threshold`.
pub fn detect_frame<D: DetectorProvider + ?Sized>(
    provider: &D,
    frame: &HighlightedFrame,
    prompts: &PromptSet,
    threshold: f64,
) -> Result<Vec<Detection>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid("threshold", "must lie in (0, 1)"));
    }
    let queries = prompts.queries();
    let dets = provider.detect(&frame.frame, &queries, threshold)?;
    if let Some(bad) = dets.iter().find(|d| d.label_index >= queries.len()) {
        return Err(ProviderError::new(
            ProviderErrorKind::Malformed,
            alloc::format!("label index {} outside {} queries", bad.label_index, queries.len()),
        )
        .into());
    }
    Ok(filter_by_threshold(&dets, threshold))
}

pub fn filter_by_threshold(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.score >= threshold).copied().collect()
}

/// Highest-scoring positive detection. Ties go to the larger box, then to the
/// smaller `x0`, then to the earlier entry.
pub fn select_top_box(dets: &[Detection]) -> Option<Detection> {
    let better = |a: &Detection, b: &Detection| -> Ordering {
        a.score
            .total_cmp(&b.score)
            .then(a.bbox.area().total_cmp(&b.bbox.area()))
            .then(b.bbox.x0.total_cmp(&a.bbox.x0))
    };
    dets.iter()
        .filter(|d| d.label_index == POSITIVE_LABEL)
        .fold(None, |best: Option<&Detection>, d| match best {
            Some(b) if better(d, b) != Ordering::Greater => Some(b),
            _ => Some(d),
        })
        .copied()
}
