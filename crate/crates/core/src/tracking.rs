//! Segmenter prompts, directional propagation and OR merging.
//!
//! Point prompts use pixel-index coordinates: pixel `(i, j)` sits at
//! `(i as f64, j as f64)`, so a uniform 4x4 box starting at the origin has its
//! center of mass at `(1.5, 1.5)`.

use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cues::IntensityMap;
use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::provider::{ProviderError, ProviderErrorKind, SegmenterProvider, SessionId};
use crate::video::{BoundingBox, MaskSeries, VideoSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Which temporal passes run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrackMode {
    /// No propagation: masks only on prompted frames.
    None,
    Forward,
    #[default]
    Bidirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    BoxOnly,
    #[default]
    BoxPlusPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskPrompt {
    pub frame_index: usize,
    pub bbox: BoundingBox,
    /// Positive click, always inside `bbox`.
    pub point: Option<(f64, f64)>,
}

/// Prompts for one video, strictly increasing in frame index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTimeline {
    frame_count: usize,
    prompts: Vec<MaskPrompt>,
}

impl PromptTimeline {
    pub fn new(frame_count: usize, prompts: Vec<MaskPrompt>) -> Result<Self> {
        if prompts.iter().any(|p| p.frame_index >= frame_count) {
            return Err(Error::invalid("prompt timeline", "frame index out of range"));
        }
        if prompts.windows(2).any(|w| w[0].frame_index >= w[1].frame_index) {
            return Err(Error::invalid(
                "prompt timeline",
                "frame indices must be strictly increasing",
            ));
        }
        if let Some(p) = prompts.iter().find(|p| p.point.is_some_and(|(x, y)| !p.bbox.contains(x, y))) {
            return Err(Error::invalid(
                "prompt timeline",
                alloc::format!("point outside its box at frame {}", p.frame_index),
            ));
        }
        Ok(PromptTimeline {
            frame_count,
            prompts,
        })
    }

    pub fn empty(frame_count: usize) -> Self {
        PromptTimeline {
            frame_count,
            prompts: Vec::new(),
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn prompts(&self) -> &[MaskPrompt] {
        &self.prompts
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn frame_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.prompts.iter().map(|p| p.frame_index)
    }

    /// Map frame `i` to `t-1-i`, keeping the list sorted.
    pub fn reversed(&self) -> PromptTimeline {
        let t = self.frame_count;
        PromptTimeline {
            frame_count: t,
            prompts: self
                .prompts
                .iter()
                .rev()
                .map(|p| MaskPrompt {
                    frame_index: t - 1 - p.frame_index,
                    ..*p
                })
                .collect(),
        }
    }
}

/// Intensity-weighted mean pixel position over the pixels whose centers lie in
/// `bbox`; `None` when the weights sum to zero.
pub fn center_of_mass(intensity: &IntensityMap, bbox: &BoundingBox) -> Option<(f64, f64)> {
    let (x0, y0, x1, y1) = bbox.pixel_range(intensity.width(), intensity.height());
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            let w = intensity.at(x, y);
            sw += w;
            sx += w * x as f64;
            sy += w * y as f64;
        }
    }
    // a weighted mean of equal coordinates can round one ulp outside
    (sw > 0.0).then(|| {
        (
            (sx / sw).clamp(x0 as f64, (x1 - 1) as f64),
            (sy / sw).clamp(y0 as f64, (y1 - 1) as f64),
        )
    })
}

/// Center of the covered pixels, matching [`center_of_mass`] on a uniform map.
fn box_center(bbox: &BoundingBox, width: usize, height: usize) -> (f64, f64) {
    let (x0, y0, x1, y1) = bbox.pixel_range(width, height);
    if x1 > x0 && y1 > y0 {
        ((x0 + x1 - 1) as f64 * 0.5, (y0 + y1 - 1) as f64 * 0.5)
    } else {
        bbox.center()
    }
}

fn clamp_into(bbox: &BoundingBox, (x, y): (f64, f64)) -> (f64, f64) {
    let below = |v: f64| v - f64::EPSILON * v.abs().max(1.0);
    (x.clamp(bbox.x0, below(bbox.x1)), y.clamp(bbox.y0, below(bbox.y1)))
}

/// One prompt per frame that has a detection.
pub fn assemble_prompts(
    detections: &[Option<Detection>],
    intensities: &[IntensityMap],
    mode: PromptMode,
) -> Result<PromptTimeline> {
    if mode == PromptMode::BoxPlusPoint && intensities.len() != detections.len() {
        return Err(Error::invalid(
            "intensity maps",
            alloc::format!("{} maps for {} frames", intensities.len(), detections.len()),
        ));
    }
    let prompts = detections
        .iter()
        .enumerate()
        .filter_map(|(i, d)| d.map(|d| (i, d.bbox)))
        .map(|(i, bbox)| {
            let point = match mode {
                PromptMode::BoxOnly => None,
                PromptMode::BoxPlusPoint => {
                    let im = &intensities[i];
                    let p = center_of_mass(im, &bbox)
                        .unwrap_or_else(|| box_center(&bbox, im.width(), im.height()));
                    Some(clamp_into(&bbox, p))
                }
            };
            MaskPrompt {
                frame_index: i,
                bbox,
                point,
            }
        })
        .collect();
    PromptTimeline::new(detections.len(), prompts)
}

fn check_output(series: &MaskSeries, seq: &VideoSequence) -> Result<()> {
    let malformed = |msg: &str| -> Error {
        ProviderError::new(ProviderErrorKind::Malformed, msg.to_string()).into()
    };
    if series.frame_count() != seq.len() {
        return Err(malformed("mask series length differs from the video"));
    }
    if series.dims().is_some_and(|d| d != seq.dims()) {
        return Err(malformed("mask dimensions differ from the video"));
    }
    Ok(())
}

/// Propagate within an already opened session. Indices in `timeline` and in
/// the result are original frame indices in both directions.
pub fn propagate_in_session<S: SegmenterProvider + ?Sized>(
    provider: &S,
    session: &SessionId,
    seq: &VideoSequence,
    timeline: &PromptTimeline,
    dir: Direction,
) -> Result<MaskSeries> {
    Error::check_dims((seq.len(), 1), (timeline.frame_count(), 1))?;
    if timeline.is_empty() {
        return Ok(MaskSeries::new(seq.source_id.clone(), seq.len()));
    }
    let mut out = match dir {
        Direction::Forward => provider.track(session, dir, timeline)?,
        Direction::Backward => provider.track(session, dir, &timeline.reversed())?.reversed(),
    };
    check_output(&out, seq)?;
    out.video_id = seq.source_id.clone();
    Ok(out)
}

/// Upload `seq` and propagate `timeline` in one direction.
pub fn propagate<S: SegmenterProvider + ?Sized>(
    provider: &S,
    seq: &VideoSequence,
    timeline: &PromptTimeline,
    dir: Direction,
) -> Result<MaskSeries> {
    if timeline.is_empty() {
        return Ok(MaskSeries::new(seq.source_id.clone(), seq.len()));
    }
    let session = provider.open_session(seq)?;
    propagate_in_session(provider, &session, seq, timeline, dir)
}

/// Per-frame OR; frames present in only one input pass through.
pub fn merge_bidirectional(fwd: &MaskSeries, bwd: &MaskSeries) -> Result<MaskSeries> {
    if fwd.video_id != bwd.video_id || fwd.frame_count() != bwd.frame_count() {
        return Err(Error::invalid(
            "mask series",
            "merging series from different videos",
        ));
    }
    if let (Some(a), Some(b)) = (fwd.dims(), bwd.dims()) {
        Error::check_dims(a, b)?;
    }
    let mut out = fwd.clone();
    for (i, m) in bwd.iter() {
        let merged = match fwd.get(i) {
            Some(f) => f.union(m)?,
            None => m.clone(),
        };
        out.insert(i, merged)?;
    }
    Ok(out)
}

/// Run the passes selected by `mode`, sharing one uploaded session.
pub fn track_video<S: SegmenterProvider + ?Sized>(
    provider: &S,
    seq: &VideoSequence,
    timeline: &PromptTimeline,
    mode: TrackMode,
) -> Result<MaskSeries> {
    if timeline.is_empty() {
        return Ok(MaskSeries::new(seq.source_id.clone(), seq.len()));
    }
    let session = provider.open_session(seq)?;
    let fwd = propagate_in_session(provider, &session, seq, timeline, Direction::Forward)?;
    match mode {
        TrackMode::None => {
            let prompted: Vec<usize> = timeline.frame_indices().collect();
            let mut only = fwd;
            only.retain(|i| prompted.binary_search(&i).is_ok());
            Ok(only)
        }
        TrackMode::Forward => Ok(fwd),
        TrackMode::Bidirectional => {
            let bwd = propagate_in_session(provider, &session, seq, timeline, Direction::Backward)?;
            merge_bidirectional(&fwd, &bwd)
        }
    }
}
