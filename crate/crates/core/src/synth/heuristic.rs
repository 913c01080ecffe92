//! Appearance-only stand-ins for the neural providers.
//!
//! Unlike the oracles these need no scene script, so they can sit behind the
//! mock HTTP server and handle arbitrary frames.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::detection::{Detection, POSITIVE_LABEL};
use crate::flow::FlowField;
use crate::metrics::largest_component_box;
use crate::provider::{
    DetectorProvider, FlowProvider, ProviderCapabilities, ProviderError, ProviderErrorKind,
    ProviderResult, SegmenterProvider, SessionId,
};
use crate::tracking::{Direction, PromptTimeline};
use crate::video::{BinaryMask, Frame, MaskSeries, VideoSequence};

/// Exhaustive block matching on luma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatchFlow {
    pub block: usize,
    /// Search radius in pixels.
    pub radius: usize,
}

impl Default for BlockMatchFlow {
    fn default() -> Self {
        BlockMatchFlow { block: 8, radius: 4 }
    }
}

impl BlockMatchFlow {
    pub fn flow(&self, prev: &Frame, curr: &Frame) -> ProviderResult<FlowField> {
        if prev.dims() != curr.dims() {
            return Err(ProviderError::new(ProviderErrorKind::Rejected, "frame dimensions differ"));
        }
        let (w, h) = prev.dims();
        let (a, b) = (prev.luma(), curr.luma());
        let r = self.radius as i64;
        let mut field = vec![[0.0, 0.0]; w * h];
        for by in (0..h).step_by(self.block.max(1)) {
            for bx in (0..w).step_by(self.block.max(1)) {
                let (ex, ey) = ((bx + self.block).min(w), (by + self.block).min(h));
                let mut best = (f64::INFINITY, 0i64, 0i64);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let fits = bx as i64 + dx >= 0
                            && by as i64 + dy >= 0
                            && ex as i64 + dx <= w as i64
                            && ey as i64 + dy <= h as i64;
                        if !fits {
                            continue;
                        }
                        let mut sad = 0.0;
                        for y in by..ey {
                            for x in bx..ex {
                                let (tx, ty) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                                sad += (a[y * w + x] - b[ty * w + tx]).abs();
                            }
                        }
                        // prefer the smaller displacement on ties
                        let closer = dx * dx + dy * dy < best.1 * best.1 + best.2 * best.2;
                        if sad < best.0 || (sad == best.0 && closer) {
                            best = (sad, dx, dy);
                        }
                    }
                }
                for y in by..ey {
                    for x in bx..ex {
                        field[y * w + x] = [best.1 as f64, best.2 as f64];
                    }
                }
            }
        }
        FlowField::new(w, h, field)
            .map_err(|e| ProviderError::new(ProviderErrorKind::Malformed, alloc::format!("{e}")))
    }
}

impl FlowProvider for BlockMatchFlow {
    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities::new("mock-block-match", true)
    }

    fn compute(&self, prev: &Frame, curr: &Frame) -> ProviderResult<FlowField> {
        self.flow(prev, curr)
    }
}

/// Box around the largest blob whose blue excess `b - (r + g) / 2` exceeds
/// `min_excess`, reported for the first query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlueHighlightDetector {
    pub min_excess: f64,
    pub score: f64,
}

impl Default for BlueHighlightDetector {
    fn default() -> Self {
        BlueHighlightDetector {
            min_excess: 80.0,
            score: 0.5,
        }
    }
}

impl DetectorProvider for BlueHighlightDetector {
    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities::new("mock-blue-highlight", true)
    }

    fn detect(&self, image: &Frame, queries: &[String], threshold: f64) -> ProviderResult<Vec<Detection>> {
        if queries.is_empty() {
            return Err(ProviderError::new(ProviderErrorKind::Rejected, "no queries"));
        }
        let (w, h) = image.dims();
        let blue = BinaryMask::from_fn(w, h, |x, y| {
            let [r, g, b] = image.pixel(x, y);
            b as f64 - (r as f64 + g as f64) / 2.0 > self.min_excess
        });
        Ok(largest_component_box(&blue)
            .filter(|_| self.score >= threshold)
            .map(|bbox| Detection {
                bbox,
                score: self.score,
                label_index: POSITIVE_LABEL,
            })
            .into_iter()
            .collect())
    }
}

/// Each frame gets the box of the latest prompt at or before it. Frames before
/// the first prompt stay empty. Indices are playback indices.
pub fn propagate_boxes(width: usize, height: usize, prompts: &PromptTimeline) -> MaskSeries {
    let mut out = MaskSeries::new("", prompts.frame_count());
    let mut current = None;
    let mut next = prompts.prompts().iter().peekable();
    for k in 0..prompts.frame_count() {
        if let Some(p) = next.next_if(|p| p.frame_index == k) {
            current = Some(BinaryMask::from_box(width, height, &p.bbox));
        }
        if let Some(m) = &current {
            out.insert(k, m.clone()).expect("index and dims are in range");
        }
    }
    out
}

/// Segmenter that repeats prompt boxes via [`propagate_boxes`]. The session
/// id encodes the video size, so no state is kept.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoxTracker;

impl SegmenterProvider for BoxTracker {
    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities::new("mock-box-tracker", true)
    }

    fn open_session(&self, video: &VideoSequence) -> ProviderResult<SessionId> {
        let (w, h) = video.dims();
        Ok(SessionId(alloc::format!("boxes-{w}x{h}x{}", video.len())))
    }

    fn track(&self, session: &SessionId, _: Direction, prompts: &PromptTimeline) -> ProviderResult<MaskSeries> {
        let unknown = || ProviderError::new(ProviderErrorKind::UnknownReference, alloc::format!("unknown session {}", session.0));
        let dims: Vec<usize> = session
            .0
            .strip_prefix("boxes-")
            .ok_or_else(unknown)?
            .split('x')
            .map(|v| v.parse().map_err(|_| unknown()))
            .collect::<ProviderResult<_>>()?;
        let [w, h, t] = dims[..] else { return Err(unknown()) };
        if t != prompts.frame_count() {
            return Err(ProviderError::new(ProviderErrorKind::Rejected, "prompt timeline length differs from the video"));
        }
        Ok(propagate_boxes(w, h, prompts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture::TextureSpec;
    use crate::tracking::MaskPrompt;
    use crate::video::BoundingBox;
    use alloc::string::ToString;

    fn textured(shift: i64) -> Frame {
        let t = TextureSpec { seed: 11, cell: 6.0 };
        Frame::from_fn(32, 32, 0, |x, y| {
            let [r, g, b] = t.color((x as i64 - shift) as f64, y as f64);
            [r as u8, g as u8, b as u8]
        })
        .unwrap()
    }

    #[test]
    fn block_match_recovers_interior_shift() {
        let flow = BlockMatchFlow::default().flow(&textured(0), &textured(3)).unwrap();
        for y in 8..24 {
            for x in 8..24 {
                assert_eq!(flow.at(x, y), [3.0, 0.0]);
            }
        }
        let same = BlockMatchFlow::default().flow(&textured(0), &textured(0)).unwrap();
        assert!(same.vectors().iter().all(|&v| v == [0.0, 0.0]));
    }

    #[test]
    fn blue_detector_boxes_the_blob() {
        let f = Frame::from_fn(20, 20, 0, |x, y| {
            if (5..9).contains(&x) && (10..15).contains(&y) { [0, 0, 255] } else { [120, 100, 60] }
        })
        .unwrap();
        let q = ["a".to_string()];
        let d = BlueHighlightDetector::default().detect(&f, &q, 0.1).unwrap();
        assert_eq!(d[0].bbox, BoundingBox::new(5.0, 10.0, 9.0, 15.0).unwrap());
        assert!(BlueHighlightDetector::default().detect(&f, &q, 0.9).unwrap().is_empty());
        assert!(BlueHighlightDetector::default().detect(&textured(0), &q, 0.1).unwrap().is_empty());
    }

    #[test]
    fn boxes_hold_until_the_next_prompt() {
        let a = BoundingBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = BoundingBox::new(4.0, 4.0, 6.0, 6.0).unwrap();
        let tl = PromptTimeline::new(
            6,
            alloc::vec![
                MaskPrompt { frame_index: 1, bbox: a, point: None },
                MaskPrompt { frame_index: 4, bbox: b, point: None },
            ],
        )
        .unwrap();
        let s = propagate_boxes(8, 8, &tl);
        assert_eq!(s.indices().collect::<Vec<_>>(), [1, 2, 3, 4, 5]);
        assert_eq!(s.get(3).unwrap(), &BinaryMask::from_box(8, 8, &a));
        assert_eq!(s.get(5).unwrap(), &BinaryMask::from_box(8, 8, &b));
    }

    #[test]
    fn box_tracker_round_trips_through_the_session_id() {
        let f = Frame::filled(8, 8, [0, 0, 0], 0).unwrap();
        let seq = VideoSequence::new("v", alloc::vec![f.clone(), f.clone(), f]).unwrap();
        let a = BoundingBox::new(1.0, 1.0, 3.0, 3.0).unwrap();
        let tl = PromptTimeline::new(3, alloc::vec![MaskPrompt { frame_index: 0, bbox: a, point: None }]).unwrap();
        let out = crate::tracking::track_video(&BoxTracker, &seq, &tl, crate::tracking::TrackMode::Bidirectional).unwrap();
        assert_eq!(out.len(), 3);
        let bad = SessionId("boxes-8x8".to_string());
        assert_eq!(BoxTracker.track(&bad, Direction::Forward, &tl).unwrap_err().kind, ProviderErrorKind::UnknownReference);
    }
}
