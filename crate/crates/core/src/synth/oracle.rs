use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::SyntheticVideo;
use super::texture::{mix, unit};
use crate::detection::{Detection, POSITIVE_LABEL};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::provider::{
    DetectorProvider, FlowProvider, ProviderCapabilities, ProviderError, ProviderErrorKind,
    ProviderResult, SegmenterProvider, SessionId,
};
use crate::tracking::{Direction, MaskPrompt, PromptTimeline};
use crate::video::{BinaryMask, BoundingBox, Frame, MaskSeries, VideoSequence};

/// The oracle detector only fires when the received image carries at least
/// this much extra blue inside the object box, relative to the rest of the
/// frame, as a fraction of 255.
pub const MIN_HIGHLIGHT_CONTRAST: f64 = 0.15;

/// A prompt hits the object if its box holds at least this share of the
/// ground-truth pixels.
pub const HIT_COVERAGE: f64 = 0.5;

const SALT_MISS: u64 = 0x4D15;
const SALT_JITTER: u64 = 0x1177;
const SALT_FLOW: u64 = 0xF10E;

/// Degradation controls for the oracle providers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleKnobs {
    /// Probability that the detector skips a frame.
    pub miss_rate: f64,
    /// Maximum per-coordinate box offset in pixels.
    pub jitter: f64,
    pub planted_score: f64,
    /// Score of the detections on distractor rectangles.
    pub distractor_score: f64,
    /// Tracker mask offset in pixels per frame away from the prompt.
    pub drift: f64,
    pub flow_noise: f64,
    pub seed: u64,
    /// When set, the detector fires on these frames only.
    pub fire_frames: Option<Vec<usize>>,
}

impl Default for OracleKnobs {
    fn default() -> Self {
        OracleKnobs {
            miss_rate: 0.0,
            jitter: 0.0,
            planted_score: 0.5,
            distractor_score: 0.6,
            drift: 0.0,
            flow_noise: 0.0,
            seed: 0,
            fire_frames: None,
        }
    }
}

impl OracleKnobs {
    /// Misses 80% of frames and jitters boxes by up to 2 px.
    pub fn degraded() -> Self {
        OracleKnobs {
            miss_rate: 0.8,
            jitter: 2.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit_range = |v: f64| (0.0..=1.0).contains(&v);
        let non_negative = |v: f64| v >= 0.0 && v.is_finite();
        if !unit_range(self.miss_rate) {
            return Err(Error::invalid("oracle.miss_rate", "must lie in [0, 1]"));
        }
        if !unit_range(self.planted_score) || !unit_range(self.distractor_score) {
            return Err(Error::invalid("oracle score", "must lie in [0, 1]"));
        }
        if !non_negative(self.jitter) || !non_negative(self.drift) || !non_negative(self.flow_noise) {
            return Err(Error::invalid(
                "oracle knobs",
                "jitter, drift and flow noise must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

fn rejected(msg: impl Into<String>) -> ProviderError {
    ProviderError::new(ProviderErrorKind::Rejected, msg)
}

fn check_frame(video: &SyntheticVideo, frame: &Frame) -> ProviderResult<()> {
    if frame.dims() != video.video.dims() {
        return Err(rejected(format!(
            "frame is {:?}, scene is {:?}",
            frame.dims(),
            video.video.dims()
        )));
    }
    if frame.index >= video.video.len() {
        return Err(rejected(format!("frame index {} outside the scene", frame.index)));
    }
    Ok(())
}

/// Exact scene flow plus optional Gaussian noise.
///
/// Frames are identified by their index, so only consecutive pairs from the
/// scripted video (and identical frames) are accepted.
#[derive(Debug, Clone)]
pub struct OracleFlow {
    video: Arc<SyntheticVideo>,
    knobs: OracleKnobs,
}

impl OracleFlow {
    pub fn new(video: Arc<SyntheticVideo>, knobs: OracleKnobs) -> Self {
        OracleFlow { video, knobs }
    }
}

impl FlowProvider for OracleFlow {
    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities::new("oracle-flow", true)
    }

    fn compute(&self, prev: &Frame, curr: &Frame) -> ProviderResult<FlowField> {
        check_frame(&self.video, prev)?;
        check_frame(&self.video, curr)?;
        let (w, h) = prev.dims();
        if prev.index == curr.index {
            return Ok(FlowField::zeros(w, h));
        }
        if curr.index != prev.index + 1 {
            return Err(rejected(format!(
                "oracle flow needs consecutive frames, got {} -> {}",
                prev.index, curr.index
            )));
        }
        let exact = &self.video.flows[prev.index];
        if self.knobs.flow_noise == 0.0 {
            return Ok(exact.clone());
        }
        let normal = Normal::new(0.0, self.knobs.flow_noise)
            .map_err(|_| rejected("invalid flow noise"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[self.knobs.seed, prev.index as u64, SALT_FLOW]));
        exact
            .map(|[dx, dy]| [dx + normal.sample(&mut rng), dy + normal.sample(&mut rng)])
            .map_err(|e| ProviderError::new(ProviderErrorKind::Malformed, format!("{e}")))
    }
}

/// Mean blue excess (`b - (r + g) / 2`) gained over the plain frame inside
/// `bbox` minus the gain outside it, over 255.
pub fn highlight_contrast(image: &Frame, plain: &Frame, bbox: &BoundingBox) -> f64 {
    let (w, h) = image.dims();
    let (x0, y0, x1, y1) = bbox.pixel_range(w, h);
    let excess = |p: [u8; 3]| p[2] as f64 - (p[0] as f64 + p[1] as f64) / 2.0;
    let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let gain = excess(image.pixel(x, y)) - excess(plain.pixel(x, y));
            if (x0..x1).contains(&x) && (y0..y1).contains(&y) {
                si += gain;
                ni += 1;
            } else {
                so += gain;
                no += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    (mean(si, ni) - mean(so, no)) / 255.0
}

/// Returns the (jittered) ground-truth box when the object is highlighted,
/// and every distractor as a negative-query hit.
#[derive(Debug, Clone)]
pub struct OracleDetector {
    video: Arc<SyntheticVideo>,
    knobs: OracleKnobs,
}

impl OracleDetector {
    pub fn new(video: Arc<SyntheticVideo>, knobs: OracleKnobs) -> Self {
        OracleDetector { video, knobs }
    }

    /// Whether the detector is scheduled to skip frame `index`.
    pub fn misses(&self, index: usize) -> bool {
        match &self.knobs.fire_frames {
            Some(frames) => !frames.contains(&index),
            None => unit(mix(&[self.knobs.seed, index as u64, SALT_MISS])) < self.knobs.miss_rate,
        }
    }

    fn jittered(&self, index: usize, bbox: BoundingBox) -> BoundingBox {
        let j = self.knobs.jitter;
        if j == 0.0 {
            return bbox;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[self.knobs.seed, index as u64, SALT_JITTER]));
        let mut d = || rng.gen_range(-j..=j);
        let (w, h) = self.video.video.dims();
        BoundingBox::new(bbox.x0 + d(), bbox.y0 + d(), bbox.x1 + d(), bbox.y1 + d())
            .ok()
            .and_then(|b| b.clipped(w, h))
            .unwrap_or(bbox)
    }
}

impl DetectorProvider for OracleDetector {
    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities::new("oracle-detector", true)
    }

    fn detect(&self, image: &Frame, queries: &[String], threshold: f64) -> ProviderResult<Vec<Detection>> {
        if queries.is_empty() {
            return Err(rejected("no queries"));
        }
        check_frame(&self.video, image)?;
        let i = image.index;
        let mut out = Vec::new();
        let truth = self.video.truth.boxes[&i];
        let plain = &self.video.video.frames()[i];
        if !self.misses(i) && highlight_contrast(image, plain, &truth) >= MIN_HIGHLIGHT_CONTRAST {
            out.push(Detection {
                bbox: self.jittered(i, truth),
                score: self.knobs.planted_score,
                label_index: POSITIVE_LABEL,
            });
        }
        let label = queries.len() - 1;
        out.extend(self.video.script.distractor_boxes(i).into_iter().map(|bbox| Detection {
            bbox,
            score: self.knobs.distractor_score,
            label_index: label,
        }));
        out.retain(|d| d.score >= threshold);
        Ok(out)
    }
}

/// Ground-truth masks from every prompt that hits the object, drifting away
/// with distance from the prompt; prompts that miss yield their own box.
#[derive(Debug, Clone)]
pub struct OracleTracker {
    video: Arc<SyntheticVideo>,
    knobs: OracleKnobs,
    session: SessionId,
}

impl OracleTracker {
    pub fn new(video: Arc<SyntheticVideo>, knobs: OracleKnobs) -> Self {
        let digest = video
            .video
            .frames()
            .iter()
            .fold(mix(&[video.seed, video.video.len() as u64]), |h, f| {
                f.pixels()
                    .chunks(64)
                    .fold(h, |h, c| mix(&[h, c.iter().fold(0u64, |a, &b| a.rotate_left(5) ^ b as u64)]))
            });
        OracleTracker {
            video,
            knobs,
            session: SessionId(format!("oracle-{digest:016x}")),
        }
    }

    fn hits(&self, prompt: &MaskPrompt, original: usize) -> bool {
        let mask = &self.video.truth.masks[&original];
        let (w, h) = mask.dims();
        let (x0, y0, x1, y1) = prompt.bbox.pixel_range(w, h);
        let covered = (y0..y1)
            .flat_map(|y| (x0..x1).map(move |x| (x, y)))
            .filter(|&(x, y)| mask.get(x, y))
            .count();
        let on_mask = prompt.point.is_some_and(|(px, py)| {
            let (x, y) = (libm::round(px), libm::round(py));
            x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize)
        });
        covered as f64 >= HIT_COVERAGE * mask.count() as f64 || on_mask
    }
}

impl SegmenterProvider for OracleTracker {
    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities::new("oracle-tracker", true)
    }

    fn open_session(&self, video: &VideoSequence) -> ProviderResult<SessionId> {
        if video.dims() != self.video.video.dims() || video.len() != self.video.video.len() {
            return Err(rejected("video does not match the scene"));
        }
        Ok(self.session.clone())
    }

    fn track(
        &self,
        session: &SessionId,
        direction: Direction,
        prompts: &PromptTimeline,
    ) -> ProviderResult<MaskSeries> {
        if *session != self.session {
            return Err(ProviderError::new(
                ProviderErrorKind::UnknownReference,
                format!("unknown session {}", session.0),
            ));
        }
        let t = self.video.video.len();
        if prompts.frame_count() != t {
            return Err(rejected("prompt timeline length differs from the video"));
        }
        let (w, h) = self.video.video.dims();
        let original = |k: usize| match direction {
            Direction::Forward => k,
            Direction::Backward => t - 1 - k,
        };
        let mut out = MaskSeries::new(self.video.video.source_id.clone(), t);
        let mut current: Option<(&MaskPrompt, bool)> = None;
        let mut next = prompts.prompts().iter().peekable();
        for k in 0..t {
            if let Some(p) = next.next_if(|p| p.frame_index == k) {
                current = Some((p, self.hits(p, original(k))));
            }
            let Some((p, hit)) = current else { continue };
            let mask = if hit {
                let shift = libm::round(self.knobs.drift * (k - p.frame_index) as f64) as i64;
                self.video.truth.masks[&original(k)].shifted(shift, 0)
            } else {
                BinaryMask::from_box(w, h, &p.bbox)
            };
            out.insert(k, mask).expect("index and dims are in range");
        }
        Ok(out)
    }
}

/// The three oracle providers for one synthetic video.
pub fn oracle_providers(
    video: SyntheticVideo,
    knobs: &OracleKnobs,
) -> Result<(OracleFlow, OracleDetector, OracleTracker)> {
    knobs.validate()?;
    let v = Arc::new(video);
    Ok((
        OracleFlow::new(v.clone(), knobs.clone()),
        OracleDetector::new(v.clone(), knobs.clone()),
        OracleTracker::new(v, knobs.clone()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cues::{blend_highlight, IntensityMap};
    use crate::detection::NEGATIVE_PROMPTS;
    use crate::synth::{generate, SceneScript};
    use crate::tracking::{propagate, track_video, TrackMode};
    use alloc::string::ToString;
    use alloc::vec;

    fn scene() -> SyntheticVideo {
        generate(&SceneScript::standard(0, 64, 64, 8), 0).unwrap()
    }

    fn queries() -> Vec<String> {
        let mut q = vec!["thing".to_string()];
        q.extend(NEGATIVE_PROMPTS.iter().map(|s| s.to_string()));
        q
    }

    fn highlighted(v: &SyntheticVideo, i: usize) -> Frame {
        let mask = &v.truth.masks[&i];
        let (w, h) = mask.dims();
        let im = IntensityMap::new(w, h, mask.bits().iter().map(|&b| if b { 255.0 } else { 0.0 }).collect()).unwrap();
        blend_highlight(&v.video.frames()[i], &im, [0, 0, 255]).unwrap().frame
    }

    #[test]
    fn flow_identity_and_consecutive() {
        let v = scene();
        let (flow, _, _) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        let f = v.video.frames();
        assert!(flow.compute(&f[2], &f[2]).unwrap().vectors().iter().all(|&d| d == [0.0, 0.0]));
        assert_eq!(flow.compute(&f[2], &f[3]).unwrap(), v.flows[2]);
        assert_eq!(flow.compute(&f[3], &f[2]).unwrap_err().kind, ProviderErrorKind::Rejected);
    }

    #[test]
    fn flow_noise_is_seeded() {
        let v = scene();
        let knobs = OracleKnobs { flow_noise: 0.5, ..Default::default() };
        let (a, _, _) = oracle_providers(v.clone(), &knobs).unwrap();
        let (b, _, _) = oracle_providers(v.clone(), &knobs).unwrap();
        let f = v.video.frames();
        let fa = a.compute(&f[0], &f[1]).unwrap();
        assert_eq!(fa, b.compute(&f[0], &f[1]).unwrap());
        assert_ne!(fa, v.flows[0]);
    }

    #[test]
    fn detector_needs_a_highlight() {
        let v = scene();
        let (_, det, _) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        let plain = det.detect(&v.video.frames()[3], &queries(), 0.1).unwrap();
        assert!(plain.iter().all(|d| d.label_index != POSITIVE_LABEL));
        let lit = det.detect(&highlighted(&v, 3), &queries(), 0.1).unwrap();
        let pos: Vec<_> = lit.iter().filter(|d| d.label_index == POSITIVE_LABEL).collect();
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0].bbox, v.truth.boxes[&3]);
        assert_eq!(pos[0].score, 0.5);
    }

    #[test]
    fn distractors_use_the_last_query() {
        let v = scene();
        assert!(!v.script.distractor_boxes(0).is_empty());
        let (_, det, _) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        let d = det.detect(&v.video.frames()[0], &queries(), 0.1).unwrap();
        assert!(d.iter().any(|d| d.label_index == 3 && d.score == 0.6));
        let only_pos = det.detect(&v.video.frames()[0], &["thing".to_string()], 0.1).unwrap();
        assert!(only_pos.iter().all(|d| d.label_index == 0));
    }

    #[test]
    fn threshold_above_scores_is_empty() {
        let v = scene();
        let (_, det, _) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        assert!(det.detect(&highlighted(&v, 1), &queries(), 1.0).unwrap().is_empty());
    }

    #[test]
    fn full_miss_rate_never_fires() {
        let v = scene();
        let knobs = OracleKnobs { miss_rate: 1.0, ..Default::default() };
        let (_, det, _) = oracle_providers(v.clone(), &knobs).unwrap();
        for i in 0..v.video.len() {
            let d = det.detect(&highlighted(&v, i), &queries(), 0.01).unwrap();
            assert!(d.iter().all(|d| d.label_index != POSITIVE_LABEL));
        }
    }

    #[test]
    fn misses_are_seeded() {
        let v = scene();
        let knobs = OracleKnobs { miss_rate: 0.5, seed: 4, ..Default::default() };
        let (_, a, _) = oracle_providers(v.clone(), &knobs).unwrap();
        let (_, b, _) = oracle_providers(v.clone(), &knobs).unwrap();
        let pattern: Vec<bool> = (0..200).map(|i| a.misses(i)).collect();
        assert_eq!(pattern, (0..200).map(|i| b.misses(i)).collect::<Vec<_>>());
        let rate = pattern.iter().filter(|&&m| m).count() as f64 / 200.0;
        assert!((rate - 0.5).abs() < 0.12);
    }

    #[test]
    fn jitter_stays_within_bounds() {
        let v = scene();
        let knobs = OracleKnobs { jitter: 2.0, ..Default::default() };
        let (_, det, _) = oracle_providers(v.clone(), &knobs).unwrap();
        for i in 0..v.video.len() {
            let d = det.detect(&highlighted(&v, i), &queries(), 0.1).unwrap();
            let b = d.iter().find(|d| d.label_index == 0).unwrap().bbox;
            let t = v.truth.boxes[&i];
            for (a, e) in b.as_array().iter().zip(t.as_array()) {
                assert!((a - e).abs() <= 2.0 + 1e-12);
            }
        }
    }

    fn prompt_at(v: &SyntheticVideo, i: usize) -> PromptTimeline {
        PromptTimeline::new(
            v.video.len(),
            vec![MaskPrompt { frame_index: i, bbox: v.truth.boxes[&i], point: None }],
        )
        .unwrap()
    }

    #[test]
    fn tracker_from_frame_zero_returns_all_masks() {
        let v = scene();
        let (_, _, tr) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        let out = propagate(&tr, &v.video, &prompt_at(&v, 0), Direction::Forward).unwrap();
        assert_eq!(out.len(), v.video.len());
        for (i, m) in out.iter() {
            assert_eq!(m, &v.truth.masks[&i]);
        }
    }

    #[test]
    fn tracker_reachability() {
        let v = scene();
        let last = v.video.len() - 1;
        let (_, _, tr) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        let tl = prompt_at(&v, last);
        assert_eq!(track_video(&tr, &v.video, &tl, TrackMode::Forward).unwrap().len(), 1);
        let both = track_video(&tr, &v.video, &tl, TrackMode::Bidirectional).unwrap();
        assert_eq!(both.len(), v.video.len());
        for (i, m) in both.iter() {
            assert_eq!(m, &v.truth.masks[&i]);
        }
    }

    #[test]
    fn tracker_drifts_with_distance() {
        let v = scene();
        let knobs = OracleKnobs { drift: 1.0, ..Default::default() };
        let (_, _, tr) = oracle_providers(v.clone(), &knobs).unwrap();
        let out = propagate(&tr, &v.video, &prompt_at(&v, 0), Direction::Forward).unwrap();
        assert_eq!(out.get(0), v.truth.masks.get(&0));
        assert_eq!(out.get(3).unwrap(), &v.truth.masks[&3].shifted(3, 0));
    }

    #[test]
    fn missing_prompt_yields_its_box() {
        let v = scene();
        let (_, _, tr) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        let off = BoundingBox::new(0.0, 0.0, 3.0, 3.0).unwrap();
        let tl = PromptTimeline::new(v.video.len(), vec![MaskPrompt { frame_index: 2, bbox: off, point: None }]).unwrap();
        let out = propagate(&tr, &v.video, &tl, Direction::Forward).unwrap();
        assert_eq!(out.get(5).unwrap(), &BinaryMask::from_box(64, 64, &off));
    }

    #[test]
    fn stale_session_is_unknown() {
        let v = scene();
        let (_, _, tr) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        let err = tr
            .track(&SessionId("nope".to_string()), Direction::Forward, &prompt_at(&v, 0))
            .unwrap_err();
        assert_eq!(err.kind, ProviderErrorKind::UnknownReference);
        assert_eq!(tr.open_session(&v.video).unwrap(), tr.open_session(&v.video).unwrap());
    }

    #[test]
    fn knobs_validate_ranges() {
        assert!(OracleKnobs { miss_rate: 1.5, ..Default::default() }.validate().is_err());
        assert!(OracleKnobs { jitter: -1.0, ..Default::default() }.validate().is_err());
        assert!(OracleKnobs::degraded().validate().is_ok());
    }
}
