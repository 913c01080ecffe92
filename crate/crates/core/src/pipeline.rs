//! The per-video pipeline: route, cues, highlight, detect, prompt, track.
//!
//! Each stage is a separate function so callers can time them or reuse the
//! expensive early stages across a threshold sweep.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::camera::{classify_camera_motion, CameraParams, MotionRoute, Route};
use crate::cues::{
    apply_momentum, bgs_difference, bgs_update, blend_highlight, flow_magnitude, normalize_all,
    subtract_mean_flow, BackgroundModel, BgsParams, FlowEmaState, HighlightedFrame, IntensityMap,
    NormalizeScope, RawMap, DEFAULT_HIGHLIGHT,
};
use crate::detection::{
    build_prompt_set, detect_frame, filter_by_threshold, select_top_box, Detection, PromptConfig,
    PromptSet,
};
use crate::error::{Error, Result};
use crate::metrics::EvalFlags;
use crate::provider::{DetectorProvider, FlowProvider, SegmenterProvider};
use crate::tracking::{assemble_prompts, track_video, PromptMode, TrackMode};
use crate::video::{MaskSeries, VideoSequence};

/// Where the motion intensity comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MotionSource {
    /// No motion cue; frames reach the detector unmodified.
    None,
    /// Optical flow regardless of camera motion.
    Flow,
    /// Optical flow for moving cameras, background subtraction for static ones.
    #[default]
    FlowOrBgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CueConfig {
    pub motion: MotionSource,
    pub mean_subtract: bool,
    pub use_momentum: bool,
    pub momentum: f64,
    pub highlight_color: [u8; 3],
    pub normalize: NormalizeScope,
}

impl Default for CueConfig {
    fn default() -> Self {
        CueConfig {
            motion: MotionSource::FlowOrBgs,
            mean_subtract: true,
            use_momentum: true,
            momentum: 0.9,
            highlight_color: DEFAULT_HIGHLIGHT,
            normalize: NormalizeScope::Frame,
        }
    }
}

/// The VLM threshold sweep 0.03, 0.05, ..., 0.13.
pub const DEFAULT_SWEEP: [f64; 6] = [0.03, 0.05, 0.07, 0.09, 0.11, 0.13];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectConfig {
    pub threshold: f64,
    pub sweep: Vec<f64>,
    pub prompts: PromptConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            threshold: 0.09,
            sweep: DEFAULT_SWEEP.to_vec(),
            prompts: PromptConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    pub mode: TrackMode,
    pub prompt_mode: PromptMode,
}

/// Every knob of the pipeline. The default is the full method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub camera: CameraParams,
    pub cues: CueConfig,
    pub bgs: BgsParams,
    pub detect: DetectConfig,
    pub track: TrackConfig,
    pub metrics: EvalFlags,
}

fn check_threshold(what: &'static str, t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(what, alloc::format!("{t} is outside (0, 1)")))
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.camera.theta_cam_frac > 0.0) {
            return Err(Error::invalid("camera.theta_cam_frac", "must be positive"));
        }
        if self.camera.max_points == 0 {
            return Err(Error::invalid("camera.max_points", "must be positive"));
        }
        if self.cues.use_momentum {
            FlowEmaState::new(self.cues.momentum)?;
        }
        if self.cues.motion == MotionSource::FlowOrBgs {
            self.bgs.validate()?;
        }
        check_threshold("detect.threshold", self.detect.threshold)?;
        for &t in &self.detect.sweep {
            check_threshold("detect.sweep", t)?;
        }
        build_prompt_set(&self.detect.prompts)?;
        self.metrics.validate()
    }

    /// The sweep list, or the single configured threshold when it is empty.
    pub fn thresholds(&self) -> Vec<f64> {
        if self.detect.sweep.is_empty() {
            alloc::vec![self.detect.threshold]
        } else {
            self.detect.sweep.clone()
        }
    }
}

/// The three providers one video run talks to.
#[derive(Clone, Copy)]
pub struct Providers<'a> {
    pub flow: &'a dyn FlowProvider,
    pub detector: &'a dyn DetectorProvider,
    pub segmenter: &'a dyn SegmenterProvider,
}

/// Output of the cue stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Cues {
    /// Camera classification, present when routing was requested.
    pub route: Option<MotionRoute>,
    /// The branch that produced the intensities.
    pub source: Option<Route>,
    pub intensities: Vec<IntensityMap>,
    pub highlighted: Vec<HighlightedFrame>,
}

fn flow_raw_maps<F: FlowProvider + ?Sized>(
    seq: &VideoSequence,
    cues: &CueConfig,
    flow: &F,
) -> Result<Vec<RawMap>> {
    let frames = seq.frames();
    let flows = frames
        .windows(2)
        .map(|p| flow.compute(&p[0], &p[1]).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    for f in &flows {
        Error::check_dims(seq.dims(), f.dims())?;
    }
    let mut state = FlowEmaState::new(if cues.use_momentum { cues.momentum } else { 0.0 })?;
    let mut raw = Vec::with_capacity(frames.len());
    for j in 0..frames.len() {
        // the last frame has no successor and reuses the previous pair
        let f = &flows[j.min(flows.len() - 1)];
        let mut f = if cues.mean_subtract { subtract_mean_flow(f) } else { f.clone() };
        if cues.use_momentum {
            let (next, smoothed) = apply_momentum(&state, &f, j + 1)?;
            state = next;
            f = smoothed;
        }
        raw.push(flow_magnitude(&f));
    }
    Ok(raw)
}

fn bgs_raw_maps(seq: &VideoSequence, params: &BgsParams) -> Result<Vec<RawMap>> {
    let (w, h) = seq.dims();
    let mut model = BackgroundModel::new(w, h, *params)?;
    let mut raw = Vec::with_capacity(seq.len());
    for frame in seq.frames() {
        let (next, bg) = bgs_update(model, frame)?;
        model = next;
        raw.push(bgs_difference(frame, &bg)?);
    }
    Ok(raw)
}

/// Motion intensity per frame and the highlighted frames for detection.
pub fn compute_cues<F: FlowProvider + ?Sized>(
    seq: &VideoSequence,
    config: &PipelineConfig,
    flow: &F,
) -> Result<Cues> {
    let cues = &config.cues;
    let (route, source) = match cues.motion {
        MotionSource::None => (None, None),
        MotionSource::Flow => (None, Some(Route::OpticalFlow)),
        MotionSource::FlowOrBgs => {
            let r = classify_camera_motion(seq, &config.camera)?;
            (Some(r), Some(r.route))
        }
    };
    let (w, h) = seq.dims();
    let intensities = match source {
        None => alloc::vec![IntensityMap::zeros(w, h); seq.len()],
        Some(Route::OpticalFlow) => normalize_all(&flow_raw_maps(seq, cues, flow)?, cues.normalize),
        Some(Route::BackgroundSubtraction) => {
            normalize_all(&bgs_raw_maps(seq, &config.bgs)?, cues.normalize)
        }
    };
    let highlighted = match source {
        None => seq.frames().iter().cloned().map(HighlightedFrame::plain).collect(),
        Some(_) => seq
            .frames()
            .iter()
            .zip(&intensities)
            .map(|(f, im)| blend_highlight(f, im, cues.highlight_color))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(Cues {
        route,
        source,
        intensities,
        highlighted,
    })
}

/// All detections per frame at `threshold`.
pub fn detect_all<D: DetectorProvider + ?Sized>(
    highlighted: &[HighlightedFrame],
    detector: &D,
    prompts: &PromptSet,
    threshold: f64,
) -> Result<Vec<Vec<Detection>>> {
    highlighted
        .iter()
        .map(|f| detect_frame(detector, f, prompts, threshold))
        .collect()
}

/// Result of the prompt and tracking stages at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub threshold: f64,
    /// Best positive box per frame.
    pub boxes: Vec<Option<Detection>>,
    pub masks: MaskSeries,
}

/// Keep detections at `threshold`, prompt the segmenter and track.
pub fn segment_from_detections<S: SegmenterProvider + ?Sized>(
    seq: &VideoSequence,
    detections: &[Vec<Detection>],
    intensities: &[IntensityMap],
    threshold: f64,
    track: &TrackConfig,
    segmenter: &S,
) -> Result<Segmentation> {
    let boxes: Vec<Option<Detection>> = detections
        .iter()
        .map(|d| select_top_box(&filter_by_threshold(d, threshold)))
        .collect();
    let timeline = assemble_prompts(&boxes, intensities, track.prompt_mode)?;
    let masks = track_video(segmenter, seq, &timeline, track.mode)?;
    Ok(Segmentation {
        threshold,
        boxes,
        masks,
    })
}

/// Cue stage output plus one segmentation per threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub cues: Cues,
    pub runs: Vec<Segmentation>,
}

/// Run the pipeline once per threshold, sharing cues and detection.
///
/// Detection runs once at the lowest threshold; higher thresholds filter
/// that result, which matches querying the detector again.
pub fn run_video_sweep(
    seq: &VideoSequence,
    config: &PipelineConfig,
    providers: Providers<'_>,
    thresholds: &[f64],
) -> Result<SweepOutput> {
    let lowest = thresholds
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or_else(|| Error::invalid("detect.sweep", "no thresholds"))?;
    let cues = compute_cues(seq, config, providers.flow)?;
    let prompts = build_prompt_set(&config.detect.prompts)?;
    let detections = detect_all(&cues.highlighted, providers.detector, &prompts, lowest)?;
    let runs = thresholds
        .iter()
        .map(|&t| {
            segment_from_detections(
                seq,
                &detections,
                &cues.intensities,
                t,
                &config.track,
                providers.segmenter,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput { cues, runs })
}

/// Masks for one video at the configured threshold.
pub fn run_video(seq: &VideoSequence, config: &PipelineConfig, providers: Providers<'_>) -> Result<MaskSeries> {
    let mut out = run_video_sweep(seq, config, providers, &[config.detect.threshold])?;
    Ok(out.runs.remove(0).masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{evaluate_video, Metric};
    use crate::synth::{generate, oracle_providers, OracleKnobs, SceneScript, SyntheticVideo};

    fn run(v: &SyntheticVideo, config: &PipelineConfig, knobs: &OracleKnobs) -> MaskSeries {
        let (f, d, s) = oracle_providers(v.clone(), knobs).unwrap();
        run_video(&v.video, config, Providers { flow: &f, detector: &d, segmenter: &s }).unwrap()
    }

    fn miou(v: &SyntheticVideo, masks: &MaskSeries) -> f64 {
        let e = evaluate_video("v", Some(masks), &v.truth, &EvalFlags::default()).unwrap();
        e.mean.unwrap().get(Metric::Iou).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        PipelineConfig::default().validate().unwrap();
        let mut c = PipelineConfig::default();
        c.detect.sweep.push(1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn oracle_chain_is_nearly_lossless() {
        for i in 0..2 {
            let v = generate(&SceneScript::standard(i, 64, 64, 10), 0).unwrap();
            let masks = run(&v, &PipelineConfig::default(), &OracleKnobs::default());
            assert!(miou(&v, &masks) >= 0.95, "video {i}: {}", miou(&v, &masks));
        }
    }

    #[test]
    fn no_cues_means_no_detections() {
        let v = generate(&SceneScript::standard(1, 64, 64, 6), 0).unwrap();
        let mut c = PipelineConfig::default();
        c.cues.motion = MotionSource::None;
        let (f, d, _) = oracle_providers(v.clone(), &OracleKnobs::default()).unwrap();
        let cues = compute_cues(&v.video, &c, &f).unwrap();
        assert!(cues.intensities.iter().all(|m| m.values().iter().all(|&x| x == 0.0)));
        assert_eq!(cues.highlighted[2].frame, v.video.frames()[2]);
        let prompts = build_prompt_set(&c.detect.prompts).unwrap();
        let dets = detect_all(&cues.highlighted, &d, &prompts, 0.05).unwrap();
        assert!(dets.iter().flatten().all(|d| d.label_index != 0));
    }

    #[test]
    fn track_none_masks_only_detected_frames() {
        let v = generate(&SceneScript::standard(0, 64, 64, 8), 0).unwrap();
        let mut c = PipelineConfig::default();
        c.track.mode = TrackMode::None;
        let knobs = OracleKnobs { fire_frames: Some(alloc::vec![2, 5]), ..Default::default() };
        let masks = run(&v, &c, &knobs);
        assert_eq!(masks.indices().collect::<Vec<_>>(), [2, 5]);
    }

    #[test]
    fn last_frame_detection_reachability() {
        let v = generate(&SceneScript::standard(0, 64, 64, 8), 0).unwrap();
        let knobs = OracleKnobs { fire_frames: Some(alloc::vec![7]), ..Default::default() };
        let mut c = PipelineConfig::default();
        c.track.mode = TrackMode::Forward;
        assert_eq!(run(&v, &c, &knobs).len(), 1);
        c.track.mode = TrackMode::Bidirectional;
        assert_eq!(run(&v, &c, &knobs).len(), 8);
    }

    #[test]
    fn sweep_filters_by_threshold() {
        let v = generate(&SceneScript::standard(0, 64, 64, 6), 0).unwrap();
        let knobs = OracleKnobs { planted_score: 0.10, distractor_score: 0.05, ..Default::default() };
        let (f, d, s) = oracle_providers(v.clone(), &knobs).unwrap();
        let out = run_video_sweep(
            &v.video,
            &PipelineConfig::default(),
            Providers { flow: &f, detector: &d, segmenter: &s },
            &DEFAULT_SWEEP,
        )
        .unwrap();
        assert_eq!(out.runs.len(), 6);
        for run in &out.runs {
            if run.threshold > 0.10 {
                assert!(run.masks.is_empty());
            } else {
                assert!(miou(&v, &run.masks) > 0.9);
            }
        }
    }
}
