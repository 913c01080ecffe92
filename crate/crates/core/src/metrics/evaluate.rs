use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{aggregate_all, frame_scores, largest_component_box, AggregationMode, Aggregates, FrameScore};
use crate::error::{Error, Result};
use crate::video::{BinaryMask, BoundingBox, GroundTruth, MaskSeries};

pub const EMPTY_GT_RULE: &str =
    "empty gt + empty pred scores 1 (MAE 0); empty gt + non-empty pred scores 0 (MAE = pred fraction)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalFlags {
    pub agg_mode: AggregationMode,
    /// Drop each video's last annotated frame.
    pub omit_last_frame: bool,
    pub bin_threshold: f64,
    pub dsr_tau: f64,
}

impl Default for EvalFlags {
    fn default() -> Self {
        EvalFlags {
            agg_mode: AggregationMode::FrameThenVideo,
            omit_last_frame: false,
            bin_threshold: 0.5,
            dsr_tau: 0.5,
        }
    }
}

impl EvalFlags {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_threshold > 0.0 && self.bin_threshold < 1.0) {
            return Err(Error::invalid("metrics.bin_threshold", "must lie in (0, 1)"));
        }
        if !(self.dsr_tau > 0.0 && self.dsr_tau <= 1.0) {
            return Err(Error::invalid("metrics.dsr_tau", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Fraction of frames whose predicted box reaches IoU `tau` with the ground
/// truth box; a missing prediction is a failure.
pub fn detection_success_rate(pairs: &[(Option<BoundingBox>, BoundingBox)], tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid("tau", "must lie in (0, 1]"));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("detection success rate", "no annotated frames"));
    }
    let hits = pairs
        .iter()
        .filter(|(p, g)| p.is_some_and(|p| p.iou(g) >= tau))
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameEntry {
    pub frame: usize,
    pub score: FrameScore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoEval {
    pub video_id: String,
    pub frames: Vec<FrameEntry>,
    /// Frame means for this video; `None` without scored frames.
    pub mean: Option<Aggregates>,
    pub success_rate: Option<f64>,
    #[serde(skip)]
    pub box_pairs: Vec<(Option<BoundingBox>, BoundingBox)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeAggregates {
    pub frame_then_video: Aggregates,
    pub frame_pooled: Aggregates,
    pub pixel_pooled: Aggregates,
}

impl ModeAggregates {
    pub fn get(&self, mode: AggregationMode) -> &Aggregates {
        match mode {
            AggregationMode::FrameThenVideo => &self.frame_then_video,
            AggregationMode::FramePooled => &self.frame_pooled,
            AggregationMode::PixelPooled => &self.pixel_pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: AggregationMode,
    pub flags: EvalFlags,
    pub empty_gt_rule: String,
    pub videos: Vec<VideoEval>,
    /// All three modes side by side; `None` when no frame carries a mask.
    pub aggregates: Option<ModeAggregates>,
    /// Success rate over all box-annotated frames.
    pub success_rate: Option<f64>,
}

impl EvalReport {
    /// Aggregates under the declared mode.
    pub fn headline(&self) -> Option<&Aggregates> {
        self.aggregates.as_ref().map(|a| a.get(self.mode))
    }

    /// Combine per-video results, sorted by video id.
    pub fn from_videos(mut videos: Vec<VideoEval>, flags: EvalFlags) -> Result<EvalReport> {
        videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        let per_video: Vec<Vec<FrameScore>> = videos
            .iter()
            .map(|v| v.frames.iter().map(|f| f.score).collect())
            .collect();
        let aggregates = if per_video.iter().all(Vec::is_empty) {
            None
        } else {
            Some(ModeAggregates {
                frame_then_video: aggregate_all(&per_video, AggregationMode::FrameThenVideo)?,
                frame_pooled: aggregate_all(&per_video, AggregationMode::FramePooled)?,
                pixel_pooled: aggregate_all(&per_video, AggregationMode::PixelPooled)?,
            })
        };
        let pairs: Vec<_> = videos.iter().flat_map(|v| v.box_pairs.iter().copied()).collect();
        let success_rate = if pairs.is_empty() {
            None
        } else {
            Some(detection_success_rate(&pairs, flags.dsr_tau)?)
        };
        Ok(EvalReport {
            mode: flags.agg_mode,
            flags,
            empty_gt_rule: EMPTY_GT_RULE.to_string(),
            videos,
            aggregates,
            success_rate,
        })
    }
}

/// Score one video on its annotated frames. A missing prediction series is
/// scored as empty masks and noted in `warnings`.
pub fn evaluate_video(
    video_id: &str,
    pred: Option<&MaskSeries>,
    gt: &GroundTruth,
    flags: &EvalFlags,
) -> Result<VideoEval> {
    flags.validate()?;
    if gt.is_empty() {
        return Err(Error::invalid(
            "ground truth",
            format!("video {video_id} has no annotated frames"),
        ));
    }
    let mut warnings = Vec::new();
    if pred.is_none() {
        warnings.push(format!("no prediction for {video_id}; scored as empty masks"));
    }
    let last = if flags.omit_last_frame {
        gt.annotated_frames().last().copied()
    } else {
        None
    };
    let keep = |i: &usize| Some(*i) != last;
    let pred_mask = |i: usize, (w, h): (usize, usize)| -> BinaryMask {
        pred.and_then(|p| p.get(i)).cloned().unwrap_or_else(|| BinaryMask::empty(w, h))
    };

    let mut frames = Vec::new();
    for (&i, g) in gt.masks.iter().filter(|(i, _)| keep(i)) {
        let p = pred_mask(i, g.dims());
        frames.push(FrameEntry {
            frame: i,
            score: frame_scores(&p, g)?,
        });
    }

    let mut box_pairs = Vec::new();
    for i in gt.annotated_frames().into_iter().filter(keep) {
        let gt_box = gt
            .boxes
            .get(&i)
            .copied()
            .or_else(|| gt.masks.get(&i).and_then(BinaryMask::bounding_box));
        let Some(gt_box) = gt_box else { continue };
        let pred_box = pred.and_then(|p| p.get(i)).and_then(largest_component_box);
        box_pairs.push((pred_box, gt_box));
    }

    let scores: Vec<FrameScore> = frames.iter().map(|f| f.score).collect();
    let mean = if scores.is_empty() {
        None
    } else {
        Some(aggregate_all(&[scores], AggregationMode::FramePooled)?)
    };
    let success_rate = if box_pairs.is_empty() {
        None
    } else {
        Some(detection_success_rate(&box_pairs, flags.dsr_tau)?)
    };
    Ok(VideoEval {
        video_id: video_id.to_string(),
        frames,
        mean,
        success_rate,
        box_pairs,
        warnings,
    })
}

/// Evaluate every ground-truth video in id order.
pub fn evaluate_dataset(
    preds: &BTreeMap<String, MaskSeries>,
    gts: &BTreeMap<String, GroundTruth>,
    flags: &EvalFlags,
) -> Result<EvalReport> {
    if let Some(extra) = preds.keys().find(|k| !gts.contains_key(*k)) {
        return Err(Error::invalid(
            "predictions",
            format!("video {extra} has no ground truth"),
        ));
    }
    let videos = gts
        .iter()
        .map(|(id, gt)| evaluate_video(id, preds.get(id), gt, flags))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_videos(videos, *flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Metric;
    use proptest::prelude::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn gt_video(frames: &[usize]) -> GroundTruth {
        let mut gt = GroundTruth::default();
        for &i in frames {
            gt.masks.insert(i, BinaryMask::from_fn(8, 8, |x, y| (2..6).contains(&x) && (2..5).contains(&y)));
        }
        gt
    }

    fn perfect(id: &str, gt: &GroundTruth) -> MaskSeries {
        let mut s = MaskSeries::new(id, 20);
        for (&i, m) in &gt.masks {
            s.insert(i, m.clone()).unwrap();
        }
        s
    }

    #[test]
    fn sr_examples() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(detection_success_rate(&[(Some(g), g); 4], 0.5).unwrap(), 1.0);
        assert_eq!(detection_success_rate(&[(None, g); 4], 0.5).unwrap(), 0.0);
        // shift by 2.5 -> IoU 75/125 = 0.6; shift by 4.2857.. -> IoU 0.4
        let s6 = g.translated(2.5, 0.0);
        let d = 10.0 * (1.0 - 0.4) / 1.4;
        let s4 = g.translated(d, 0.0);
        assert!((s6.iou(&g) - 0.6).abs() < 1e-12 && (s4.iou(&g) - 0.4).abs() < 1e-12);
        let pairs = [(Some(s6), g), (Some(s6), g), (Some(s4), g), (Some(s4), g)];
        assert_eq!(detection_success_rate(&pairs, 0.5).unwrap(), 0.5);
        assert!(detection_success_rate(&[], 0.5).is_err());
    }

    #[test]
    fn perfect_two_video_dataset() {
        let ga = gt_video(&[0, 5, 10]);
        let gb = gt_video(&[0, 5]);
        let gts = BTreeMap::from([("a".to_string(), ga.clone()), ("b".to_string(), gb.clone())]);
        let preds = BTreeMap::from([("a".to_string(), perfect("a", &ga)), ("b".to_string(), perfect("b", &gb))]);
        let r = evaluate_dataset(&preds, &gts, &EvalFlags::default()).unwrap();
        let agg = r.aggregates.unwrap();
        for mode in AggregationMode::ALL {
            let a = agg.get(mode);
            for m in Metric::ALL {
                if let Some(v) = a.get(m) {
                    let want = if m == Metric::Mae { 0.0 } else { 1.0 };
                    assert!((v - want).abs() < 1e-12, "{mode:?} {m:?} {v}");
                }
            }
        }
        assert_eq!(r.success_rate, Some(1.0));
    }

    #[test]
    fn missing_prediction_scores_zero_with_warning() {
        let gts = BTreeMap::from([("a".to_string(), gt_video(&[0, 5]))]);
        let r = evaluate_dataset(&BTreeMap::new(), &gts, &EvalFlags::default()).unwrap();
        assert_eq!(r.headline().unwrap().iou, 0.0);
        assert_eq!(r.videos[0].warnings.len(), 1);
        assert_eq!(r.success_rate, Some(0.0));
    }

    #[test]
    fn omit_last_frame_changes_the_score() {
        let g = gt_video(&[0, 5, 10]);
        let mut p = perfect("a", &g);
        p.insert(10, BinaryMask::empty(8, 8)).unwrap();
        let gts = BTreeMap::from([("a".to_string(), g)]);
        let preds = BTreeMap::from([("a".to_string(), p)]);
        let with = evaluate_dataset(&preds, &gts, &EvalFlags::default()).unwrap();
        assert!((with.headline().unwrap().iou - 2.0 / 3.0).abs() < 1e-12);
        let flags = EvalFlags {
            omit_last_frame: true,
            ..EvalFlags::default()
        };
        let without = evaluate_dataset(&preds, &gts, &flags).unwrap();
        assert_eq!(without.headline().unwrap().iou, 1.0);
        assert_eq!(without.videos[0].frames.len(), 2);
    }

    #[test]
    fn unknown_prediction_video_is_rejected() {
        let gts = BTreeMap::from([("a".to_string(), gt_video(&[0]))]);
        let preds = BTreeMap::from([("zz".to_string(), MaskSeries::new("zz", 3))]);
        assert!(evaluate_dataset(&preds, &gts, &EvalFlags::default()).is_err());
    }

    /// Boxes are counted frame by frame against a brute-force loop.
    #[test]
    fn sr_matches_brute_force_counting() {
        let mut gt = GroundTruth::default();
        let mut pred = MaskSeries::new("v", 12);
        let mut expected_hits = 0;
        for i in 0..12usize {
            let g = bx(2.0, 2.0, 10.0, 10.0);
            gt.boxes.insert(i, g);
            let shift = i as i64 % 5;
            let m = BinaryMask::from_fn(16, 16, |x, y| {
                (2 + shift..10 + shift).contains(&(x as i64)) && (2..10).contains(&y)
            });
            if i % 4 != 3 {
                let pb = m.bounding_box().unwrap();
                if pb.iou(&g) >= 0.5 {
                    expected_hits += 1;
                }
                pred.insert(i, m).unwrap();
            }
        }
        let gts = BTreeMap::from([("v".to_string(), gt)]);
        let preds = BTreeMap::from([("v".to_string(), pred)]);
        let r = evaluate_dataset(&preds, &gts, &EvalFlags::default()).unwrap();
        assert_eq!(r.success_rate, Some(expected_hits as f64 / 12.0));
        assert!(r.aggregates.is_none());
    }

    proptest! {
        #[test]
        fn sr_is_monotone_in_tau(
            shifts in proptest::collection::vec(proptest::option::of(0.0f64..12.0), 1..20),
            t1 in 0.01f64..1.0, t2 in 0.01f64..1.0,
        ) {
            let g = bx(0.0, 0.0, 10.0, 10.0);
            let pairs: Vec<_> = shifts.iter().map(|s| (s.map(|d| g.translated(d, d / 2.0)), g)).collect();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(detection_success_rate(&pairs, hi).unwrap() <= detection_success_rate(&pairs, lo).unwrap());
        }
    }

    #[test]
    fn flags_are_validated() {
        let bad = EvalFlags {
            dsr_tau: 0.0,
            ..EvalFlags::default()
        };
        let gts = BTreeMap::from([("a".to_string(), gt_video(&[0]))]);
        assert!(evaluate_dataset(&BTreeMap::new(), &gts, &bad).is_err());
    }
}
