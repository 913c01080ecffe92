use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FrameScore, OverlapCounts};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Iou,
    Dice,
    Mae,
    SMeasure,
    EMeasure,
    WeightedF,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Iou,
        Metric::Dice,
        Metric::Mae,
        Metric::SMeasure,
        Metric::EMeasure,
        Metric::WeightedF,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Iou => "iou",
            Metric::Dice => "dice",
            Metric::Mae => "mae",
            Metric::SMeasure => "s_measure",
            Metric::EMeasure => "e_measure",
            Metric::WeightedF => "weighted_f",
        }
    }

    /// Only overlap metrics can be computed on concatenated frames.
    pub fn is_poolable(self) -> bool {
        matches!(self, Metric::Iou | Metric::Dice | Metric::Mae)
    }

    /// MAE is the only metric where lower is better.
    pub fn higher_is_better(self) -> bool {
        self != Metric::Mae
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Mean over videos of the per-video frame mean.
    #[default]
    FrameThenVideo,
    /// Mean over all frames, ignoring video boundaries.
    FramePooled,
    /// Overlap metrics on all frames treated as one concatenated image.
    PixelPooled,
}

impl AggregationMode {
    pub const ALL: [AggregationMode; 3] = [
        AggregationMode::FrameThenVideo,
        AggregationMode::FramePooled,
        AggregationMode::PixelPooled,
    ];
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Dataset-level value of `metric` over per-video frame lists. Videos without
/// frames are skipped.
pub fn aggregate(per_video: &[Vec<FrameScore>], mode: AggregationMode, metric: Metric) -> Result<f64> {
    let no_frames = || Error::invalid("aggregate", "no scored frames");
    match mode {
        AggregationMode::FrameThenVideo => mean(
            per_video
                .iter()
                .filter_map(|v| mean(v.iter().map(|f| f.get(metric)))),
        )
        .ok_or_else(no_frames),
        AggregationMode::FramePooled => {
            mean(per_video.iter().flatten().map(|f| f.get(metric))).ok_or_else(no_frames)
        }
        AggregationMode::PixelPooled => {
            if !metric.is_poolable() {
                return Err(Error::UnsupportedAggregation(format!(
                    "{} cannot be pixel-pooled",
                    metric.name()
                )));
            }
            if per_video.iter().all(Vec::is_empty) {
                return Err(no_frames());
            }
            let c = per_video
                .iter()
                .flatten()
                .fold(OverlapCounts::default(), |acc, f| acc + f.counts);
            Ok(match metric {
                Metric::Iou => c.iou(),
                Metric::Dice => c.dice(),
                _ => c.mae(),
            })
        }
    }
}

/// Every metric under one mode; non-poolable metrics are `None` when pooling
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregates {
    pub iou: f64,
    pub dice: f64,
    pub mae: f64,
    pub s_measure: Option<f64>,
    pub e_measure: Option<f64>,
    pub weighted_f: Option<f64>,
}

impl Aggregates {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Iou => Some(self.iou),
            Metric::Dice => Some(self.dice),
            Metric::Mae => Some(self.mae),
            Metric::SMeasure => self.s_measure,
            Metric::EMeasure => self.e_measure,
            Metric::WeightedF => self.weighted_f,
        }
    }
}

pub fn aggregate_all(per_video: &[Vec<FrameScore>], mode: AggregationMode) -> Result<Aggregates> {
    let opt = |m| match aggregate(per_video, mode, m) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UnsupportedAggregation(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(Aggregates {
        iou: aggregate(per_video, mode, Metric::Iou)?,
        dice: aggregate(per_video, mode, Metric::Dice)?,
        mae: aggregate(per_video, mode, Metric::Mae)?,
        s_measure: opt(Metric::SMeasure)?,
        e_measure: opt(Metric::EMeasure)?,
        weighted_f: opt(Metric::WeightedF)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::frame_scores;
    use crate::video::BinaryMask;
    use alloc::vec;
    use proptest::prelude::*;

    fn with_counts(intersection: u64, union: u64) -> FrameScore {
        let counts = OverlapCounts {
            intersection,
            union,
            pred: union,
            gt: intersection.max(1),
            pixels: 100,
        };
        FrameScore {
            iou: counts.iou(),
            dice: counts.dice(),
            mae: counts.mae(),
            s_measure: 0.5,
            e_measure: 0.5,
            weighted_f: 0.5,
            counts,
        }
    }

    fn iou_only(v: f64) -> FrameScore {
        FrameScore {
            iou: v,
            ..with_counts(1, 1)
        }
    }

    #[test]
    fn video_vs_frame_weighting() {
        let data = vec![vec![iou_only(1.0)], vec![iou_only(0.0), iou_only(0.0)]];
        assert_eq!(aggregate(&data, AggregationMode::FrameThenVideo, Metric::Iou).unwrap(), 0.5);
        let pooled = aggregate(&data, AggregationMode::FramePooled, Metric::Iou).unwrap();
        assert!((pooled - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pixel_pooling_divergence() {
        let data = vec![vec![with_counts(1, 1), with_counts(0, 9)]];
        assert_eq!(aggregate(&data, AggregationMode::FrameThenVideo, Metric::Iou).unwrap(), 0.5);
        assert_eq!(aggregate(&data, AggregationMode::PixelPooled, Metric::Iou).unwrap(), 0.1);
    }

    #[test]
    fn pixel_pooling_rejects_structure_metrics() {
        let data = vec![vec![with_counts(1, 1)]];
        for m in [Metric::SMeasure, Metric::EMeasure, Metric::WeightedF] {
            assert!(matches!(
                aggregate(&data, AggregationMode::PixelPooled, m),
                Err(Error::UnsupportedAggregation(_))
            ));
        }
        let all = aggregate_all(&data, AggregationMode::PixelPooled).unwrap();
        assert_eq!(all.s_measure, None);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(aggregate(&[], AggregationMode::FramePooled, Metric::Iou).is_err());
        assert!(aggregate(&[vec![]], AggregationMode::PixelPooled, Metric::Iou).is_err());
    }

    proptest! {
        #[test]
        fn single_frame_modes_coincide(
            a in proptest::collection::vec(any::<bool>(), 30),
            b in proptest::collection::vec(any::<bool>(), 30),
        ) {
            let p = BinaryMask::new(6, 5, a).unwrap();
            let g = BinaryMask::new(6, 5, b).unwrap();
            let data = vec![vec![frame_scores(&p, &g).unwrap()]];
            for m in [Metric::Iou, Metric::Dice, Metric::Mae] {
                let v: Vec<f64> = AggregationMode::ALL.iter()
                    .map(|&mode| aggregate(&data, mode, m).unwrap()).collect();
                prop_assert!(v[0] == v[1] && v[1] == v[2]);
            }
        }
    }
}
