//! Segmentation and detection metrics with explicit aggregation.
//!
//! Empty ground truth is handled uniformly: an empty prediction scores 1 on
//! every similarity metric (MAE 0), any non-empty prediction scores 0.

mod aggregate;
mod alignment;
mod components;
pub mod edt;
mod evaluate;
mod structure;
mod weighted;

pub use aggregate::{aggregate, aggregate_all, AggregationMode, Aggregates, Metric};
pub use alignment::e_measure;
pub use components::largest_component_box;
pub use evaluate::{
    detection_success_rate, evaluate_dataset, evaluate_video, EvalFlags, EvalReport, FrameEntry,
    ModeAggregates, VideoEval,
    EMPTY_GT_RULE,
};
pub use structure::s_measure;
pub use weighted::weighted_f;

use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::video::BinaryMask;

/// Soft prediction in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SoftMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid("soft map", "buffer length mismatch"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("soft map", "values must lie in [0, 1]"));
        }
        Ok(SoftMap {
            width,
            height,
            values,
        })
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        SoftMap {
            width: mask.width(),
            height: mask.height(),
            values: mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// `value >= threshold`.
pub fn binarize(soft: &SoftMap, threshold: f64) -> Result<BinaryMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid("binarize threshold", "must lie in (0, 1)"));
    }
    BinaryMask::new(
        soft.width,
        soft.height,
        soft.values.iter().map(|&v| v >= threshold).collect(),
    )
}

/// Pixel counts behind the overlap metrics; summing them across frames gives
/// the pixel-pooled variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct OverlapCounts {
    pub intersection: u64,
    pub union: u64,
    pub pred: u64,
    pub gt: u64,
    pub pixels: u64,
}

impl OverlapCounts {
    pub fn of(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        Error::check_dims(gt.dims(), pred.dims())?;
        let mut c = OverlapCounts {
            pixels: gt.bits().len() as u64,
            ..Default::default()
        };
        for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
            c.intersection += (p && g) as u64;
            c.union += (p || g) as u64;
            c.pred += p as u64;
            c.gt += g as u64;
        }
        Ok(c)
    }

    pub fn iou(&self) -> f64 {
        if self.gt == 0 {
            return if self.pred == 0 { 1.0 } else { 0.0 };
        }
        self.intersection as f64 / self.union as f64
    }

    pub fn dice(&self) -> f64 {
        if self.gt == 0 {
            return if self.pred == 0 { 1.0 } else { 0.0 };
        }
        2.0 * self.intersection as f64 / (self.pred + self.gt) as f64
    }

    pub fn mae(&self) -> f64 {
        (self.union - self.intersection) as f64 / self.pixels as f64
    }
}

impl core::ops::Add for OverlapCounts {
    type Output = OverlapCounts;

    fn add(self, o: OverlapCounts) -> OverlapCounts {
        OverlapCounts {
            intersection: self.intersection + o.intersection,
            union: self.union + o.union,
            pred: self.pred + o.pred,
            gt: self.gt + o.gt,
            pixels: self.pixels + o.pixels,
        }
    }
}

pub fn frame_iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(OverlapCounts::of(pred, gt)?.iou())
}

pub fn frame_dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(OverlapCounts::of(pred, gt)?.dice())
}

pub fn frame_mae(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(OverlapCounts::of(pred, gt)?.mae())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameScore {
    pub iou: f64,
    pub dice: f64,
    pub mae: f64,
    pub s_measure: f64,
    pub e_measure: f64,
    pub weighted_f: f64,
    #[serde(skip)]
    pub counts: OverlapCounts,
}

impl FrameScore {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Iou => self.iou,
            Metric::Dice => self.dice,
            Metric::Mae => self.mae,
            Metric::SMeasure => self.s_measure,
            Metric::EMeasure => self.e_measure,
            Metric::WeightedF => self.weighted_f,
        }
    }
}

/// All frame metrics for a binary prediction.
pub fn frame_scores(pred: &BinaryMask, gt: &BinaryMask) -> Result<FrameScore> {
    let counts = OverlapCounts::of(pred, gt)?;
    let soft = SoftMap::from_mask(pred);
    Ok(FrameScore {
        iou: counts.iou(),
        dice: counts.dice(),
        mae: counts.mae(),
        s_measure: s_measure(&soft, gt)?,
        e_measure: e_measure(pred, gt)?,
        weighted_f: weighted_f(&soft, gt)?,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binarize_boundary() {
        let s = SoftMap::new(3, 1, alloc::vec![0.49, 0.5, 0.51]).unwrap();
        assert_eq!(binarize(&s, 0.5).unwrap().bits(), &[false, true, true]);
        let all = SoftMap::new(2, 1, alloc::vec![0.6, 0.6]).unwrap();
        assert!(binarize(&all, 0.5).unwrap().bits().iter().all(|&b| b));
        assert!(binarize(&all, 0.0).is_err());
    }

    #[test]
    fn overlap_examples() {
        let gt = BinaryMask::from_fn(10, 10, |_, y| y == 0);
        let c = OverlapCounts::of(&gt, &gt).unwrap();
        assert_eq!((c.iou(), c.dice(), c.mae()), (1.0, 1.0, 0.0));

        let other = BinaryMask::from_fn(10, 10, |_, y| y == 9);
        let c = OverlapCounts::of(&other, &gt).unwrap();
        assert_eq!((c.iou(), c.dice(), c.mae()), (0.0, 0.0, 0.2));

        let double = BinaryMask::from_fn(10, 10, |_, y| y < 2);
        let c = OverlapCounts::of(&double, &gt).unwrap();
        assert_eq!(c.iou(), 0.5);
        assert!((c.dice() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_gt_rule() {
        let e = BinaryMask::empty(4, 4);
        let s = frame_scores(&e, &e).unwrap();
        assert_eq!((s.iou, s.dice, s.mae, s.s_measure, s.e_measure, s.weighted_f), (1.0, 1.0, 0.0, 1.0, 1.0, 1.0));
        let p = BinaryMask::from_fn(4, 4, |x, y| x + y == 0);
        let s = frame_scores(&p, &e).unwrap();
        assert_eq!((s.iou, s.dice, s.e_measure, s.weighted_f), (0.0, 0.0, 0.0, 0.0));
        assert!(s.s_measure < 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(frame_iou(&BinaryMask::empty(2, 2), &BinaryMask::empty(3, 2)).is_err());
    }

    fn mask_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            (
                proptest::collection::vec(any::<bool>(), w * h),
                proptest::collection::vec(any::<bool>(), w * h),
            )
                .prop_map(move |(a, b)| {
                    (BinaryMask::new(w, h, a).unwrap(), BinaryMask::new(w, h, b).unwrap())
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn iou_never_exceeds_dice((p, g) in mask_pair()) {
            let c = OverlapCounts::of(&p, &g).unwrap();
            prop_assert!(c.iou() <= c.dice() + 1e-15);
            if c.gt > 0 {
                let d = c.dice();
                prop_assert!((c.iou() - d / (2.0 - d)).abs() < 1e-12);
            }
        }

        #[test]
        fn all_scores_in_unit_range((p, g) in mask_pair()) {
            let s = frame_scores(&p, &g).unwrap();
            for m in Metric::ALL {
                prop_assert!((0.0..=1.0).contains(&s.get(m)), "{:?} = {}", m, s.get(m));
            }
        }

        #[test]
        fn perfect_prediction_is_extreme((_, g) in mask_pair()) {
            let s = frame_scores(&g, &g).unwrap();
            prop_assert_eq!(s.mae, 0.0);
            for m in [Metric::Iou, Metric::Dice, Metric::SMeasure, Metric::EMeasure, Metric::WeightedF] {
                prop_assert!((s.get(m) - 1.0).abs() < 1e-12, "{:?} = {}", m, s.get(m));
            }
        }
    }
}
