//! Enhanced-alignment measure (Fan et al., IJCAI 2018) for binary maps.

use crate::error::{Error, Result};
use crate::video::BinaryMask;

const EPS: f64 = f64::EPSILON;

/// The reference divides the summed alignment by `N - 1`, which lets a
/// perfect prediction reach `N / (N - 1)`; the score is clamped to `[0, 1]`.
/// Empty ground truth scores 1 for an empty prediction and 0 otherwise.
pub fn e_measure(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Error::check_dims(gt.dims(), pred.dims())?;
    let n = gt.bits().len() as f64;
    let fg = gt.count();
    if fg == 0 {
        return Ok(if pred.is_empty() { 1.0 } else { 0.0 });
    }
    let as_f = |b: bool| if b { 1.0 } else { 0.0 };
    let sum: f64 = if fg == gt.bits().len() {
        pred.count() as f64
    } else {
        let mu_p = pred.count() as f64 / n;
        let mu_g = fg as f64 / n;
        pred.bits()
            .iter()
            .zip(gt.bits())
            .map(|(&p, &g)| {
                let ap = as_f(p) - mu_p;
                let ag = as_f(g) - mu_g;
                let align = 2.0 * ag * ap / (ag * ag + ap * ap + EPS);
                (align + 1.0) * (align + 1.0) / 4.0
            })
            .sum()
    };
    Ok((sum / (n - 1.0 + EPS)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_is_one() {
        let gt = BinaryMask::from_fn(8, 8, |x, y| x > y);
        assert_eq!(e_measure(&gt, &gt).unwrap(), 1.0);
        let full = BinaryMask::full(3, 3);
        assert_eq!(e_measure(&full, &full).unwrap(), 1.0);
    }

    #[test]
    fn empty_ground_truth_rule() {
        let empty = BinaryMask::empty(4, 4);
        assert_eq!(e_measure(&empty, &empty).unwrap(), 1.0);
        let one = BinaryMask::from_fn(4, 4, |x, y| x + y == 0);
        assert_eq!(e_measure(&one, &empty).unwrap(), 0.0);
    }

    #[test]
    fn inverted_scores_low() {
        let gt = BinaryMask::from_fn(8, 8, |x, _| x < 3);
        let inv = BinaryMask::from_fn(8, 8, |x, _| x >= 3);
        assert!(e_measure(&inv, &gt).unwrap() < 0.1);
    }
}
