use serde::{Deserialize, Serialize};

use super::IntensityMap;
use crate::error::{Error, Result};
use crate::video::Frame;

pub const DEFAULT_HIGHLIGHT: [u8; 3] = [0, 0, 255];

/// How intensity turns into blend weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthLaw {
    /// `w = intensity / 255`.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighlightedFrame {
    pub frame: Frame,
    pub color: [u8; 3],
    pub law: StrengthLaw,
}

impl HighlightedFrame {
    /// A frame passed to detection without any highlight.
    pub fn plain(frame: Frame) -> Self {
        HighlightedFrame {
            frame,
            color: DEFAULT_HIGHLIGHT,
            law: StrengthLaw::Linear,
        }
    }
}

/// `round((1 - w) * pixel + w * color)` with `w = intensity / 255`.
pub fn blend_highlight(
    frame: &Frame,
    intensity: &IntensityMap,
    color: [u8; 3],
) -> Result<HighlightedFrame> {
    Error::check_dims(frame.dims(), intensity.dims())?;
    let mut pixels = frame.pixels().to_vec();
    for (px, &v) in pixels.chunks_exact_mut(3).zip(intensity.values()) {
        let w = v / 255.0;
        for c in 0..3 {
            let out = (1.0 - w) * px[c] as f64 + w * color[c] as f64;
            px[c] = libm::round(out).clamp(0.0, 255.0) as u8;
        }
    }
    Ok(HighlightedFrame {
        frame: Frame::new(frame.width(), frame.height(), pixels, frame.index)?,
        color,
        law: StrengthLaw::Linear,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn zero_intensity_is_identity() {
        let f = Frame::from_fn(3, 2, 4, |x, y| [x as u8 * 40, y as u8 * 90, 7]).unwrap();
        let out = blend_highlight(&f, &IntensityMap::zeros(3, 2), DEFAULT_HIGHLIGHT).unwrap();
        assert_eq!(out.frame, f);
    }

    #[test]
    fn full_intensity_is_solid_color() {
        let f = Frame::filled(3, 2, [12, 200, 40], 0).unwrap();
        let im = IntensityMap::new(3, 2, vec![255.0; 6]).unwrap();
        let out = blend_highlight(&f, &im, [0, 0, 255]).unwrap();
        assert!(out.frame.pixels().chunks(3).all(|p| p == [0, 0, 255]));
    }

    #[test]
    fn half_intensity_on_white() {
        let f = Frame::filled(1, 1, [255, 255, 255], 0).unwrap();
        let im = IntensityMap::new(1, 1, vec![127.5]).unwrap();
        let out = blend_highlight(&f, &im, [0, 0, 255]).unwrap();
        assert_eq!(out.frame.pixel(0, 0), [128, 128, 255]);
    }

    proptest! {
        #[test]
        fn zero_weight_is_identity_everywhere(
            px in proptest::collection::vec(any::<u8>(), 12), color in any::<[u8; 3]>(),
        ) {
            let f = Frame::new(2, 2, px, 0).unwrap();
            let out = blend_highlight(&f, &IntensityMap::zeros(2, 2), color).unwrap();
            prop_assert_eq!(out.frame, f);
        }
    }
}
