//! Frames, video sequences, binary masks and ground truth.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit RGB frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    /// 0-based position in the source video.
    pub index: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>, index: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame", "width and height must be positive"));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::invalid(
                "frame",
                alloc::format!(
                    "pixel buffer has {} bytes, expected {}",
                    pixels.len(),
                    width * height * 3
                ),
            ));
        }
        Ok(Frame {
            width,
            height,
            pixels,
            index,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3], index: usize) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Frame::new(width, height, pixels, index)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        index: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Frame::new(width, height, pixels, index)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    /// Luma plane, `0.299 R + 0.587 G + 0.114 B`.
    pub fn luma(&self) -> Vec<f64> {
        self.pixels
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }
}

/// An ordered list of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    pub source_id: String,
}

impl VideoSequence {
    /// Frames are re-indexed to their position in the list.
    pub fn new(source_id: impl Into<String>, frames: Vec<Frame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::invalid("video", "a sequence needs at least 2 frames"));
        }
        let dims = frames[0].dims();
        for f in &frames[1..] {
            Error::check_dims(dims, f.dims())?;
        }
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| f.with_index(i))
            .collect();
        Ok(VideoSequence {
            frames,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    /// The same video played backwards; frame `i` becomes frame `t-1-i`.
    pub fn reversed(&self) -> VideoSequence {
        let frames = self.frames.iter().rev().cloned().collect();
        VideoSequence::new(self.source_id.clone(), frames).expect("reversal keeps invariants")
    }
}

/// Axis-aligned box in pixel coordinates, half-open `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let finite = [x0, y0, x1, y1].iter().all(|v| v.is_finite());
        if !finite || x0 >= x1 || y0 >= y1 {
            return Err(Error::invalid(
                "bounding box",
                alloc::format!("[{x0}, {y0}, {x1}, {y1}] is empty or not finite"),
            ));
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) * 0.5, (self.y0 + self.y1) * 0.5)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        w * h
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Clip to `[0, width) x [0, height)`; `None` when nothing is left.
    pub fn clipped(&self, width: usize, height: usize) -> Option<BoundingBox> {
        BoundingBox::new(
            self.x0.max(0.0),
            self.y0.max(0.0),
            self.x1.min(width as f64),
            self.y1.min(height as f64),
        )
        .ok()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BoundingBox {
        BoundingBox {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }

    /// Integer pixel range whose pixel centers fall inside the box.
    pub fn pixel_range(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let lo = |v: f64, max: usize| (libm::ceil(v - 0.5).max(0.0) as usize).min(max);
        (
            lo(self.x0, width),
            lo(self.y0, height),
            lo(self.x1, width),
            lo(self.y1, height),
        )
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::invalid(
                "mask",
                alloc::format!("{}x{} mask with {} bits", width, height, bits.len()),
            ));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    /// Pixels whose centers fall inside `bbox`.
    pub fn from_box(width: usize, height: usize, bbox: &BoundingBox) -> Self {
        let (x0, y0, x1, y1) = bbox.pixel_range(width, height);
        BinaryMask::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        Error::check_dims(self.dims(), other.dims())?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    /// Tight half-open box around every set pixel.
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        (x0 != usize::MAX).then_some(BoundingBox {
            x0: x0 as f64,
            y0: y0 as f64,
            x1: x1 as f64,
            y1: y1 as f64,
        })
    }

    /// Shift by an integer offset; pixels leaving the canvas are dropped.
    pub fn shifted(&self, dx: i64, dy: i64) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            let sx = x as i64 - dx;
            let sy = y as i64 - dy;
            sx >= 0
                && sy >= 0
                && (sx as usize) < self.width
                && (sy as usize) < self.height
                && self.get(sx as usize, sy as usize)
        })
    }
}

/// Per-frame masks for one video. Frames absent from the map have no mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSeries {
    pub video_id: String,
    frame_count: usize,
    masks: BTreeMap<usize, BinaryMask>,
}

impl MaskSeries {
    pub fn new(video_id: impl Into<String>, frame_count: usize) -> Self {
        MaskSeries {
            video_id: video_id.into(),
            frame_count,
            masks: BTreeMap::new(),
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn insert(&mut self, index: usize, mask: BinaryMask) -> Result<()> {
        if index >= self.frame_count {
            return Err(Error::invalid(
                "mask series",
                alloc::format!("frame {index} outside [0, {})", self.frame_count),
            ));
        }
        if let Some((_, first)) = self.masks.iter().next() {
            Error::check_dims(first.dims(), mask.dims())?;
        }
        self.masks.insert(index, mask);
        Ok(())
    }

    pub fn get(&self, index: usize) -> Option<&BinaryMask> {
        self.masks.get(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BinaryMask)> {
        self.masks.iter().map(|(i, m)| (*i, m))
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.masks.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.masks.values().next().map(BinaryMask::dims)
    }

    /// Keep only the frames for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) {
        self.masks.retain(|i, _| keep(*i));
    }

    /// Map frame `i` to `t-1-i`.
    pub fn reversed(&self) -> MaskSeries {
        let t = self.frame_count;
        MaskSeries {
            video_id: self.video_id.clone(),
            frame_count: t,
            masks: self
                .masks
                .iter()
                .map(|(i, m)| (t - 1 - i, m.clone()))
                .collect(),
        }
    }
}

/// Sparse ground-truth annotations for one video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub masks: BTreeMap<usize, BinaryMask>,
    pub boxes: BTreeMap<usize, BoundingBox>,
}

impl GroundTruth {
    pub fn is_empty(&self) -> bool {
        self.masks.is_empty() && self.boxes.is_empty()
    }

    /// Sorted union of frames carrying a mask or a box.
    pub fn annotated_frames(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.masks.keys().chain(self.boxes.keys()).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_rejects_mixed_dimensions() {
        let a = Frame::filled(4, 4, [0, 0, 0], 0).unwrap();
        let b = Frame::filled(8, 8, [0, 0, 0], 1).unwrap();
        assert!(matches!(
            VideoSequence::new("v", vec![a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sequence_needs_two_frames() {
        let a = Frame::filled(4, 4, [0, 0, 0], 0).unwrap();
        assert!(VideoSequence::new("v", vec![a]).is_err());
    }

    #[test]
    fn box_iou_of_shifted_rectangles() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let b = a.translated(5.0, 0.0);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn mask_box_round_trip() {
        let b = BoundingBox::new(2.0, 1.0, 5.0, 4.0).unwrap();
        let m = BinaryMask::from_box(8, 8, &b);
        assert_eq!(m.count(), 9);
        assert_eq!(m.bounding_box(), Some(b));
    }

    #[test]
    fn series_reverse_is_involution() {
        let mut s = MaskSeries::new("v", 5);
        s.insert(1, BinaryMask::full(2, 2)).unwrap();
        s.insert(4, BinaryMask::empty(2, 2)).unwrap();
        let r = s.reversed();
        assert_eq!(r.indices().collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(r.reversed(), s);
    }

    #[test]
    fn series_rejects_out_of_range_frames() {
        let mut s = MaskSeries::new("v", 3);
        assert!(s.insert(3, BinaryMask::full(2, 2)).is_err());
    }
}
