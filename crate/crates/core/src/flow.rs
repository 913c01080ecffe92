use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense displacement field `(dx, dy)` per pixel, row-major, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, vectors: Vec<[f64; 2]>) -> Result<Self> {
        if width == 0 || height == 0 || vectors.len() != width * height {
            return Err(Error::invalid(
                "flow field",
                alloc::format!("{}x{} field with {} vectors", width, height, vectors.len()),
            ));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("flow field", "non-finite displacement"));
        }
        Ok(FlowField {
            width,
            height,
            vectors,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField::uniform(width, height, [0.0, 0.0])
    }

    pub fn uniform(width: usize, height: usize, v: [f64; 2]) -> Self {
        FlowField {
            width,
            height,
            vectors: vec![v; width * height],
        }
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

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        self.vectors[y * self.width + x]
    }

    /// Elementwise map; the result must stay finite.
    pub fn map(&self, mut f: impl FnMut([f64; 2]) -> [f64; 2]) -> Result<FlowField> {
        FlowField::new(
            self.width,
            self.height,
            self.vectors.iter().map(|v| f(*v)).collect(),
        )
    }

    /// Frame-average displacement.
    pub fn mean(&self) -> [f64; 2] {
        let n = self.vectors.len() as f64;
        let (sx, sy) = self
            .vectors
            .iter()
            .fold((0.0, 0.0), |(sx, sy), v| (sx + v[0], sy + v[1]));
        [sx / n, sy / n]
    }
}
