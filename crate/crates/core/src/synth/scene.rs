use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::texture::{mix, TextureSpec};
use crate::camera::AffineTransform;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::video::{BinaryMask, Frame, GroundTruth, VideoSequence};

/// Largest allowed per-channel offset between object and background texture.
pub const MAX_CONTRAST_DELTA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Ellipse,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Half extents in pixels.
    pub radii: [f64; 2],
    /// World position of the center before the first motion step.
    pub start: [f64; 2],
    pub texture: TextureSpec,
    /// Added to every channel of the object texture.
    pub contrast_delta: f64,
}

impl ObjectSpec {
    fn contains(&self, lx: f64, ly: f64) -> bool {
        let (u, v) = (lx / self.radii[0], ly / self.radii[1]);
        match self.shape {
            Shape::Ellipse => u * u + v * v <= 1.0,
            Shape::Rect => u.abs() <= 1.0 && v.abs() <= 1.0,
        }
    }
}

/// A static, high-contrast rectangle in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    /// `[x0, y0, x1, y1]`, half-open.
    pub rect: [f64; 4],
    pub color: [u8; 3],
}

/// Everything needed to render one synthetic video.
///
/// A camera pose maps frame pixel coordinates to world coordinates: pixel
/// `p` of frame `i` shows world point `camera[i].apply(p)`. Panning the camera
/// by `+1` px per frame therefore makes static background flow by `-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub width: usize,
    pub height: usize,
    pub background: TextureSpec,
    pub object: ObjectSpec,
    /// Object displacement per frame; the center at frame `i` is
    /// `start + motion[0] + ... + motion[i]`.
    pub motion: Vec<[f64; 2]>,
    pub camera: Vec<AffineTransform>,
    #[serde(default)]
    pub distractors: Vec<Distractor>,
    /// Gaussian sensor noise sigma in 8-bit levels.
    #[serde(default)]
    pub sensor_noise: f64,
}

impl SceneScript {
    pub fn frame_count(&self) -> usize {
        self.motion.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::FrameTooSmall {
                width: self.width,
                height: self.height,
                min: 16,
            });
        }
        if self.motion.len() < 2 || self.camera.len() != self.motion.len() {
            return Err(Error::invalid(
                "scene script",
                format!(
                    "need at least 2 frames and one camera pose per frame, got {} motions and {} poses",
                    self.motion.len(),
                    self.camera.len()
                ),
            ));
        }
        let o = &self.object;
        if !(o.radii[0] > 0.0 && o.radii[1] > 0.0) {
            return Err(Error::invalid("object radii", "must be positive"));
        }
        if !(o.contrast_delta.abs() <= MAX_CONTRAST_DELTA) {
            return Err(Error::invalid("object contrast delta", "magnitude above 5"));
        }
        if !(self.background.cell > 0.0 && o.texture.cell > 0.0) {
            return Err(Error::invalid("texture cell", "must be positive"));
        }
        if self.motion.iter().flatten().chain(&o.start).any(|v| !v.is_finite()) {
            return Err(Error::invalid("object trajectory", "non-finite entry"));
        }
        if self.camera.iter().any(|a| !a.is_finite() || a.inverse().is_none()) {
            return Err(Error::invalid("camera trajectory", "pose not invertible"));
        }
        if !(self.sensor_noise >= 0.0 && self.sensor_noise.is_finite()) {
            return Err(Error::invalid("sensor noise", "must be finite and non-negative"));
        }
        Ok(())
    }

    /// World position of the object center at frame `i`.
    pub fn center(&self, i: usize) -> (f64, f64) {
        self.motion[..=i]
            .iter()
            .fold((self.object.start[0], self.object.start[1]), |(x, y), d| (x + d[0], y + d[1]))
    }

    /// Object-local coordinates of frame pixel `(x, y)` if it shows the object.
    fn object_local(&self, i: usize, center: (f64, f64), x: f64, y: f64) -> Option<(f64, f64)> {
        let (wx, wy) = self.camera[i].apply(x, y);
        let (lx, ly) = (wx - center.0, wy - center.1);
        self.object.contains(lx, ly).then_some((lx, ly))
    }

    /// Ground-truth mask of frame `i`, sampled at pixel indices.
    pub fn object_mask(&self, i: usize) -> BinaryMask {
        let c = self.center(i);
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            self.object_local(i, c, x as f64, y as f64).is_some()
        })
    }

    /// Noise-free color of every pixel of frame `i`.
    fn render_exact(&self, i: usize) -> Vec<[f64; 3]> {
        let c = self.center(i);
        let pose = self.camera[i];
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let (xf, yf) = (x as f64, y as f64);
                let px = if let Some((lx, ly)) = self.object_local(i, c, xf, yf) {
                    let d = self.object.contrast_delta;
                    let [r, g, b] = self.object.texture.color(lx, ly);
                    [r + d, g + d, b + d]
                } else {
                    let (wx, wy) = pose.apply(xf, yf);
                    match self.distractors.iter().find(|d| {
                        wx >= d.rect[0] && wx < d.rect[2] && wy >= d.rect[1] && wy < d.rect[3]
                    }) {
                        Some(d) => d.color.map(f64::from),
                        None => self.background.color(wx, wy),
                    }
                };
                out.push(px);
            }
        }
        out
    }

    /// Exact forward flow from frame `i` to frame `i + 1`.
    pub fn flow(&self, i: usize) -> Result<FlowField> {
        let next_inv = self.camera[i + 1]
            .inverse()
            .ok_or(Error::DegenerateGeometry("camera pose not invertible"))?;
        let (c0, c1) = (self.center(i), self.center(i + 1));
        let mut v = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let (xf, yf) = (x as f64, y as f64);
                let world = match self.object_local(i, c0, xf, yf) {
                    Some((lx, ly)) => (c1.0 + lx, c1.1 + ly),
                    None => self.camera[i].apply(xf, yf),
                };
                let (nx, ny) = next_inv.apply(world.0, world.1);
                v.push([nx - xf, ny - yf]);
            }
        }
        FlowField::new(self.width, self.height, v)
    }

    /// Distractor rectangles in frame `i` pixel coordinates, clipped.
    pub fn distractor_boxes(&self, i: usize) -> Vec<crate::video::BoundingBox> {
        let Some(inv) = self.camera[i].inverse() else {
            return Vec::new();
        };
        self.distractors
            .iter()
            .filter_map(|d| {
                let corners = [
                    inv.apply(d.rect[0], d.rect[1]),
                    inv.apply(d.rect[2], d.rect[1]),
                    inv.apply(d.rect[0], d.rect[3]),
                    inv.apply(d.rect[2], d.rect[3]),
                ];
                let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
                for (x, y) in corners {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
                crate::video::BoundingBox::new(x0, y0, x1, y1)
                    .ok()?
                    .clipped(self.width, self.height)
            })
            .collect()
    }

    /// The scripted scene used by the standard synthetic datasets.
    ///
    /// Even indices have a static camera, odd ones pan by 1.5 to 2.5 px per
    /// frame. The object moves at 1 to 2.5 px per frame and bounces off the
    /// frame edges, so it never leaves the canvas.
    pub fn standard(index: usize, width: usize, height: usize, frames: usize) -> SceneScript {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[0x5CE4E, index as u64]));
        let short = width.min(height) as f64;
        let radii = [short * rng.gen_range(0.10..0.15), short * rng.gen_range(0.10..0.15)];
        let shape = if index % 3 == 2 { Shape::Rect } else { Shape::Ellipse };
        let margin = [radii[0] + 3.0, radii[1] + 3.0];
        let limit = [width as f64 - 1.0 - margin[0], height as f64 - 1.0 - margin[1]];

        let speed = rng.gen_range(1.0..2.5);
        let angle = rng.gen_range(0.0..core::f64::consts::TAU);
        let mut vel = [speed * libm::cos(angle), speed * libm::sin(angle)];
        let mut pos = [rng.gen_range(margin[0]..limit[0]), rng.gen_range(margin[1]..limit[1])];

        let pan = if index % 2 == 1 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            [sign * rng.gen_range(1.5..2.5), rng.gen_range(-1.0..1.0)]
        } else {
            [0.0, 0.0]
        };

        let mut camera = Vec::with_capacity(frames);
        let mut centers = Vec::with_capacity(frames);
        for t in 0..frames {
            if t > 0 {
                for a in 0..2 {
                    pos[a] += vel[a];
                    if pos[a] < margin[a] {
                        pos[a] = 2.0 * margin[a] - pos[a];
                        vel[a] = -vel[a];
                    } else if pos[a] > limit[a] {
                        pos[a] = 2.0 * limit[a] - pos[a];
                        vel[a] = -vel[a];
                    }
                }
            }
            let pose = AffineTransform::translation(pan[0] * t as f64, pan[1] * t as f64);
            camera.push(pose);
            let (wx, wy) = pose.apply(pos[0], pos[1]);
            centers.push([wx, wy]);
        }
        let mut motion = Vec::with_capacity(frames);
        for t in 0..frames {
            motion.push(if t == 0 {
                [0.0, 0.0]
            } else {
                [centers[t][0] - centers[t - 1][0], centers[t][1] - centers[t - 1][1]]
            });
        }

        let dw = short * 0.12;
        let dx = rng.gen_range(0.0..width as f64 - dw);
        let dy = rng.gen_range(0.0..height as f64 - dw);
        let palette = [[200, 60, 50], [220, 200, 70], [60, 160, 70]];
        let distractors = alloc::vec![Distractor {
            rect: [dx, dy, dx + dw, dy + dw * 0.8],
            color: palette[index % palette.len()],
        }];

        SceneScript {
            width,
            height,
            background: TextureSpec {
                seed: mix(&[index as u64, 1]),
                cell: 12.0,
            },
            object: ObjectSpec {
                shape,
                radii,
                start: centers.first().copied().unwrap_or([0.0, 0.0]),
                texture: TextureSpec {
                    seed: mix(&[index as u64, 2]),
                    cell: 12.0,
                },
                contrast_delta: rng.gen_range(-MAX_CONTRAST_DELTA..=MAX_CONTRAST_DELTA),
            },
            motion,
            camera,
            distractors,
            sensor_noise: 0.0,
        }
    }
}

/// A rendered script with exact annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub script: SceneScript,
    pub seed: u64,
    pub video: VideoSequence,
    /// Masks and boxes on every frame.
    pub truth: GroundTruth,
    /// `flows[i]` maps frame `i` to frame `i + 1`.
    pub flows: Vec<FlowField>,
}

/// Render `script`; `seed` drives the sensor noise only.
pub fn generate(script: &SceneScript, seed: u64) -> Result<SyntheticVideo> {
    script.validate()?;
    let (w, h) = (script.width, script.height);
    let mut frames = Vec::with_capacity(script.frame_count());
    let mut truth = GroundTruth::default();
    for i in 0..script.frame_count() {
        let mask = script.object_mask(i);
        let touches_border = (0..w).any(|x| mask.get(x, 0) || mask.get(x, h - 1))
            || (0..h).any(|y| mask.get(0, y) || mask.get(w - 1, y));
        if mask.is_empty() || touches_border {
            return Err(Error::invalid(
                "scene script",
                format!("object leaves the canvas at frame {i}"),
            ));
        }
        let bbox = mask.bounding_box().expect("mask is not empty");
        truth.masks.insert(i, mask);
        truth.boxes.insert(i, bbox);

        let exact = script.render_exact(i);
        let mut pixels = Vec::with_capacity(w * h * 3);
        if script.sensor_noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, i as u64, 0x5E75]));
            let normal = Normal::new(0.0, script.sensor_noise)
                .map_err(|_| Error::invalid("sensor noise", "bad sigma"))?;
            for px in &exact {
                for c in px {
                    pixels.push(quantize(c + normal.sample(&mut rng)));
                }
            }
        } else {
            pixels.extend(exact.iter().flatten().map(|&c| quantize(c)));
        }
        frames.push(Frame::new(w, h, pixels, i)?);
    }
    let flows = (0..script.frame_count() - 1)
        .map(|i| script.flow(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticVideo {
        script: script.clone(),
        seed,
        video: VideoSequence::new("synthetic", frames)?,
        truth,
        flows,
    })
}

fn quantize(v: f64) -> u8 {
    libm::round(v).clamp(0.0, 255.0) as u8
}
