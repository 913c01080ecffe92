//! Image sequences, masks and dataset directories on disk.
//!
//! A dataset root holds one directory per video in the MoCA-Mask layout:
//!
//! ```text
//! <root>/<video>/Imgs/00000.jpg ...
//! <root>/<video>/GT/00000.png ...     sparse, named after the frame
//! <root>/<video>/boxes.csv            optional, frame,x0,y0,x1,y1
//! <root>/<video>/scene.json           synthetic videos only
//! ```
//!
//! Subdirectory and file names come from [`Layout`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use camoseg_core::synth::{SceneScript, SyntheticVideo};
use camoseg_core::{BinaryMask, BoundingBox, Frame, GroundTruth, MaskSeries, VideoSequence};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Mask pixels at or above this gray level are foreground.
pub const MASK_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Layout {
    pub frames_dir: String,
    pub gt_dir: String,
    pub boxes_file: String,
    pub scene_file: String,
    /// Index step for masks whose file names are not numbers.
    pub gt_stride: usize,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            frames_dir: "Imgs".into(),
            gt_dir: "GT".into(),
            boxes_file: "boxes.csv".into(),
            scene_file: "scene.json".into(),
            gt_stride: 5,
        }
    }
}

/// `scene.json`: everything needed to regenerate a synthetic video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub seed: u64,
    pub script: SceneScript,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| Error::Image { path: path.into(), source })
}

pub fn load_frame(path: &Path, index: usize) -> Result<Frame> {
    let rgb = open_image(path)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Frame::new(w as usize, h as usize, rgb.into_raw(), index)?)
}

fn dir_name(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .as_deref()
        .unwrap_or(dir)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Frames of `dir`, or of its `Imgs` subdirectory when there is one. The
/// source id is the name of `dir`.
pub fn load_sequence(dir: impl AsRef<Path>) -> Result<VideoSequence> {
    load_sequence_in(dir.as_ref(), &Layout::default().frames_dir)
}

pub fn load_sequence_in(dir: &Path, frames_dir: &str) -> Result<VideoSequence> {
    let sub = dir.join(frames_dir);
    let images = if sub.is_dir() { &sub } else { dir };
    let files = list_images(images)?;
    if files.is_empty() {
        return Err(Error::format(format!("no images in {}", images.display())));
    }
    let frames = files
        .iter()
        .enumerate()
        .map(|(i, p)| load_frame(p, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoSequence::new(dir_name(dir), frames)?)
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let gray = open_image(path)?.into_luma8();
    let (w, h) = gray.dimensions();
    let bits = gray.as_raw().iter().map(|&v| v >= MASK_THRESHOLD).collect();
    Ok(BinaryMask::new(w as usize, h as usize, bits)?)
}

fn numeric_stem(path: &Path) -> Option<usize> {
    path.file_stem()?.to_str()?.parse().ok()
}

/// Masks in `dir`, keyed by the number in their file name. Masks without a
/// numeric name get `position * stride_hint`.
pub fn load_ground_truth(dir: impl AsRef<Path>, stride_hint: usize) -> Result<GroundTruth> {
    let dir = dir.as_ref();
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::format(format!("no masks in {}", dir.display())));
    }
    let mut gt = GroundTruth::default();
    let mut dims = None;
    for (pos, path) in files.iter().enumerate() {
        let mask = load_mask(path)?;
        if *dims.get_or_insert(mask.dims()) != mask.dims() {
            return Err(Error::format(format!("{}: mask size differs from the other masks", path.display())));
        }
        let index = numeric_stem(path).unwrap_or(pos * stride_hint);
        if gt.masks.insert(index, mask).is_some() {
            return Err(Error::format(format!("{}: duplicate mask index {index}", path.display())));
        }
    }
    Ok(gt)
}

/// One PNG per mask, named `{index:05}.png`, values 0 and 255.
pub fn save_mask_series(series: &MaskSeries, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, mask) in series.iter() {
        save_mask(mask, &dir.join(format!("{i:05}.png")))?;
    }
    Ok(())
}

pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let (w, h) = mask.dims();
    let raw = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = image::GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer matches dims");
    img.save(path).map_err(|source| Error::Image { path: path.into(), source })
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = frame.dims();
    let img = image::RgbImage::from_raw(w as u32, h as u32, frame.pixels().to_vec()).expect("buffer matches dims");
    img.save(path).map_err(|source| Error::Image { path: path.into(), source })
}

#[derive(Debug, Serialize, Deserialize)]
struct BoxRow {
    frame: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

pub fn read_boxes(path: impl AsRef<Path>) -> Result<BTreeMap<usize, BoundingBox>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let r: BoxRow = row.map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        out.insert(r.frame, BoundingBox::new(r.x0, r.y0, r.x1, r.y1)?);
    }
    Ok(out)
}

pub fn write_boxes(boxes: &BTreeMap<usize, BoundingBox>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let err = |e: csv::Error| Error::format(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(err)?;
    for (&frame, b) in boxes {
        let [x0, y0, x1, y1] = b.as_array();
        writer.serialize(BoxRow { frame, x0, y0, x1, y1 }).map_err(err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scene(path: impl AsRef<Path>) -> Result<SceneFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Video directories under `root`: those with a frames subdirectory, by name.
pub fn discover_videos(root: impl AsRef<Path>, layout: &Layout) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(&layout.frames_dir).is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::format(format!(
            "no video directories with a {}/ subdirectory in {}",
            layout.frames_dir,
            root.display()
        )));
    }
    Ok(dirs)
}

#[derive(Debug, Clone)]
pub struct LoadedVideo {
    pub dir: PathBuf,
    pub sequence: VideoSequence,
    /// `None` when the directory has neither masks nor boxes.
    pub truth: Option<GroundTruth>,
}

impl LoadedVideo {
    pub fn id(&self) -> &str {
        &self.sequence.source_id
    }
}

/// Frames plus whatever annotations the directory has. Mask and box indices
/// are matched to frames by file stem, so `GT/00005.png` belongs to the frame
/// file named `00005`.
pub fn load_video(dir: impl AsRef<Path>, layout: &Layout) -> Result<LoadedVideo> {
    let dir = dir.as_ref();
    let sequence = load_sequence_in(dir, &layout.frames_dir)?;
    let frames_dir = dir.join(&layout.frames_dir);
    let by_stem: BTreeMap<usize, usize> = if frames_dir.is_dir() {
        list_images(&frames_dir)?
            .iter()
            .enumerate()
            .filter_map(|(pos, p)| Some((numeric_stem(p)?, pos)))
            .collect()
    } else {
        BTreeMap::new()
    };
    let t = sequence.len();
    let position = |n: usize| -> Result<usize> {
        let p = by_stem.get(&n).copied().unwrap_or(n);
        if p < t {
            Ok(p)
        } else {
            Err(Error::format(format!("{}: annotation {n} has no matching frame", dir.display())))
        }
    };

    let mut truth = GroundTruth::default();
    let gt_dir = dir.join(&layout.gt_dir);
    if gt_dir.is_dir() {
        for (n, mask) in load_ground_truth(&gt_dir, layout.gt_stride)?.masks {
            if mask.dims() != sequence.dims() {
                return Err(camoseg_core::Error::DimensionMismatch { expected: sequence.dims(), actual: mask.dims() }.into());
            }
            truth.masks.insert(position(n)?, mask);
        }
    }
    let boxes_path = dir.join(&layout.boxes_file);
    if boxes_path.is_file() {
        for (n, b) in read_boxes(&boxes_path)? {
            truth.boxes.insert(position(n)?, b);
        }
    }
    Ok(LoadedVideo {
        dir: dir.to_path_buf(),
        sequence,
        truth: (!truth.is_empty()).then_some(truth),
    })
}

/// Write `synth` as video `id` under `root`: PNG frames, a mask every
/// `gt_stride` frames, boxes on the same frames and the scene file.
pub fn write_synthetic_video(root: &Path, id: &str, synth: &SyntheticVideo, layout: &Layout, gt_stride: usize) -> Result<PathBuf> {
    if gt_stride == 0 {
        return Err(Error::config("gt stride must be positive"));
    }
    let dir = root.join(id);
    let (frames, gt) = (dir.join(&layout.frames_dir), dir.join(&layout.gt_dir));
    for d in [&frames, &gt] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for (i, f) in synth.video.frames().iter().enumerate() {
        save_frame(f, &frames.join(format!("{i:05}.png")))?;
    }
    let keep = |i: &usize| i.is_multiple_of(gt_stride);
    for (&i, m) in synth.truth.masks.iter().filter(|(i, _)| keep(i)) {
        save_mask(m, &gt.join(format!("{i:05}.png")))?;
    }
    let boxes = synth.truth.boxes.iter().filter(|(i, _)| keep(i)).map(|(&i, &b)| (i, b)).collect();
    write_boxes(&boxes, dir.join(&layout.boxes_file))?;
    let scene = SceneFile { seed: synth.seed, script: synth.script.clone() };
    let path = dir.join(&layout.scene_file);
    fs::write(&path, serde_json::to_string_pretty(&scene)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(dir)
}

/// Prediction masks for one video, as written by [`save_mask_series`].
pub fn load_predictions(dir: &Path, frame_count: usize) -> Result<MaskSeries> {
    let mut series = MaskSeries::new(dir_name(dir), frame_count);
    for path in list_images(dir)? {
        let index = numeric_stem(&path)
            .ok_or_else(|| Error::format(format!("{}: prediction names must be frame numbers", path.display())))?;
        series.insert(index, load_mask(&path)?)?;
    }
    Ok(series)
}
