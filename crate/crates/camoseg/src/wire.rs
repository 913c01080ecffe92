//! JSON bodies of the provider HTTP protocol.
//!
//! | endpoint | request | response |
//! |---|---|---|
//! | `POST /v1/flow` | [`FlowRequest`] | [`FlowResponse`] |
//! | `POST /v1/detect` | [`DetectRequest`] | [`DetectResponse`] |
//! | `POST /v1/session` | [`SessionRequest`] | [`SessionResponse`] |
//! | `POST /v1/track` | [`TrackRequest`] | [`TrackResponse`] |
//! | `GET /v1/capabilities` | | [`ServerCapabilities`] |
//!
//! Images travel as base64 PNG, flow as a base64 `.flo` payload. Errors come
//! back as [`ErrorBody`] with a 4xx or 5xx status.

use std::io::Cursor;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use camoseg_core::detection::Detection;
use camoseg_core::provider::{ProviderCapabilities, ProviderErrorKind};
use camoseg_core::tracking::{Direction, MaskPrompt, PromptTimeline};
use camoseg_core::{BinaryMask, BoundingBox, FlowField, Frame, MaskSeries};
use image::ImageFormat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flo::{decode_flow, encode_flow};
use crate::io::MASK_THRESHOLD;

pub const REQUEST_ID_HEADER: &str = "X-Request-Id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRequest {
    pub prev_png_b64: String,
    pub curr_png_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResponse {
    pub flow_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub image_png_b64: String,
    pub queries: Vec<String>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub score: f64,
    pub label_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WirePrompt {
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub point: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRequest {
    pub session_id: String,
    pub direction: Direction,
    pub prompts: Vec<WirePrompt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMask {
    pub frame: usize,
    pub png_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackResponse {
    pub masks: Vec<WireMask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelNames {
    pub flow: String,
    pub detector: String,
    pub segmenter: String,
}

/// One server hosts all three models; `models` names each of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerCapabilities {
    #[serde(flatten)]
    pub common: ProviderCapabilities,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<ModelNames>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: ProviderErrorKind,
}

fn b64_decode(what: &str, text: &str) -> Result<Vec<u8>> {
    B64.decode(text).map_err(|e| Error::format(format!("{what}: bad base64: {e}")))
}

fn png_bytes(img: &image::DynamicImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("PNG encoding into memory");
    out.into_inner()
}

fn decode_png(what: &str, text: &str) -> Result<image::DynamicImage> {
    let bytes = b64_decode(what, text)?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| Error::format(format!("{what}: {e}")))
}

pub fn frame_to_png_b64(frame: &Frame) -> String {
    let (w, h) = frame.dims();
    let img = image::RgbImage::from_raw(w as u32, h as u32, frame.pixels().to_vec()).expect("buffer matches dims");
    B64.encode(png_bytes(&img.into()))
}

pub fn png_b64_to_frame(text: &str, index: usize) -> Result<Frame> {
    let rgb = decode_png("frame", text)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Frame::new(w as usize, h as usize, rgb.into_raw(), index)?)
}

pub fn mask_to_png_b64(mask: &BinaryMask) -> String {
    let (w, h) = mask.dims();
    let raw = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = image::GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer matches dims");
    B64.encode(png_bytes(&img.into()))
}

pub fn png_b64_to_mask(text: &str) -> Result<BinaryMask> {
    let gray = decode_png("mask", text)?.into_luma8();
    let (w, h) = gray.dimensions();
    let bits = gray.as_raw().iter().map(|&v| v >= MASK_THRESHOLD).collect();
    Ok(BinaryMask::new(w as usize, h as usize, bits)?)
}

pub fn flow_to_b64(flow: &FlowField) -> String {
    B64.encode(encode_flow(flow))
}

pub fn b64_to_flow(text: &str) -> Result<FlowField> {
    decode_flow(&b64_decode("flow", text)?)
}

impl From<&Detection> for WireDetection {
    fn from(d: &Detection) -> Self {
        WireDetection {
            bbox: d.bbox.as_array(),
            score: d.score,
            label_index: d.label_index,
        }
    }
}

impl WireDetection {
    pub fn to_detection(&self) -> Result<Detection> {
        let [x0, y0, x1, y1] = self.bbox;
        Ok(Detection {
            bbox: BoundingBox::new(x0, y0, x1, y1)?,
            score: self.score,
            label_index: self.label_index,
        })
    }
}

pub fn prompts_to_wire(timeline: &PromptTimeline) -> Vec<WirePrompt> {
    timeline
        .prompts()
        .iter()
        .map(|p| WirePrompt {
            frame: p.frame_index,
            bbox: p.bbox.as_array(),
            point: p.point.map(|(x, y)| [x, y]),
        })
        .collect()
}

pub fn wire_to_timeline(frame_count: usize, prompts: &[WirePrompt]) -> Result<PromptTimeline> {
    let prompts = prompts
        .iter()
        .map(|p| {
            let [x0, y0, x1, y1] = p.bbox;
            Ok(MaskPrompt {
                frame_index: p.frame,
                bbox: BoundingBox::new(x0, y0, x1, y1)?,
                point: p.point.map(|[x, y]| (x, y)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PromptTimeline::new(frame_count, prompts)?)
}

pub fn masks_to_wire(series: &MaskSeries) -> Vec<WireMask> {
    series
        .iter()
        .map(|(frame, m)| WireMask { frame, png_b64: mask_to_png_b64(m) })
        .collect()
}

pub fn wire_to_masks(frame_count: usize, masks: &[WireMask]) -> Result<MaskSeries> {
    let mut series = MaskSeries::new("", frame_count);
    for m in masks {
        series.insert(m.frame, png_b64_to_mask(&m.png_b64)?)?;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_uses_box_key_and_requires_label_index() {
        let d = WireDetection { bbox: [1.0, 2.0, 3.0, 4.0], score: 0.5, label_index: 0 };
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"box":[1.0,2.0,3.0,4.0],"score":0.5,"label_index":0}"#);
        assert!(serde_json::from_str::<WireDetection>(r#"{"box":[1,2,3,4],"score":0.5}"#).is_err());
    }

    #[test]
    fn prompt_without_point_serializes_null() {
        let p = WirePrompt { frame: 3, bbox: [0.0, 0.0, 1.0, 1.0], point: None };
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"frame":3,"box":[0.0,0.0,1.0,1.0],"point":null}"#);
        let t = TrackRequest { session_id: "s".into(), direction: Direction::Backward, prompts: vec![] };
        assert!(serde_json::to_string(&t).unwrap().contains(r#""direction":"backward""#));
    }

    #[test]
    fn images_round_trip() {
        let f = Frame::from_fn(5, 3, 0, |x, y| [x as u8 * 40, y as u8 * 70, 9]).unwrap();
        assert_eq!(png_b64_to_frame(&frame_to_png_b64(&f), 0).unwrap(), f);
        let m = BinaryMask::from_fn(5, 3, |x, y| (x + y) % 2 == 0);
        assert_eq!(png_b64_to_mask(&mask_to_png_b64(&m)).unwrap(), m);
        assert!(png_b64_to_mask("not base64!").is_err());
    }

    #[test]
    fn capabilities_flatten_the_common_fields() {
        let caps = ServerCapabilities {
            common: ProviderCapabilities::new("m", false),
            models: None,
        };
        let json = serde_json::to_value(&caps).unwrap();
        assert_eq!(json["max_image_edge"], 4096);
        assert!(json.get("models").is_none());
        let back: ProviderCapabilities = serde_json::from_value(json).unwrap();
        assert_eq!(back, caps.common);
    }
}
