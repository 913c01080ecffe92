//! Golden request suite for provider servers.
//!
//! [`golden_requests`] builds the same bodies on every call, so the client
//! tests and [`conformance_check`] exercise identical payloads. The check
//! talks raw HTTP to see status codes and exact bodies.

use std::time::Duration;

use camoseg_core::synth::TextureSpec;
use camoseg_core::tracking::Direction;
use camoseg_core::Frame;
use serde::Serialize;
use serde_json::Value;

use crate::flo::MAGIC;
use crate::wire::{
    frame_to_png_b64, png_b64_to_mask, DetectRequest, FlowRequest, SessionRequest, TrackRequest, WirePrompt,
    REQUEST_ID_HEADER,
};

pub const GOLDEN_SIZE: usize = 64;
pub const GOLDEN_FRAMES: usize = 4;
pub const GOLDEN_SHIFT: usize = 3;
/// Largest flow norm accepted between identical frames.
pub const IDENTICAL_FLOW_BOUND: f64 = 0.5;

/// Textured frame, shifted right by `shift` pixels, with a blue square.
pub fn golden_frame(shift: usize, index: usize) -> Frame {
    let t = TextureSpec { seed: 7, cell: 8.0 };
    Frame::from_fn(GOLDEN_SIZE, GOLDEN_SIZE, index, |x, y| {
        let sx = x as f64 - shift as f64;
        if (20..36).contains(&(x as i64 - shift as i64)) && (24..40).contains(&y) {
            [20, 40, 230]
        } else {
            t.color(sx, y as f64).map(|c| c as u8)
        }
    })
    .expect("fixed dimensions")
}

pub struct GoldenRequests {
    pub flow_identical: FlowRequest,
    pub flow_shifted: FlowRequest,
    pub detect: DetectRequest,
    pub session: SessionRequest,
    /// Track request without a session id; fill it in after opening one.
    pub track: TrackRequest,
}

pub fn golden_requests() -> GoldenRequests {
    let f0 = frame_to_png_b64(&golden_frame(0, 0));
    GoldenRequests {
        flow_identical: FlowRequest { prev_png_b64: f0.clone(), curr_png_b64: f0.clone() },
        flow_shifted: FlowRequest {
            prev_png_b64: f0.clone(),
            curr_png_b64: frame_to_png_b64(&golden_frame(GOLDEN_SHIFT, 1)),
        },
        detect: DetectRequest {
            image_png_b64: f0,
            queries: vec!["an animal or insect being highlighted in blue".into(), "background".into()],
            threshold: 0.1,
        },
        session: SessionRequest {
            frames: (0..GOLDEN_FRAMES).map(|i| frame_to_png_b64(&golden_frame(i, i))).collect(),
        },
        track: TrackRequest {
            session_id: String::new(),
            direction: Direction::Forward,
            prompts: vec![WirePrompt { frame: 0, bbox: [20.0, 24.0, 36.0, 40.0], point: Some([28.0, 32.0]) }],
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConformanceReport {
    pub base_url: String,
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Raw {
    status: u16,
    body: String,
}

struct Probe {
    agent: ureq::Agent,
    base: String,
}

impl Probe {
    fn send(&self, route: &str, body: Option<&str>, request_id: Option<&str>) -> Result<Raw, String> {
        let url = format!("{}/v1/{route}", self.base);
        let mut req = match body {
            Some(_) => self.agent.post(&url).set("Content-Type", "application/json"),
            None => self.agent.get(&url),
        };
        if let Some(id) = request_id {
            req = req.set(REQUEST_ID_HEADER, id);
        }
        let result = match body {
            Some(b) => req.send_string(b),
            None => req.call(),
        };
        let resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(ureq::Error::Transport(t)) => return Err(format!("transport: {t}")),
        };
        let status = resp.status();
        let body = resp.into_string().map_err(|e| format!("reading body: {e}"))?;
        Ok(Raw { status, body })
    }

    fn post_json<T: Serialize>(&self, route: &str, req: &T) -> Result<Value, String> {
        let raw = self.send(route, Some(&serde_json::to_string(req).expect("request body")), None)?;
        if raw.status != 200 {
            return Err(format!("HTTP {}: {}", raw.status, raw.body));
        }
        serde_json::from_str(&raw.body).map_err(|e| format!("bad JSON: {e}"))
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, String> {
    v.get(key).ok_or_else(|| format!("missing `{key}`"))
}

fn flow_field(v: &Value) -> Result<camoseg_core::FlowField, String> {
    let text = field(v, "flow_b64")?.as_str().ok_or("`flow_b64` is not a string")?;
    let bytes = base64::Engine::decode(&base64::engine::general_purpose::STANDARD, text)
        .map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err("flow payload lacks the PIEH magic".into());
    }
    let flow = crate::flo::decode_flow(&bytes).map_err(|e| e.to_string())?;
    if flow.dims() != (GOLDEN_SIZE, GOLDEN_SIZE) {
        return Err(format!("flow is {:?}, frames are {GOLDEN_SIZE}x{GOLDEN_SIZE}", flow.dims()));
    }
    Ok(flow)
}

fn check_capabilities(p: &Probe) -> Result<String, String> {
    let raw = p.send("capabilities", None, None)?;
    if raw.status != 200 {
        return Err(format!("HTTP {}", raw.status));
    }
    let v: Value = serde_json::from_str(&raw.body).map_err(|e| format!("bad JSON: {e}"))?;
    field(&v, "supports_concurrent")?.as_bool().ok_or("`supports_concurrent` is not a boolean")?;
    let edge = field(&v, "max_image_edge")?.as_u64().ok_or("`max_image_edge` is not an integer")?;
    let name = field(&v, "model_name")?.as_str().ok_or("`model_name` is not a string")?;
    if edge < 64 {
        return Err(format!("max_image_edge {edge} is below 64"));
    }
    Ok(format!("{name}, max edge {edge}"))
}

fn check_flow_identical(p: &Probe, g: &GoldenRequests) -> Result<String, String> {
    let flow = flow_field(&p.post_json("flow", &g.flow_identical)?)?;
    let max = flow.vectors().iter().map(|[x, y]| x.hypot(*y)).fold(0.0, f64::max);
    if max >= IDENTICAL_FLOW_BOUND {
        return Err(format!("max norm {max:.3} between identical frames"));
    }
    Ok(format!("max norm {max:.3}"))
}

fn check_flow_shifted(p: &Probe, g: &GoldenRequests) -> Result<String, String> {
    let flow = flow_field(&p.post_json("flow", &g.flow_shifted)?)?;
    let m = 16;
    let mut dx: Vec<f64> = (m..GOLDEN_SIZE - m)
        .flat_map(|y| (m..GOLDEN_SIZE - m).map(move |x| (x, y)))
        .map(|(x, y)| flow.at(x, y)[0])
        .collect();
    dx.sort_by(f64::total_cmp);
    let median = dx[dx.len() / 2];
    if (median - GOLDEN_SHIFT as f64).abs() > 1.0 {
        return Err(format!("median interior dx {median:.2}, expected about {GOLDEN_SHIFT}"));
    }
    Ok(format!("median interior dx {median:.2}"))
}

fn check_detect(p: &Probe, g: &GoldenRequests) -> Result<String, String> {
    let v = p.post_json("detect", &g.detect)?;
    let dets = field(&v, "detections")?.as_array().ok_or("`detections` is not an array")?;
    for (i, d) in dets.iter().enumerate() {
        let at = |e: String| format!("detection {i}: {e}");
        let b = field(d, "box").map_err(at)?.as_array().ok_or_else(|| at("`box` is not an array".into()))?;
        let b: Vec<f64> = b.iter().filter_map(Value::as_f64).collect();
        if b.len() != 4 || !(b[0] < b[2] && b[1] < b[3]) {
            return Err(at(format!("bad box {b:?}")));
        }
        let score = field(d, "score").map_err(at)?.as_f64().ok_or_else(|| at("`score` is not a number".into()))?;
        if !(g.detect.threshold..=1.0).contains(&score) {
            return Err(at(format!("score {score} outside [{}, 1]", g.detect.threshold)));
        }
        let label = field(d, "label_index").map_err(at)?.as_u64().ok_or_else(|| at("`label_index` is not an integer".into()))?;
        if label as usize >= g.detect.queries.len() {
            return Err(at(format!("label_index {label} out of range")));
        }
    }
    Ok(format!("{} detections", dets.len()))
}

fn open_session(p: &Probe, g: &GoldenRequests) -> Result<String, String> {
    let v = p.post_json("session", &g.session)?;
    let id = field(&v, "session_id")?.as_str().ok_or("`session_id` is not a string")?;
    if id.is_empty() {
        return Err("empty session id".into());
    }
    Ok(id.to_string())
}

fn check_track(p: &Probe, g: &GoldenRequests, session: &str, direction: Direction) -> Result<String, String> {
    let mut req = g.track.clone();
    req.session_id = session.to_string();
    req.direction = direction;
    let v = p.post_json("track", &req)?;
    let masks = field(&v, "masks")?.as_array().ok_or("`masks` is not an array")?;
    for m in masks {
        let frame = field(m, "frame")?.as_u64().ok_or("`frame` is not an integer")? as usize;
        if frame >= GOLDEN_FRAMES {
            return Err(format!("mask for frame {frame} of {GOLDEN_FRAMES}"));
        }
        let png = field(m, "png_b64")?.as_str().ok_or("`png_b64` is not a string")?;
        let mask = png_b64_to_mask(png).map_err(|e| e.to_string())?;
        if mask.dims() != (GOLDEN_SIZE, GOLDEN_SIZE) {
            return Err(format!("mask is {:?}", mask.dims()));
        }
    }
    if masks.is_empty() {
        return Err("no masks for a prompted video".into());
    }
    Ok(format!("{} masks", masks.len()))
}

fn check_unknown_session(p: &Probe, g: &GoldenRequests) -> Result<String, String> {
    let mut req = g.track.clone();
    req.session_id = "no-such-session".into();
    let raw = p.send("track", Some(&serde_json::to_string(&req).expect("body")), None)?;
    match raw.status {
        404 => Ok("404".into()),
        s => Err(format!("expected 404, got {s}")),
    }
}

fn check_dedupe(p: &Probe, g: &GoldenRequests) -> Result<String, String> {
    let body = serde_json::to_string(&g.detect).expect("body");
    let id = uuid::Uuid::new_v4().to_string();
    let a = p.send("detect", Some(&body), Some(&id))?;
    let b = p.send("detect", Some(&body), Some(&id))?;
    if a.status != 200 || b.status != 200 {
        return Err(format!("HTTP {} / {}", a.status, b.status));
    }
    if a.body != b.body {
        return Err("repeated X-Request-Id returned different bodies".into());
    }
    Ok("identical bodies".into())
}

fn check_malformed(p: &Probe) -> Result<String, String> {
    let raw = p.send("detect", Some("{\"image_png_b64\": 3"), None)?;
    match raw.status {
        400 => Ok("400".into()),
        s => Err(format!("expected 400, got {s}")),
    }
}

/// Replay the golden suite against a server.
pub fn conformance_check(base_url: &str, timeout: Duration) -> ConformanceReport {
    let p = Probe {
        agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        base: base_url.trim_end_matches('/').to_string(),
    };
    let g = golden_requests();
    let mut checks = Vec::new();
    let mut record = |name: &str, r: Result<String, String>| {
        let passed = r.is_ok();
        checks.push(CheckResult { name: name.into(), passed, detail: r.unwrap_or_else(|e| e) });
    };
    record("capabilities", check_capabilities(&p));
    record("flow_identical", check_flow_identical(&p, &g));
    record("flow_shifted", check_flow_shifted(&p, &g));
    record("detect_schema", check_detect(&p, &g));
    let session = open_session(&p, &g);
    record("session", session.clone());
    match session {
        Ok(id) => {
            record("track_forward", check_track(&p, &g, &id, Direction::Forward));
            record("track_backward", check_track(&p, &g, &id, Direction::Backward));
        }
        Err(e) => {
            record("track_forward", Err(format!("no session: {e}")));
            record("track_backward", Err(format!("no session: {e}")));
        }
    }
    record("unknown_session", check_unknown_session(&p, &g));
    record("dedupe", check_dedupe(&p, &g));
    record("malformed_request", check_malformed(&p));
    ConformanceReport { base_url: base_url.to_string(), checks }
}
