//! HTTP implementations of the provider traits.
//!
//! Every logical call gets one `X-Request-Id` that is reused across retries,
//! so a server that deduplicates answers a retried call exactly once.
//! Transport failures, timeouts, 408, 429 and 5xx responses are retried with
//! exponential backoff; everything else fails immediately.

use std::collections::HashMap;
use std::io::Read;
use std::sync::Mutex;
use std::time::Duration;

use camoseg_core::detection::Detection;
use camoseg_core::provider::{
    DetectorProvider, FlowProvider, ProviderCapabilities, ProviderError, ProviderErrorKind, ProviderResult,
    SegmenterProvider, SessionId,
};
use camoseg_core::tracking::{Direction, PromptTimeline};
use camoseg_core::{FlowField, Frame, MaskSeries, VideoSequence};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::wire::{
    b64_to_flow, frame_to_png_b64, prompts_to_wire, wire_to_masks, DetectRequest, DetectResponse, ErrorBody,
    FlowRequest, FlowResponse, ServerCapabilities, SessionRequest, SessionResponse, TrackRequest, TrackResponse,
    REQUEST_ID_HEADER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderEndpoint {
    pub base_url: String,
    /// Per-request timeout in seconds.
    pub timeout: f64,
    pub max_retries: u32,
    pub api_version: String,
    /// Delay before the first retry in seconds; doubles on each further retry.
    pub backoff: f64,
}

impl Default for ProviderEndpoint {
    fn default() -> Self {
        ProviderEndpoint {
            base_url: "http://127.0.0.1:8765".into(),
            timeout: 120.0,
            max_retries: 3,
            api_version: "v1".into(),
            backoff: 0.5,
        }
    }
}

impl ProviderEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        ProviderEndpoint { base_url: base_url.into(), ..Default::default() }
    }

    pub fn validate(&self) -> ProviderResult<()> {
        let bad = |m: String| Err(ProviderError::new(ProviderErrorKind::Rejected, m));
        if !(self.timeout > 0.0) || !self.timeout.is_finite() {
            return bad(format!("timeout must be positive, got {}", self.timeout));
        }
        if !(self.backoff >= 0.0) || !self.backoff.is_finite() {
            return bad(format!("backoff must be non-negative, got {}", self.backoff));
        }
        if !self.base_url.starts_with("http://") {
            return bad(format!("only http:// endpoints are supported, got {}", self.base_url));
        }
        Ok(())
    }

    pub fn url(&self, route: &str) -> String {
        format!("{}/{}/{}", self.base_url.trim_end_matches('/'), self.api_version, route)
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn backoff_delay(&self, attempt: u32) -> Duration {
        Duration::from_secs_f64(self.backoff * 2f64.powi(attempt.saturating_sub(1) as i32))
    }
}

/// Blocking JSON client shared by the three providers.
#[derive(Debug, Clone)]
pub struct HttpClient {
    endpoint: ProviderEndpoint,
    agent: ureq::Agent,
}

fn err(kind: ProviderErrorKind, msg: impl Into<String>) -> ProviderError {
    ProviderError::new(kind, msg)
}

fn status_kind(code: u16) -> ProviderErrorKind {
    match code {
        404 => ProviderErrorKind::UnknownReference,
        408 | 429 | 500..=599 => ProviderErrorKind::Transport,
        _ => ProviderErrorKind::Rejected,
    }
}

fn read_body(resp: ureq::Response) -> ProviderResult<String> {
    let mut body = String::new();
    resp.into_reader()
        .read_to_string(&mut body)
        .map_err(|e| err(ProviderErrorKind::Transport, format!("reading response: {e}")))?;
    Ok(body)
}

fn transport_error(t: &ureq::Transport) -> ProviderError {
    let timed_out = std::error::Error::source(t)
        .and_then(|s| s.downcast_ref::<std::io::Error>())
        .is_some_and(|e| matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock));
    let kind = if timed_out { ProviderErrorKind::Timeout } else { ProviderErrorKind::Transport };
    err(kind, t.to_string())
}

impl HttpClient {
    pub fn new(endpoint: ProviderEndpoint) -> ProviderResult<Self> {
        endpoint.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(endpoint.timeout))
            .build();
        Ok(HttpClient { endpoint, agent })
    }

    pub fn endpoint(&self) -> &ProviderEndpoint {
        &self.endpoint
    }

    fn once(&self, route: &str, request_id: &str, body: Option<&str>) -> ProviderResult<String> {
        let url = self.endpoint.url(route);
        let result = match body {
            Some(b) => self
                .agent
                .post(&url)
                .set(REQUEST_ID_HEADER, request_id)
                .set("Content-Type", "application/json")
                .send_string(b),
            None => self.agent.get(&url).set(REQUEST_ID_HEADER, request_id).call(),
        };
        match result {
            Ok(resp) => read_body(resp),
            Err(ureq::Error::Status(code, resp)) => {
                let text = read_body(resp).unwrap_or_default();
                let msg = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
                Err(err(status_kind(code), format!("{route}: HTTP {code}: {msg}")))
            }
            Err(ureq::Error::Transport(t)) => Err(transport_error(&t)),
        }
    }

    fn call<R: DeserializeOwned>(&self, route: &str, body: Option<String>) -> ProviderResult<R> {
        let request_id = uuid::Uuid::new_v4().to_string();
        let mut attempt = 0;
        let text = loop {
            match self.once(route, &request_id, body.as_deref()) {
                Ok(t) => break t,
                Err(e) if e.is_retriable() && attempt < self.endpoint.max_retries => {
                    attempt += 1;
                    std::thread::sleep(self.endpoint.backoff_delay(attempt));
                }
                Err(e) if e.is_retriable() && attempt > 0 => {
                    return Err(err(e.kind, format!("{} (after {attempt} retries)", e.message)));
                }
                Err(e) => return Err(e),
            }
        };
        serde_json::from_str(&text)
            .map_err(|e| err(ProviderErrorKind::Malformed, format!("{route}: bad response body: {e}")))
    }

    pub fn post<Q: Serialize, R: DeserializeOwned>(&self, route: &str, request: &Q) -> ProviderResult<R> {
        let body = serde_json::to_string(request).expect("request bodies serialize");
        self.call(route, Some(body))
    }

    pub fn get<R: DeserializeOwned>(&self, route: &str) -> ProviderResult<R> {
        self.call(route, None)
    }

    pub fn capabilities(&self) -> ProviderResult<ServerCapabilities> {
        let caps: ServerCapabilities = self.get("capabilities")?;
        if caps.common.max_image_edge < 64 {
            return Err(err(
                ProviderErrorKind::Malformed,
                format!("max_image_edge {} is below 64", caps.common.max_image_edge),
            ));
        }
        Ok(caps)
    }
}

fn caps_for(server: &ServerCapabilities, pick: impl Fn(&crate::wire::ModelNames) -> &String) -> ProviderCapabilities {
    let mut caps = server.common.clone();
    if let Some(m) = &server.models {
        caps.model_name = pick(m).clone();
    }
    caps
}

fn check_edge(caps: &ProviderCapabilities, frame: &Frame) -> ProviderResult<()> {
    let (w, h) = frame.dims();
    if w.max(h) > caps.max_image_edge as usize {
        return Err(err(
            ProviderErrorKind::Rejected,
            format!("{w}x{h} frame exceeds max_image_edge {}", caps.max_image_edge),
        ));
    }
    Ok(())
}

pub struct HttpFlow {
    client: HttpClient,
    caps: ProviderCapabilities,
}

impl HttpFlow {
    pub fn connect(endpoint: ProviderEndpoint) -> ProviderResult<Self> {
        let client = HttpClient::new(endpoint)?;
        let caps = caps_for(&client.capabilities()?, |m| &m.flow);
        Ok(HttpFlow { client, caps })
    }
}

impl FlowProvider for HttpFlow {
    fn capabilities(&self) -> ProviderCapabilities {
        self.caps.clone()
    }

    fn compute(&self, prev: &Frame, curr: &Frame) -> ProviderResult<FlowField> {
        if prev.dims() != curr.dims() {
            return Err(err(ProviderErrorKind::Rejected, "frame dimensions differ"));
        }
        check_edge(&self.caps, prev)?;
        let req = FlowRequest { prev_png_b64: frame_to_png_b64(prev), curr_png_b64: frame_to_png_b64(curr) };
        let resp: FlowResponse = self.client.post("flow", &req)?;
        let flow = b64_to_flow(&resp.flow_b64).map_err(|e| err(ProviderErrorKind::Malformed, e.to_string()))?;
        if flow.dims() != prev.dims() {
            return Err(err(
                ProviderErrorKind::Malformed,
                format!("flow is {:?}, frames are {:?}", flow.dims(), prev.dims()),
            ));
        }
        Ok(flow)
    }
}

pub struct HttpDetector {
    client: HttpClient,
    caps: ProviderCapabilities,
}

impl HttpDetector {
    pub fn connect(endpoint: ProviderEndpoint) -> ProviderResult<Self> {
        let client = HttpClient::new(endpoint)?;
        let caps = caps_for(&client.capabilities()?, |m| &m.detector);
        Ok(HttpDetector { client, caps })
    }
}

impl DetectorProvider for HttpDetector {
    fn capabilities(&self) -> ProviderCapabilities {
        self.caps.clone()
    }

    fn detect(&self, image: &Frame, queries: &[String], threshold: f64) -> ProviderResult<Vec<Detection>> {
        if queries.is_empty() {
            return Err(err(ProviderErrorKind::Rejected, "no queries"));
        }
        check_edge(&self.caps, image)?;
        let req = DetectRequest { image_png_b64: frame_to_png_b64(image), queries: queries.to_vec(), threshold };
        let resp: DetectResponse = self.client.post("detect", &req)?;
        let mut out = Vec::with_capacity(resp.detections.len());
        for d in &resp.detections {
            if d.label_index >= queries.len() || !d.score.is_finite() {
                return Err(err(
                    ProviderErrorKind::Malformed,
                    format!("detection {d:?} does not fit {} queries", queries.len()),
                ));
            }
            let det = d.to_detection().map_err(|e| err(ProviderErrorKind::Malformed, e.to_string()))?;
            if det.score >= threshold {
                out.push(det);
            }
        }
        Ok(out)
    }
}

/// Frame size and frame count.
type SessionShape = ((usize, usize), usize);

pub struct HttpSegmenter {
    client: HttpClient,
    caps: ProviderCapabilities,
    /// Frame size and count of the sessions opened through this client.
    sessions: Mutex<HashMap<String, SessionShape>>,
}

impl HttpSegmenter {
    pub fn connect(endpoint: ProviderEndpoint) -> ProviderResult<Self> {
        let client = HttpClient::new(endpoint)?;
        let caps = caps_for(&client.capabilities()?, |m| &m.segmenter);
        Ok(HttpSegmenter { client, caps, sessions: Mutex::default() })
    }
}

impl SegmenterProvider for HttpSegmenter {
    fn capabilities(&self) -> ProviderCapabilities {
        self.caps.clone()
    }

    fn open_session(&self, video: &VideoSequence) -> ProviderResult<SessionId> {
        check_edge(&self.caps, &video.frames()[0])?;
        let req = SessionRequest { frames: video.frames().iter().map(frame_to_png_b64).collect() };
        let resp: SessionResponse = self.client.post("session", &req)?;
        if resp.session_id.is_empty() {
            return Err(err(ProviderErrorKind::Malformed, "empty session id"));
        }
        self.sessions
            .lock()
            .expect("session table lock")
            .insert(resp.session_id.clone(), (video.dims(), video.len()));
        Ok(SessionId(resp.session_id))
    }

    fn track(&self, session: &SessionId, direction: Direction, prompts: &PromptTimeline) -> ProviderResult<MaskSeries> {
        let known = self.sessions.lock().expect("session table lock").get(&session.0).copied();
        if let Some((_, t)) = known {
            if t != prompts.frame_count() {
                return Err(err(ProviderErrorKind::Rejected, "prompt timeline length differs from the session video"));
            }
        }
        let req = TrackRequest { session_id: session.0.clone(), direction, prompts: prompts_to_wire(prompts) };
        let resp: TrackResponse = self.client.post("track", &req)?;
        let masks = wire_to_masks(prompts.frame_count(), &resp.masks)
            .map_err(|e| err(ProviderErrorKind::Malformed, e.to_string()))?;
        if let (Some((dims, _)), Some(got)) = (known, masks.dims()) {
            if dims != got {
                return Err(err(ProviderErrorKind::Malformed, format!("masks are {got:?}, video is {dims:?}")));
            }
        }
        Ok(masks)
    }
}

/// Lets one call at a time through to `inner`, for providers that do not
/// declare `supports_concurrent`.
pub struct Serialized<P> {
    inner: P,
    lock: Mutex<()>,
}

impl<P> Serialized<P> {
    pub fn new(inner: P) -> Self {
        Serialized { inner, lock: Mutex::new(()) }
    }

    fn guard(&self) -> std::sync::MutexGuard<'_, ()> {
        self.lock.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl<P: FlowProvider> FlowProvider for Serialized<P> {
    fn capabilities(&self) -> ProviderCapabilities {
        self.inner.capabilities()
    }

    fn compute(&self, prev: &Frame, curr: &Frame) -> ProviderResult<FlowField> {
        let _g = self.guard();
        self.inner.compute(prev, curr)
    }
}

impl<P: DetectorProvider> DetectorProvider for Serialized<P> {
    fn capabilities(&self) -> ProviderCapabilities {
        self.inner.capabilities()
    }

    fn detect(&self, image: &Frame, queries: &[String], threshold: f64) -> ProviderResult<Vec<Detection>> {
        let _g = self.guard();
        self.inner.detect(image, queries, threshold)
    }
}

impl<P: SegmenterProvider> SegmenterProvider for Serialized<P> {
    fn capabilities(&self) -> ProviderCapabilities {
        self.inner.capabilities()
    }

    fn open_session(&self, video: &VideoSequence) -> ProviderResult<SessionId> {
        let _g = self.guard();
        self.inner.open_session(video)
    }

    fn track(&self, session: &SessionId, direction: Direction, prompts: &PromptTimeline) -> ProviderResult<MaskSeries> {
        let _g = self.guard();
        self.inner.track(session, direction, prompts)
    }
}
