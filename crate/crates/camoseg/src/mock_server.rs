//! In-process HTTP server speaking the provider protocol.
//!
//! Backends default to the appearance heuristics from `camoseg_core::synth`
//! and can be swapped for any provider. [`FaultPlan`] injects the failures
//! the client and the conformance suite must cope with.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use camoseg_core::provider::{
    DetectorProvider, FlowProvider, ProviderCapabilities, ProviderError, ProviderErrorKind, SegmenterProvider,
    SessionId,
};
use camoseg_core::synth::{BlockMatchFlow, BlueHighlightDetector, BoxTracker};
use camoseg_core::VideoSequence;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tiny_http::{Header, Method, Request, Response, Server};

use crate::flo::MAGIC;
use crate::wire::{
    flow_to_b64, masks_to_wire, png_b64_to_frame, wire_to_timeline, DetectRequest, DetectResponse, ErrorBody,
    FlowRequest, FlowResponse, ModelNames, ServerCapabilities, SessionRequest, SessionResponse, TrackRequest,
    TrackResponse, WireDetection, REQUEST_ID_HEADER,
};

pub const SESSION_CAPACITY: usize = 4;
pub const DEDUPE_CAPACITY: usize = 256;

pub struct MockBackends {
    pub flow: Box<dyn FlowProvider>,
    pub detector: Box<dyn DetectorProvider>,
    pub segmenter: Box<dyn SegmenterProvider>,
}

impl Default for MockBackends {
    fn default() -> Self {
        MockBackends {
            flow: Box::new(BlockMatchFlow::default()),
            detector: Box::new(BlueHighlightDetector::default()),
            segmenter: Box::new(BoxTracker),
        }
    }
}

/// Deliberate misbehavior, for exercising clients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultPlan {
    /// Answer the first `n` requests with 503.
    pub fail_first: u64,
    /// Drop `label_index` from detections.
    pub omit_label_index: bool,
    /// Corrupt the magic of flow payloads.
    pub bad_flow_magic: bool,
    /// Sleep before answering each request.
    pub delay_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerStats {
    /// Requests received, including failed and deduplicated ones.
    pub received: u64,
    /// Requests that reached a backend.
    pub computed: u64,
}

struct Session {
    id: String,
    video: Arc<VideoSequence>,
    backend: SessionId,
}

struct Reply {
    status: u16,
    body: String,
}

/// Replies by key, plus keys in insertion order for eviction.
type DedupeCache = (HashMap<String, Arc<Reply>>, VecDeque<String>);

struct State {
    backends: MockBackends,
    faults: FaultPlan,
    sessions: Mutex<VecDeque<Session>>,
    dedupe: Mutex<DedupeCache>,
    next_session: AtomicU64,
    received: AtomicU64,
    computed: AtomicU64,
}

pub struct MockServer {
    addr: SocketAddr,
    server: Arc<Server>,
    state: Arc<State>,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    /// Serve on `127.0.0.1` at an ephemeral port.
    pub fn start(backends: MockBackends, faults: FaultPlan) -> std::io::Result<MockServer> {
        Self::bind("127.0.0.1:0", backends, faults, 4)
    }

    pub fn bind(addr: &str, backends: MockBackends, faults: FaultPlan, workers: usize) -> std::io::Result<MockServer> {
        let server = Arc::new(Server::http(addr).map_err(std::io::Error::other)?);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let state = Arc::new(State {
            backends,
            faults,
            sessions: Mutex::default(),
            dedupe: Mutex::default(),
            next_session: AtomicU64::new(1),
            received: AtomicU64::new(0),
            computed: AtomicU64::new(0),
        });
        let workers = (0..workers.max(1))
            .map(|_| {
                let (server, state) = (Arc::clone(&server), Arc::clone(&state));
                std::thread::spawn(move || {
                    while let Ok(req) = server.recv() {
                        state.handle(req);
                    }
                })
            })
            .collect();
        Ok(MockServer { addr, server, state, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> ServerStats {
        ServerStats {
            received: self.state.received.load(Ordering::SeqCst),
            computed: self.state.computed.load(Ordering::SeqCst),
        }
    }

    /// Block until the process is killed.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn error_reply(e: &ProviderError) -> Reply {
    let status = match e.kind {
        ProviderErrorKind::Rejected => 400,
        ProviderErrorKind::UnknownReference => 404,
        ProviderErrorKind::Malformed => 500,
        ProviderErrorKind::Transport | ProviderErrorKind::Timeout => 503,
    };
    Reply {
        status,
        body: serde_json::to_string(&ErrorBody { error: e.message.clone(), kind: e.kind }).expect("error body"),
    }
}

fn rejected(msg: impl std::fmt::Display) -> ProviderError {
    ProviderError::new(ProviderErrorKind::Rejected, msg.to_string())
}

fn parse<T: DeserializeOwned>(body: &str) -> Result<T, ProviderError> {
    serde_json::from_str(body).map_err(|e| rejected(format!("malformed request body: {e}")))
}

fn ok<T: Serialize>(v: &T) -> Result<Reply, ProviderError> {
    Ok(Reply { status: 200, body: serde_json::to_string(v).expect("response body") })
}

impl State {
    fn handle(&self, mut req: Request) {
        let nth = self.received.fetch_add(1, Ordering::SeqCst) + 1;
        let request_id = req
            .headers()
            .iter()
            .find(|h| h.field.equiv(REQUEST_ID_HEADER))
            .map(|h| h.value.to_string());
        let route = format!("{} {}", req.method(), req.url());
        let mut body = String::new();
        let reply = if let Err(e) = req.as_reader().read_to_string(&mut body) {
            Arc::new(error_reply(&rejected(format!("unreadable body: {e}"))))
        } else if nth <= self.faults.fail_first {
            let e = ProviderError::new(ProviderErrorKind::Transport, "injected failure");
            Arc::new(error_reply(&e))
        } else {
            if self.faults.delay_ms > 0 {
                std::thread::sleep(Duration::from_millis(self.faults.delay_ms));
            }
            match request_id {
                Some(id) => self.deduplicated(&format!("{route} {id}"), || self.route(req.method(), req.url(), &body)),
                None => Arc::new(self.route(req.method(), req.url(), &body)),
            }
        };
        let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
        let resp = Response::from_string(reply.body.clone())
            .with_status_code(reply.status)
            .with_header(header);
        let _ = req.respond(resp);
    }

    fn deduplicated(&self, key: &str, compute: impl FnOnce() -> Reply) -> Arc<Reply> {
        if let Some(hit) = self.dedupe.lock().expect("dedupe lock").0.get(key) {
            return Arc::clone(hit);
        }
        let reply = Arc::new(compute());
        let mut guard = self.dedupe.lock().expect("dedupe lock");
        let (map, order) = &mut *guard;
        if let Some(raced) = map.get(key) {
            return Arc::clone(raced);
        }
        map.insert(key.to_string(), Arc::clone(&reply));
        order.push_back(key.to_string());
        if order.len() > DEDUPE_CAPACITY {
            let old = order.pop_front().expect("non-empty");
            map.remove(&old);
        }
        reply
    }

    fn route(&self, method: &Method, url: &str, body: &str) -> Reply {
        let result = match (method, url.split('?').next().unwrap_or("")) {
            (Method::Get, "/v1/capabilities") => ok(&self.capabilities()),
            (Method::Post, "/v1/flow") => self.flow(body),
            (Method::Post, "/v1/detect") => self.detect(body),
            (Method::Post, "/v1/session") => self.session(body),
            (Method::Post, "/v1/track") => self.track(body),
            (_, path) => Err(ProviderError::new(ProviderErrorKind::UnknownReference, format!("no route {method} {path}"))),
        };
        result.unwrap_or_else(|e| error_reply(&e))
    }

    fn capabilities(&self) -> ServerCapabilities {
        let b = &self.backends;
        let all = [b.flow.capabilities(), b.detector.capabilities(), b.segmenter.capabilities()];
        ServerCapabilities {
            common: ProviderCapabilities {
                supports_concurrent: all.iter().all(|c| c.supports_concurrent),
                max_image_edge: all.iter().map(|c| c.max_image_edge).min().expect("three backends"),
                model_name: "camoseg-mock".into(),
            },
            models: Some(ModelNames {
                flow: all[0].model_name.clone(),
                detector: all[1].model_name.clone(),
                segmenter: all[2].model_name.clone(),
            }),
        }
    }

    fn flow(&self, body: &str) -> Result<Reply, ProviderError> {
        let req: FlowRequest = parse(body)?;
        let prev = png_b64_to_frame(&req.prev_png_b64, 0).map_err(rejected)?;
        let curr = png_b64_to_frame(&req.curr_png_b64, 1).map_err(rejected)?;
        self.computed.fetch_add(1, Ordering::SeqCst);
        let flow = self.backends.flow.compute(&prev, &curr)?;
        let mut flow_b64 = flow_to_b64(&flow);
        if self.faults.bad_flow_magic {
            let mut bytes = crate::flo::encode_flow(&flow);
            bytes[..4].copy_from_slice(b"XXXX");
            debug_assert_ne!(&bytes[..4], MAGIC);
            flow_b64 = base64::Engine::encode(&base64::engine::general_purpose::STANDARD, bytes);
        }
        ok(&FlowResponse { flow_b64 })
    }

    fn detect(&self, body: &str) -> Result<Reply, ProviderError> {
        let req: DetectRequest = parse(body)?;
        let image = png_b64_to_frame(&req.image_png_b64, 0).map_err(rejected)?;
        if req.queries.is_empty() {
            return Err(rejected("no queries"));
        }
        self.computed.fetch_add(1, Ordering::SeqCst);
        let dets = self.backends.detector.detect(&image, &req.queries, req.threshold)?;
        let resp = DetectResponse { detections: dets.iter().map(WireDetection::from).collect() };
        if self.faults.omit_label_index {
            let mut v = serde_json::to_value(&resp).expect("detect body");
            for d in v["detections"].as_array_mut().expect("array") {
                d.as_object_mut().expect("object").remove("label_index");
            }
            return ok(&v);
        }
        ok(&resp)
    }

    fn session(&self, body: &str) -> Result<Reply, ProviderError> {
        let req: SessionRequest = parse(body)?;
        let frames = req
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| png_b64_to_frame(f, i))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(rejected)?;
        let video = VideoSequence::new("session", frames).map_err(rejected)?;
        self.computed.fetch_add(1, Ordering::SeqCst);
        let backend = self.backends.segmenter.open_session(&video)?;
        let id = format!("session-{:06}", self.next_session.fetch_add(1, Ordering::SeqCst));
        let mut sessions = self.sessions.lock().expect("session lock");
        sessions.push_back(Session { id: id.clone(), video: Arc::new(video), backend });
        while sessions.len() > SESSION_CAPACITY {
            sessions.pop_front();
        }
        ok(&SessionResponse { session_id: id })
    }

    fn track(&self, body: &str) -> Result<Reply, ProviderError> {
        let req: TrackRequest = parse(body)?;
        let (video, backend) = {
            let mut sessions = self.sessions.lock().expect("session lock");
            let pos = sessions.iter().position(|s| s.id == req.session_id).ok_or_else(|| {
                ProviderError::new(ProviderErrorKind::UnknownReference, format!("unknown session {}", req.session_id))
            })?;
            // most recently used goes to the back
            let s = sessions.remove(pos).expect("position is valid");
            let out = (Arc::clone(&s.video), s.backend.clone());
            sessions.push_back(s);
            out
        };
        let timeline = wire_to_timeline(video.len(), &req.prompts).map_err(rejected)?;
        self.computed.fetch_add(1, Ordering::SeqCst);
        let masks = self.backends.segmenter.track(&backend, req.direction, &timeline)?;
        ok(&TrackResponse { masks: masks_to_wire(&masks) })
    }
}
