//! Turning `providers.*` config entries into provider objects.
//!
//! Heuristic and HTTP providers are built once and shared by every video.
//! Oracle providers answer from a synthetic video's ground truth, so they are
//! built per video from its `scene.json`.

use std::sync::Arc;

use camoseg_core::pipeline::Providers;
use camoseg_core::provider::{DetectorProvider, FlowProvider, ProviderCapabilities, SegmenterProvider};
use camoseg_core::synth::{generate, oracle_providers, BlockMatchFlow, BlueHighlightDetector, BoxTracker, SyntheticVideo};
use serde::Serialize;

use crate::client::{HttpDetector, HttpFlow, HttpSegmenter, Serialized};
use crate::config::{ProvidersConfig, HEURISTIC, ORACLE};
use crate::error::{Error, Result};
use crate::io::{read_scene, Layout, LoadedVideo};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelNames {
    pub flow: String,
    pub detector: String,
    pub segmenter: String,
}

fn connect_error(spec: &str, e: camoseg_core::provider::ProviderError) -> Error {
    Error::config(format!("cannot use provider {spec}: {e}"))
}

macro_rules! build_shared {
    ($spec:expr, $config:expr, $heuristic:expr, $http:ident, $trait:ident) => {{
        let spec: &str = $spec;
        if spec == ORACLE {
            None
        } else if spec == HEURISTIC {
            Some(Arc::new($heuristic) as Arc<dyn $trait>)
        } else {
            let p = $http::connect($config.endpoint(spec)).map_err(|e| connect_error(spec, e))?;
            if p.capabilities().supports_concurrent {
                Some(Arc::new(p) as Arc<dyn $trait>)
            } else {
                Some(Arc::new(Serialized::new(p)) as Arc<dyn $trait>)
            }
        }
    }};
}

/// Providers shared across videos; `None` marks an oracle slot.
pub struct ProviderHub {
    config: ProvidersConfig,
    flow: Option<Arc<dyn FlowProvider>>,
    detector: Option<Arc<dyn DetectorProvider>>,
    segmenter: Option<Arc<dyn SegmenterProvider>>,
}

impl ProviderHub {
    pub fn connect(config: &ProvidersConfig) -> Result<Self> {
        Ok(ProviderHub {
            config: config.clone(),
            flow: build_shared!(&config.flow, config, BlockMatchFlow::default(), HttpFlow, FlowProvider),
            detector: build_shared!(&config.detector, config, BlueHighlightDetector::default(), HttpDetector, DetectorProvider),
            segmenter: build_shared!(&config.segmenter, config, BoxTracker, HttpSegmenter, SegmenterProvider),
        })
    }

    pub fn needs_scene(&self) -> bool {
        self.flow.is_none() || self.detector.is_none() || self.segmenter.is_none()
    }

    /// Model names; oracle slots report the oracle provider names.
    pub fn model_names(&self) -> ModelNames {
        let name = |c: Option<ProviderCapabilities>, oracle: &str| c.map_or_else(|| oracle.to_string(), |c| c.model_name);
        ModelNames {
            flow: name(self.flow.as_ref().map(|p| p.capabilities()), "oracle-flow"),
            detector: name(self.detector.as_ref().map(|p| p.capabilities()), "oracle-detector"),
            segmenter: name(self.segmenter.as_ref().map(|p| p.capabilities()), "oracle-tracker"),
        }
    }

    pub fn for_video(&self, video: &LoadedVideo, layout: &Layout) -> Result<VideoProviders> {
        let oracle = if self.needs_scene() { Some(oracle_for(video, layout, &self.config)?) } else { None };
        let (of, od, os) = match oracle {
            Some((f, d, s)) => (
                Some(Arc::new(f) as Arc<dyn FlowProvider>),
                Some(Arc::new(d) as Arc<dyn DetectorProvider>),
                Some(Arc::new(s) as Arc<dyn SegmenterProvider>),
            ),
            None => (None, None, None),
        };
        Ok(VideoProviders {
            flow: self.flow.clone().or(of).expect("oracle built when a slot is empty"),
            detector: self.detector.clone().or(od).expect("oracle built when a slot is empty"),
            segmenter: self.segmenter.clone().or(os).expect("oracle built when a slot is empty"),
        })
    }
}

type OracleSet = (
    camoseg_core::synth::OracleFlow,
    camoseg_core::synth::OracleDetector,
    camoseg_core::synth::OracleTracker,
);

/// Regenerate the synthetic video behind `video` and check that it matches
/// the frames on disk.
pub fn regenerate(video: &LoadedVideo, layout: &Layout) -> Result<SyntheticVideo> {
    let path = video.dir.join(&layout.scene_file);
    if !path.is_file() {
        return Err(Error::config(format!(
            "{ORACLE} providers need {}, which synthetic datasets carry",
            path.display()
        )));
    }
    let scene = read_scene(&path)?;
    let synth = generate(&scene.script, scene.seed)?;
    if synth.video.frames() != video.sequence.frames() {
        return Err(Error::format(format!(
            "{}: frames on disk differ from the ones the scene renders",
            video.dir.display()
        )));
    }
    Ok(synth)
}

fn oracle_for(video: &LoadedVideo, layout: &Layout, config: &ProvidersConfig) -> Result<OracleSet> {
    Ok(oracle_providers(regenerate(video, layout)?, &config.oracle)?)
}

/// The three providers for one video.
#[derive(Clone)]
pub struct VideoProviders {
    pub flow: Arc<dyn FlowProvider>,
    pub detector: Arc<dyn DetectorProvider>,
    pub segmenter: Arc<dyn SegmenterProvider>,
}

impl VideoProviders {
    pub fn as_providers(&self) -> Providers<'_> {
        Providers { flow: &*self.flow, detector: &*self.detector, segmenter: &*self.segmenter }
    }
}
