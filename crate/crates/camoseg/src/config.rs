//! Run configuration: one TOML document with dotted sections.
//!
//! Layers, later ones winning: built-in defaults, a named preset, a config
//! file, `CAMOSEG_<SECTION>__<KEY>` environment variables, then `--set
//! section.key=value` overrides. Values are parsed as TOML where possible and
//! as plain strings otherwise. Unknown keys are errors.

use std::path::Path;

use camoseg_core::camera::CameraParams;
use camoseg_core::cues::BgsParams;
use camoseg_core::metrics::EvalFlags;
use camoseg_core::pipeline::{CueConfig, DetectConfig, MotionSource, PipelineConfig, TrackConfig};
use camoseg_core::synth::OracleKnobs;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::client::ProviderEndpoint;
use crate::error::{Error, Result};
use crate::io::Layout;

pub const ENV_PREFIX: &str = "CAMOSEG_";
pub const ORACLE: &str = "mock:oracle";
pub const HEURISTIC: &str = "mock:heuristic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    /// `mock:oracle`, `mock:heuristic` or an `http://` base URL.
    pub flow: String,
    pub detector: String,
    pub segmenter: String,
    /// Seconds per HTTP request.
    pub timeout: f64,
    pub max_retries: u32,
    /// Seconds before the first retry.
    pub backoff: f64,
    pub api_version: String,
    pub oracle: OracleKnobs,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        let e = ProviderEndpoint::default();
        ProvidersConfig {
            flow: ORACLE.into(),
            detector: ORACLE.into(),
            segmenter: ORACLE.into(),
            timeout: e.timeout,
            max_retries: e.max_retries,
            backoff: e.backoff,
            api_version: e.api_version,
            oracle: OracleKnobs::default(),
        }
    }
}

impl ProvidersConfig {
    pub fn endpoint(&self, base_url: &str) -> ProviderEndpoint {
        ProviderEndpoint {
            base_url: base_url.into(),
            timeout: self.timeout,
            max_retries: self.max_retries,
            api_version: self.api_version.clone(),
            backoff: self.backoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Videos processed in parallel; 0 uses every core.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub camera: CameraParams,
    pub cues: CueConfig,
    pub bgs: BgsParams,
    pub detect: DetectConfig,
    pub track: TrackConfig,
    pub metrics: EvalFlags,
    pub providers: ProvidersConfig,
    pub io: Layout,
    pub run: RunSection,
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            camera: self.camera,
            cues: self.cues,
            bgs: self.bgs,
            detect: self.detect.clone(),
            track: self.track,
            metrics: self.metrics,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline().validate()?;
        self.providers.oracle.validate()?;
        if self.cues.motion == MotionSource::None && (self.cues.mean_subtract || self.cues.use_momentum) {
            return Err(Error::config(
                "cues.mean_subtract and cues.use_momentum need a motion source; set them to false with cues.motion = \"none\"",
            ));
        }
        for (key, spec) in [
            ("providers.flow", &self.providers.flow),
            ("providers.detector", &self.providers.detector),
            ("providers.segmenter", &self.providers.segmenter),
        ] {
            if spec != ORACLE && spec != HEURISTIC && !spec.starts_with("http://") {
                return Err(Error::config(format!(
                    "{key} = {spec:?}: expected {ORACLE}, {HEURISTIC} or an http:// URL"
                )));
            }
        }
        self.providers
            .endpoint("http://validate")
            .validate()
            .map_err(|e| Error::config(format!("providers: {}", e.message)))?;
        if self.io.gt_stride == 0 {
            return Err(Error::config("io.gt_stride must be positive"));
        }
        Ok(())
    }

    /// TOML text of the full configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

impl Preset {
    /// The leading comment line.
    pub fn description(&self) -> &'static str {
        self.text.lines().next().and_then(|l| l.strip_prefix("# ")).unwrap_or("")
    }
}

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        &[$(Preset { name: $name, text: include_str!(concat!("../presets/", $name, ".toml")) }),*]
    };
}

pub const PRESETS: &[Preset] = presets![
    "a", "b", "c", "d", "e", "f", "g", "h", "i", "ours",
    "prompt_no_animal", "prompt_no_highlight", "prompt_no_negatives", "sam_box_only", "moca_filtered",
];

pub fn preset(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        Error::config(format!("unknown preset {name:?}; available: {}", names.join(", ")))
    })
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(text: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

fn set_path(root: &mut Table, dotted: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("bad key {dotted:?}")));
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for p in parents {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("{dotted}: {p} is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Collects configuration layers.
#[derive(Debug, Clone)]
pub struct ConfigLoader {
    table: Table,
}

impl Default for ConfigLoader {
    fn default() -> Self {
        let table = Table::try_from(RunConfig::default()).expect("defaults serialize");
        ConfigLoader { table }
    }
}

impl ConfigLoader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn toml(mut self, text: &str, origin: &str) -> Result<Self> {
        let over: Table = toml::from_str(text).map_err(|e| Error::config(format!("{origin}: {e}")))?;
        merge(&mut self.table, over);
        Ok(self)
    }

    pub fn preset(self, name: &str) -> Result<Self> {
        let p = preset(name)?;
        self.toml(p.text, &format!("preset {name}"))
    }

    pub fn file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.toml(&text, &path.display().to_string())
    }

    /// `CAMOSEG_DETECT__THRESHOLD=0.1` sets `detect.threshold`.
    pub fn env(mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut vars: Vec<_> = vars
            .into_iter()
            .filter_map(|(k, v)| Some((k.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase().replace("__", "."), v)))
            .collect();
        vars.sort();
        for (key, v) in vars {
            set_path(&mut self.table, &key, parse_value(&v))?;
        }
        Ok(self)
    }

    /// `section.key=value`.
    pub fn set(mut self, assignment: &str) -> Result<Self> {
        let (key, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {assignment:?} is not key=value")))?;
        set_path(&mut self.table, key.trim(), parse_value(v.trim()))?;
        Ok(self)
    }

    pub fn build(self) -> Result<RunConfig> {
        let config: RunConfig = Value::Table(self.table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}
