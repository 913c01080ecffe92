//! Dataset runs over a threshold sweep.
//!
//! Videos are the unit of parallelism. A video that fails to load or whose
//! providers fail is recorded in [`RunRecord::failures`] and the run goes on.
//! Results are sorted by video id before any report is built, so the record
//! does not depend on scheduling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use camoseg_core::camera::Route;
use camoseg_core::metrics::{evaluate_dataset, evaluate_video, EvalFlags, EvalReport, Metric, VideoEval};
use camoseg_core::pipeline::run_video_sweep;
use camoseg_core::MaskSeries;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{discover_videos, load_predictions, load_video, Layout};
use crate::providers::{ModelNames, ProviderHub};

/// Crate version plus `git describe` output when the build saw a repository.
pub fn version() -> String {
    match option_env!("BUILD_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => format!("{} ({d})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoSummary {
    pub video: String,
    pub frames: usize,
    pub annotated_frames: usize,
    pub route: Option<Route>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VideoFailure {
    pub video: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub report: EvalReport,
}

/// The single threshold that is best for the whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestThreshold {
    pub metric: String,
    pub threshold: f64,
    pub value: f64,
}

/// Every video at its own best threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerVideoBest {
    pub metric: String,
    pub value: Option<f64>,
    pub thresholds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoTiming {
    pub video: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub version: String,
    pub dataset: String,
    pub config: RunConfig,
    pub models: ModelNames,
    pub thresholds: Vec<f64>,
    pub videos: Vec<VideoSummary>,
    pub reports: Vec<ThresholdReport>,
    pub best_global: Vec<BestThreshold>,
    pub best_per_video: Vec<PerVideoBest>,
    pub failures: Vec<VideoFailure>,
    /// Wall-clock data; written apart from the record so reports stay
    /// reproducible.
    #[serde(skip)]
    pub timing: Vec<VideoTiming>,
    /// Predicted masks per threshold index, when requested.
    #[serde(skip)]
    pub masks: Vec<BTreeMap<String, MaskSeries>>,
}

impl RunRecord {
    pub fn report_at(&self, threshold: f64) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.threshold == threshold).map(|r| &r.report)
    }

    /// Headline value of `metric` at sweep position `i`.
    pub fn headline(&self, i: usize, metric: Metric) -> Option<f64> {
        self.reports.get(i)?.report.headline()?.get(metric)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub keep_masks: bool,
}

struct VideoResult {
    summary: VideoSummary,
    evals: Vec<VideoEval>,
    masks: Vec<MaskSeries>,
    seconds: f64,
}

fn process_video(dir: &Path, config: &RunConfig, hub: &ProviderHub, thresholds: &[f64]) -> Result<VideoResult> {
    let start = Instant::now();
    let video = load_video(dir, &config.io)?;
    let truth = video
        .truth
        .as_ref()
        .ok_or_else(|| Error::format(format!("no ground truth in {}", dir.display())))?;
    let providers = hub.for_video(&video, &config.io)?;
    let out = run_video_sweep(&video.sequence, &config.pipeline(), providers.as_providers(), thresholds)?;
    let evals = out
        .runs
        .iter()
        .map(|run| evaluate_video(video.id(), Some(&run.masks), truth, &config.metrics))
        .collect::<camoseg_core::Result<Vec<_>>>()?;
    Ok(VideoResult {
        summary: VideoSummary {
            video: video.id().to_string(),
            frames: video.sequence.len(),
            annotated_frames: truth.annotated_frames().len(),
            route: out.cues.source,
        },
        evals,
        masks: out.runs.into_iter().map(|r| r.masks).collect(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn better(metric: Metric, a: f64, b: f64) -> bool {
    if metric.higher_is_better() {
        a > b
    } else {
        a < b
    }
}

fn best_global(reports: &[ThresholdReport]) -> Vec<BestThreshold> {
    let mut out = Vec::new();
    for metric in Metric::ALL {
        let mut best: Option<(f64, f64)> = None;
        for r in reports {
            let Some(v) = r.report.headline().and_then(|h| h.get(metric)) else { continue };
            if best.is_none_or(|(_, b)| better(metric, v, b)) {
                best = Some((r.threshold, v));
            }
        }
        if let Some((threshold, value)) = best {
            out.push(BestThreshold { metric: metric.name().into(), threshold, value });
        }
    }
    out
}

fn best_per_video(results: &[VideoResult], thresholds: &[f64], config: &RunConfig) -> Result<Vec<PerVideoBest>> {
    let mut out = Vec::new();
    for metric in Metric::ALL {
        let mut chosen = Vec::new();
        let mut picks = BTreeMap::new();
        for r in results {
            let mut best: Option<(usize, f64)> = None;
            for (i, e) in r.evals.iter().enumerate() {
                let Some(v) = e.mean.as_ref().and_then(|m| m.get(metric)) else { continue };
                if best.is_none_or(|(_, b)| better(metric, v, b)) {
                    best = Some((i, v));
                }
            }
            let i = best.map_or(0, |(i, _)| i);
            if let Some(e) = r.evals.get(i) {
                chosen.push(e.clone());
                picks.insert(r.summary.video.clone(), thresholds[i]);
            }
        }
        let value = if chosen.is_empty() {
            None
        } else {
            EvalReport::from_videos(chosen, config.metrics)?.headline().and_then(|h| h.get(metric))
        };
        out.push(PerVideoBest { metric: metric.name().into(), value, thresholds: picks });
    }
    Ok(out)
}

fn dataset_name(root: &Path) -> String {
    root.canonicalize()
        .unwrap_or_else(|_| root.to_path_buf())
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Run every video under `root` once per threshold and evaluate.
pub fn run_sweep(config: &RunConfig, root: &Path, options: &BenchOptions) -> Result<RunRecord> {
    config.validate()?;
    let thresholds = config.pipeline().thresholds();
    let dirs: Vec<PathBuf> = discover_videos(root, &config.io)?;
    let hub = ProviderHub::connect(&config.providers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.workers)
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let outcomes: Vec<(PathBuf, Result<VideoResult>)> = pool.install(|| {
        dirs.par_iter()
            .map(|d| (d.clone(), process_video(d, config, &hub, &thresholds)))
            .collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (dir, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => failures.push(VideoFailure { video: dataset_name(&dir), reason: e.to_string() }),
        }
    }
    results.sort_by(|a, b| a.summary.video.cmp(&b.summary.video));
    failures.sort_by(|a, b| a.video.cmp(&b.video));

    let reports = thresholds
        .iter()
        .enumerate()
        .map(|(i, &threshold)| {
            let evals = results.iter().map(|r| r.evals[i].clone()).collect();
            Ok(ThresholdReport { threshold, report: EvalReport::from_videos(evals, config.metrics)? })
        })
        .collect::<Result<Vec<_>>>()?;

    let masks = if options.keep_masks {
        (0..thresholds.len())
            .map(|i| results.iter().map(|r| (r.summary.video.clone(), r.masks[i].clone())).collect())
            .collect()
    } else {
        Vec::new()
    };

    Ok(RunRecord {
        version: version(),
        dataset: dataset_name(root),
        config: config.clone(),
        models: hub.model_names(),
        best_global: best_global(&reports),
        best_per_video: best_per_video(&results, &thresholds, config)?,
        videos: results.iter().map(|r| r.summary.clone()).collect(),
        timing: results
            .iter()
            .map(|r| VideoTiming { video: r.summary.video.clone(), seconds: r.seconds })
            .collect(),
        thresholds,
        reports,
        failures,
        masks,
    })
}

/// Score prediction masks in `pred_root/<video>/` against the dataset at
/// `data_root`. Videos without a prediction directory score as empty.
pub fn evaluate_predictions(pred_root: &Path, data_root: &Path, layout: &Layout, flags: &EvalFlags) -> Result<EvalReport> {
    let mut gts = BTreeMap::new();
    let mut preds = BTreeMap::new();
    for dir in discover_videos(data_root, layout)? {
        let video = load_video(&dir, layout)?;
        let id = video.id().to_string();
        let truth = video
            .truth
            .ok_or_else(|| Error::format(format!("no ground truth in {}", dir.display())))?;
        let pred_dir = pred_root.join(&id);
        if pred_dir.is_dir() {
            preds.insert(id.clone(), load_predictions(&pred_dir, video.sequence.len())?);
        }
        gts.insert(id, truth);
    }
    Ok(evaluate_dataset(&preds, &gts, flags)?)
}
