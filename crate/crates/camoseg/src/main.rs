#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use camoseg::bench::{evaluate_predictions, run_sweep, BenchOptions};
use camoseg::config::{ConfigLoader, RunConfig, PRESETS};
use camoseg::conformance::conformance_check;
use camoseg::io::{load_video, save_mask_series, write_synthetic_video, Layout};
use camoseg::mock_server::{FaultPlan, MockBackends, MockServer};
use camoseg::providers::ProviderHub;
use camoseg::report::emit_report;
use camoseg_core::metrics::evaluate_video;
use camoseg_core::pipeline::run_video_sweep;
use camoseg_core::synth::{generate, standard_video_id, SceneScript};
use clap::{Args, Parser, Subcommand};

/// Zero-shot camouflaged object segmentation in videos.
#[derive(Parser)]
#[command(version = camoseg::bench::version(), about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Named preset applied over the defaults (see `presets list`).
    #[arg(long)]
    preset: Option<String>,
    /// TOML config file applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `section.key=value` override, repeatable; wins over everything else.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> camoseg::Result<RunConfig> {
        let mut loader = ConfigLoader::new();
        if let Some(p) = &self.preset {
            loader = loader.preset(p)?;
        }
        if let Some(f) = &self.config {
            loader = loader.file(f)?;
        }
        loader = loader.env(std::env::vars())?;
        for s in &self.sets {
            loader = loader.set(s)?;
        }
        loader.build()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Segment one video directory and write its masks.
    Run {
        video: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a dataset over the threshold sweep and write reports.
    Bench {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write predicted masks for every threshold.
        #[arg(long)]
        save_masks: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a directory of predicted masks against a dataset.
    Eval {
        /// Directory with one mask directory per video.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the report as JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a synthetic dataset in the MoCA-Mask layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        videos: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        /// Seed for sensor noise; video `i` uses `seed + i`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Standard deviation of per-pixel sensor noise in gray levels.
        #[arg(long, default_value_t = 0.0)]
        sensor_noise: f64,
        /// Write a mask every this many frames.
        #[arg(long, default_value_t = 1)]
        gt_stride: usize,
    },
    /// Shipped configuration presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Serve the provider protocol with heuristic backends.
    ServeMock {
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Check a provider server against the golden request suite.
    Conformance {
        #[arg(long)]
        url: String,
        /// Seconds per request.
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

/// Fatal errors exit with 1, per-video failures with 2.
enum Failure {
    Fatal(camoseg::Error),
    Videos(String),
}

impl From<camoseg::Error> for Failure {
    fn from(e: camoseg::Error) -> Self {
        Failure::Fatal(e)
    }
}

fn run(video: &Path, out: &Path, args: &ConfigArgs) -> Result<(), Failure> {
    let config = args.load()?;
    let hub = ProviderHub::connect(&config.providers)?;
    let per_video = || -> camoseg::Result<String> {
        let loaded = load_video(video, &config.io)?;
        let providers = hub.for_video(&loaded, &config.io)?;
        let t = config.detect.threshold;
        let mut sweep = run_video_sweep(&loaded.sequence, &config.pipeline(), providers.as_providers(), &[t])?;
        let masks = sweep.runs.remove(0).masks;
        save_mask_series(&masks, out)?;
        let mut line = format!(
            "{}: {} frames, route {:?}, masks on {} frames",
            loaded.id(),
            loaded.sequence.len(),
            sweep.cues.source,
            masks.len()
        );
        if let Some(truth) = &loaded.truth {
            let eval = evaluate_video(loaded.id(), Some(&masks), truth, &config.metrics)?;
            if let Some(m) = eval.mean {
                line += &format!(", mIoU {:.4}", m.iou);
            }
        }
        Ok(line)
    };
    match per_video() {
        Ok(line) => {
            println!("{line}");
            Ok(())
        }
        Err(e) => Err(Failure::Videos(format!("{}: {e}", video.display()))),
    }
}

fn bench(dataset: &Path, out: &Path, save_masks: bool, args: &ConfigArgs) -> Result<(), Failure> {
    let config = args.load()?;
    let record = run_sweep(&config, dataset, &BenchOptions { keep_masks: save_masks })?;
    emit_report(&record, out)?;
    for (i, t) in record.thresholds.iter().enumerate() {
        let miou = record.headline(i, camoseg_core::metrics::Metric::Iou);
        println!("threshold {t:.2}: mIoU {}", miou.map_or("n/a".into(), |v| format!("{v:.4}")));
    }
    println!("reports in {}", out.display());
    if record.failures.is_empty() {
        Ok(())
    } else {
        let list: Vec<_> = record.failures.iter().map(|f| format!("{}: {}", f.video, f.reason)).collect();
        Err(Failure::Videos(list.join("\n")))
    }
}

fn eval(pred: &Path, data: &Path, out: Option<&Path>, args: &ConfigArgs) -> Result<(), Failure> {
    let config = args.load()?;
    let report = evaluate_predictions(pred, data, &config.io, &config.metrics)?;
    let json = serde_json::to_string_pretty(&report).map_err(camoseg::Error::from)? + "\n";
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| camoseg::Error::Io { path: path.into(), source: e })?,
        None => print!("{json}"),
    }
    if let Some(h) = report.headline() {
        eprintln!("mIoU {:.4}, MAE {:.4} ({:?})", h.iou, h.mae, report.mode);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn synth(out: &Path, videos: usize, frames: usize, width: usize, height: usize, seed: u64, noise: f64, gt_stride: usize) -> Result<(), Failure> {
    let layout = Layout::default();
    for i in 0..videos {
        let mut script = SceneScript::standard(i, width, height, frames);
        script.sensor_noise = noise;
        let video = generate(&script, seed.wrapping_add(i as u64)).map_err(camoseg::Error::from)?;
        let dir = write_synthetic_video(out, &standard_video_id(i), &video, &layout, gt_stride)?;
        println!("{}", dir.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { video, out, config } => run(&video, &out, &config),
        Command::Bench { dataset, out, save_masks, config } => bench(&dataset, &out, save_masks, &config),
        Command::Eval { pred, data, out, config } => eval(&pred, &data, out.as_deref(), &config),
        Command::Synth { out, videos, frames, width, height, seed, sensor_noise, gt_stride } => {
            synth(&out, videos, frames, width, height, seed, sensor_noise, gt_stride)
        }
        Command::Presets { action: PresetAction::List } => {
            for p in PRESETS {
                println!("{:<20} {}", p.name, p.description());
            }
            Ok(())
        }
        Command::ShowConfig { config } => {
            print!("{}", config.load()?.to_toml());
            Ok(())
        }
        Command::ServeMock { addr, workers } => {
            let server = MockServer::bind(&addr, MockBackends::default(), FaultPlan::default(), workers)
                .map_err(|e| camoseg::Error::Io { path: addr.clone().into(), source: e })?;
            println!("serving on {}", server.base_url());
            server.join();
            Ok(())
        }
        Command::Conformance { url, timeout } => {
            if !(timeout > 0.0) {
                return Err(Failure::Fatal(camoseg::Error::Config("timeout must be positive".into())));
            }
            let report = conformance_check(&url, Duration::from_secs_f64(timeout));
            for c in &report.checks {
                println!("{} {:<18} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Videos(format!("{} checks failed", report.failures().count())))
            }
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Videos(msg)) => {
            eprintln!("failed:\n{msg}");
            ExitCode::from(2)
        }
    }
}
