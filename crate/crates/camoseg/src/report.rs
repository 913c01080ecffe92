//! Writing a [`RunRecord`] to disk.
//!
//! `report.json`, `report.csv` and `summary.md` depend only on the record and
//! are byte-identical for identical runs. Wall-clock times go to
//! `timing.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use camoseg_core::metrics::{Aggregates, Metric};
use serde::Serialize;

use crate::bench::{RunRecord, VideoTiming};
use crate::error::{Error, Result};
use crate::io::save_mask_series;

pub const CSV_COLUMNS: [&str; 10] = [
    "threshold",
    "video",
    "frames",
    "iou",
    "dice",
    "mae",
    "s_measure",
    "e_measure",
    "weighted_f",
    "success_rate",
];

/// Row label of the dataset aggregate in `report.csv`.
pub const ALL_VIDEOS: &str = "ALL";

fn num(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

fn fixed(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

fn metric_cells(a: Option<&Aggregates>) -> impl Iterator<Item = String> + '_ {
    Metric::ALL.into_iter().map(move |m| num(a.and_then(|a| a.get(m))))
}

pub fn render_csv(record: &RunRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format(format!("report.csv: {e}"));
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for tr in &record.reports {
        let t = format!("{}", tr.threshold);
        for v in &tr.report.videos {
            let mut row = vec![t.clone(), v.video_id.clone(), v.frames.len().to_string()];
            row.extend(metric_cells(v.mean.as_ref()));
            row.push(num(v.success_rate));
            w.write_record(&row).map_err(err)?;
        }
        let frames: usize = tr.report.videos.iter().map(|v| v.frames.len()).sum();
        let mut row = vec![t, ALL_VIDEOS.to_string(), frames.to_string()];
        row.extend(metric_cells(tr.report.headline()));
        row.push(num(tr.report.success_rate));
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(format!("report.csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

pub fn render_summary(record: &RunRecord) -> String {
    let mut s = String::new();
    let c = &record.config;
    let _ = writeln!(s, "# camoseg benchmark: {}\n", record.dataset);
    let _ = writeln!(s, "- version: {}", record.version);
    let _ = writeln!(
        s,
        "- models: flow `{}`, detector `{}`, segmenter `{}`",
        record.models.flow, record.models.detector, record.models.segmenter
    );
    let _ = writeln!(
        s,
        "- cues: motion `{:?}`, mean subtraction {}, momentum {}",
        c.cues.motion, c.cues.mean_subtract, c.cues.use_momentum
    );
    let _ = writeln!(s, "- tracking: `{:?}`, prompts `{:?}`", c.track.mode, c.track.prompt_mode);
    let _ = writeln!(s, "- aggregation: `{:?}`\n", c.metrics.agg_mode);

    let _ = writeln!(s, "## mIoU of each video\n");
    let mut header = String::from("| Video |");
    let mut rule = String::from("|---|");
    for t in &record.thresholds {
        let _ = write!(header, " {t:.2} |");
        rule.push_str("---:|");
    }
    let _ = writeln!(s, "{header}\n{rule}");
    for (vi, v) in record.videos.iter().enumerate() {
        let _ = write!(s, "| {} |", v.video);
        for tr in &record.reports {
            let iou = tr.report.videos.get(vi).and_then(|e| e.mean.as_ref()).map(|m| m.iou);
            let _ = write!(s, " {} |", fixed(iou));
        }
        s.push('\n');
    }
    let _ = write!(s, "| **mean** |");
    for i in 0..record.reports.len() {
        let _ = write!(s, " {} |", fixed(record.headline(i, Metric::Iou)));
    }
    s.push_str("\n\n");

    let _ = writeln!(s, "## Best threshold per metric\n");
    let _ = writeln!(s, "Global: one threshold for the whole dataset.\n");
    let _ = writeln!(s, "| Metric | Threshold | Value |\n|---|---:|---:|");
    for b in &record.best_global {
        let _ = writeln!(s, "| {} | {:.2} | {:.4} |", b.metric, b.threshold, b.value);
    }
    let _ = writeln!(s, "\nPer video: each video at its own best threshold.\n");
    let _ = writeln!(s, "| Metric | Value |\n|---|---:|");
    for b in &record.best_per_video {
        let _ = writeln!(s, "| {} | {} |", b.metric, fixed(b.value));
    }

    let _ = writeln!(s, "\n## Failures\n");
    if record.failures.is_empty() {
        let _ = writeln!(s, "None.");
    }
    for f in &record.failures {
        let _ = writeln!(s, "- {}: {}", f.video, f.reason);
    }
    s
}

#[derive(Serialize)]
struct Timing<'a> {
    total_seconds: f64,
    videos: &'a [VideoTiming],
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write `report.json`, `report.csv`, `summary.md` and `timing.json`, plus
/// `masks/<threshold>/<video>/` when the record carries masks.
pub fn emit_report(record: &RunRecord, out_dir: impl AsRef<Path>) -> Result<()> {
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("report.json"), &(serde_json::to_string_pretty(record)? + "\n"))?;
    write(&out.join("report.csv"), &render_csv(record)?)?;
    write(&out.join("summary.md"), &render_summary(record))?;
    let timing = Timing {
        total_seconds: record.timing.iter().map(|t| t.seconds).sum(),
        videos: &record.timing,
    };
    write(&out.join("timing.json"), &(serde_json::to_string_pretty(&timing)? + "\n"))?;
    for (t, masks) in record.thresholds.iter().zip(&record.masks) {
        for (video, series) in masks {
            save_mask_series(series, out.join("masks").join(format!("{t:.2}")).join(video))?;
        }
    }
    Ok(())
}
