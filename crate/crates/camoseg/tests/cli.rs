use std::path::Path;
use std::process::{Command, Output};

fn camoseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camoseg"))
        .args(args)
        .env_remove("CAMOSEG_RUN__WORKERS")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn synth_bench_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = camoseg(&["synth", "--out", path(&data), "--videos", "2", "--frames", "8", "--width", "64", "--height", "64"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(data.join("synth_001/scene.json").is_file());

    let rep = dir.path().join("rep");
    let out = camoseg(&["bench", path(&data), "--out", path(&rep), "--save-masks", "--set", "detect.sweep=[]"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("threshold 0.09: mIoU 1.0000"), "{}", text(&out.stdout));

    let report = dir.path().join("eval.json");
    let out = camoseg(&["eval", "--pred", path(&rep.join("masks/0.09")), "--data", path(&data), "--out", path(&report)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["videos"].as_array().unwrap().len(), 2);
    assert!(text(&out.stderr).contains("mIoU 1.0000"));
}

#[test]
fn run_writes_masks_for_one_video() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(camoseg(&["synth", "--out", path(&data), "--videos", "1", "--frames", "6", "--width", "48", "--height", "48"]).status.success());
    let masks = dir.path().join("masks");
    let out = camoseg(&["run", path(&data.join("synth_000")), "--out", path(&masks)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("synth_000: 6 frames"));
    assert_eq!(std::fs::read_dir(&masks).unwrap().count(), 6);
}

#[test]
fn failed_video_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(camoseg(&["synth", "--out", path(&data), "--videos", "1", "--frames", "6", "--width", "48", "--height", "48"]).status.success());
    std::fs::create_dir_all(data.join("empty/Imgs")).unwrap();
    let rep = dir.path().join("rep");
    let out = camoseg(&["bench", path(&data), "--out", path(&rep), "--set", "detect.sweep=[]"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("empty"));
    assert!(std::fs::read_to_string(rep.join("summary.md")).unwrap().contains("- empty: "));
}

#[test]
fn bad_config_is_fatal() {
    let out = camoseg(&["show-config", "--set", "cues.momentum=1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = camoseg(&["show-config", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let out = camoseg(&["bench", "/nonexistent/dataset", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn show_config_reflects_layers() {
    let out = Command::new(env!("CARGO_BIN_EXE_camoseg"))
        .args(["show-config", "--preset", "h", "--set", "detect.threshold=0.05"])
        .env("CAMOSEG_RUN__WORKERS", "6")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out.stderr));
    let cfg: toml::Table = text(&out.stdout).parse().unwrap();
    assert_eq!(cfg["track"]["mode"].as_str(), Some("forward"));
    assert_eq!(cfg["detect"]["threshold"].as_float(), Some(0.05));
    assert_eq!(cfg["run"]["workers"].as_integer(), Some(6));
}

#[test]
fn presets_are_listed() {
    let out = camoseg(&["presets", "list"]);
    let s = text(&out.stdout);
    assert_eq!(s.lines().count(), 15);
    assert!(s.lines().any(|l| l.starts_with("moca_filtered")));
}

#[test]
fn conformance_against_nothing_fails() {
    let out = camoseg(&["conformance", "--url", "http://127.0.0.1:9", "--timeout", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stdout).contains("FAIL capabilities"));
}
