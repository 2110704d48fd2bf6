use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn eegdif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegdif")).args(args).output().expect("running eegdif")
}

fn ok(args: &[&str]) -> String {
    let out = eegdif(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// Small recording plus a tiny trained denoiser.
fn fixture() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = |n| path(&dir, n);
    ok(&["--seed", "2", "synth", "--channels", "3", "--rate", "32", "--duration-seconds", "90", "--out-dir", &p("data")]);
    ok(&[
        "prepare", "--edf", &p("data/synth.edf"), "--annotations", &p("data/synth.annotations.txt"),
        "--channels", "all", "--window-seconds", "3", "--out-dir", &p("ds"),
    ]);
    ok(&[
        "train-diffusion", "--dataset", &p("ds"), "--image-height", "8", "--base-width", "4", "--depth", "1",
        "--time-embed-dim", "8", "--epochs", "1", "--max-images", "16", "--out", &p("den.ckpt"),
    ]);
    dir
}

fn forecast_args<'a>(dir: &'a TempDir, model: &'a str, out: &'a str) -> Vec<String> {
    let p = |n: &str| path(dir, n);
    [
        "forecast", "--edf", &p("data/synth.edf"), "--channels", "all", "--model", model, "--start-seconds", "10",
        "--horizon", "10", "--num-steps", "3", "--out", out,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run_forecast(dir: &TempDir, model: &str, out: &str) -> Output {
    let args = forecast_args(dir, model, out);
    eegdif(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn pipeline_outputs_have_expected_layout() {
    let dir = fixture();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ds/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["channels"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["window"], 96);
    assert_eq!(manifest["windows"].as_array().unwrap().len(), 30);
    let blob = dir.path().join("ds").join(manifest["windows"][0]["file"].as_str().unwrap());
    assert_eq!(fs::metadata(blob).unwrap().len(), 3 * 96 * 4);

    let out = run_forecast(&dir, &path(&dir, "den.ckpt"), &path(&dir, "f.csv"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time_index,channel,value_pred,value_true"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 30);
    assert!(rows[0].starts_with("0,Fp1,"));
    assert!(rows[29].starts_with("9,C3,"));

    let loss = fs::read_to_string(dir.path().join("den.loss.csv")).unwrap();
    assert_eq!(loss.lines().next(), Some("epoch,loss"));
    assert_eq!(loss.lines().count(), 2);
}

#[test]
fn eval_of_identical_forecasts_is_exact() {
    let dir = fixture();
    assert!(run_forecast(&dir, &path(&dir, "den.ckpt"), &path(&dir, "f.csv")).status.success());
    ok(&["eval", "--forecast", &path(&dir, "f.csv"), "--truth", &path(&dir, "f.csv"), "--out", &path(&dir, "e.csv")]);
    let text = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert!(text.contains("mae,average,0\n"), "{text}");
    assert!(text.contains("rmse,average,0\n"));
    assert!(text.contains("r2,average,1\n"));
}

#[test]
fn incompatible_checkpoints_are_rejected() {
    let dir = fixture();
    let good = fs::read(dir.path().join("den.ckpt")).unwrap();
    let write = |name: &str, bytes: &[u8]| {
        fs::write(dir.path().join(name), bytes).unwrap();
        path(&dir, name)
    };
    let mut magic = good.clone();
    magic[0] = b'X';
    let mut version = good.clone();
    let text = String::from_utf8_lossy(&version).into_owned();
    let at = text.find("\"format_version\":1").expect("version field");
    version[at + "\"format_version\":".len()] = b'9';
    let truncated = &good[..good.len() - 4];

    ok(&["train-classifier", "--dataset", &path(&dir, "ds"), "--epochs", "1", "--out", &path(&dir, "clf.ckpt")]);
    for model in [
        write("magic.ckpt", &magic),
        write("version.ckpt", &version),
        write("short.ckpt", truncated),
        path(&dir, "clf.ckpt"),
        path(&dir, "missing.ckpt"),
    ] {
        let out = run_forecast(&dir, &model, &path(&dir, "never.csv"));
        assert!(!out.status.success(), "{model} was accepted");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    assert!(!dir.path().join("never.csv").exists());
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = fixture();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# horizon from config\nhorizon-seconds = 0.5\nnum_steps = 2\n").unwrap();
    let c = cfg.to_str().unwrap();
    let p = |n| path(&dir, n);
    ok(&[
        "--config", c, "forecast", "--edf", &p("data/synth.edf"), "--channels", "all", "--model", &p("den.ckpt"),
        "--out", &p("a.csv"),
    ]);
    let rows = fs::read_to_string(dir.path().join("a.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 16 * 3);
    // A flag wins over the file.
    ok(&[
        "--config", c, "forecast", "--edf", &p("data/synth.edf"), "--channels", "all", "--model", &p("den.ckpt"),
        "--horizon", "5", "--out", &p("b.csv"),
    ]);
    let rows = fs::read_to_string(dir.path().join("b.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 5 * 3);
}

#[test]
fn missing_channel_and_bad_usage_fail_cleanly() {
    let dir = fixture();
    let p = |n| path(&dir, n);
    let out = eegdif(&["prepare", "--edf", &p("data/synth.edf"), "--channels", "Fp1,Oz", "--out-dir", &p("x")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Oz"));
    assert!(!Path::new(&p("x")).join("manifest.json").exists());

    let out = eegdif(&["forecast", "--edf", &p("data/synth.edf"), "--channels", "all", "--method", "lstm", "--out", &p("y.csv")]);
    assert!(!out.status.success());
    let out = eegdif(&["eval", "--out", &p("z.csv")]);
    assert!(!out.status.success());
}

#[test]
fn plot_writes_svg_panels() {
    let dir = fixture();
    assert!(run_forecast(&dir, &path(&dir, "den.ckpt"), &path(&dir, "f.csv")).status.success());
    ok(&["plot", "--forecast", &path(&dir, "f.csv"), "--channels", "F3,C3", "--out", &path(&dir, "p.svg")]);
    let svg = fs::read_to_string(dir.path().join("p.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains(">F3<") && svg.contains(">C3<") && !svg.contains(">Fp1<"));
}
