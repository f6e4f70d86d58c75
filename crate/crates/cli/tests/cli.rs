//! Behavioral tests of the `frag` binary: exit codes, JSON shapes, schedule
//! validity, determinism, and the worked grouping fixture.

use frag_core::tensor::{read_latents, write_latents, LatentSequence};
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn frag() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frag"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("frag_cli_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "command failed: stdout={} stderr={}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn simulate_small(dir: &Path, pattern: &str, steps: &str) {
    let output = frag()
        .args(["simulate", "--out"])
        .arg(dir)
        .args([
            "--pattern",
            pattern,
            "--frames",
            "8",
            "--width",
            "32",
            "--height",
            "32",
            "--channels",
            "2",
            "--r-min",
            "2",
            "--r-max",
            "14",
            "--steps",
            steps,
        ])
        .output()
        .unwrap();
    stdout_json(&output);
}

#[test]
fn run_produces_valid_deterministic_schedule() {
    let dir = temp_dir("run");
    let traj = dir.join("traj");
    simulate_small(&traj, "two-scene", "999,800,600,400,200,19");

    let schedule = dir.join("schedule.json");
    let output = frag()
        .args(["run", "--input"])
        .arg(&traj)
        .args(["--out"])
        .arg(&schedule)
        .output()
        .unwrap();
    let summary = stdout_json(&output);
    assert_eq!(summary["version"], 1);
    assert_eq!(summary["steps"], 6);

    let validate = frag()
        .args(["validate", "--schedule"])
        .arg(&schedule)
        .output()
        .unwrap();
    assert_eq!(stdout_json(&validate)["valid"], true);

    // identical invocation is byte-identical
    let first = fs::read(&schedule).unwrap();
    let rerun = frag()
        .args(["run", "--input"])
        .arg(&traj)
        .args(["--out"])
        .arg(&schedule)
        .output()
        .unwrap();
    assert!(rerun.status.success());
    assert_eq!(first, fs::read(&schedule).unwrap());

    // head step has no previous tensor: its radius is the d0 default
    let doc: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(doc["steps"][0]["radius"], 6.0);
    assert_eq!(doc["steps"][0]["moment"], Value::Null);
}

#[test]
fn run_single_step_records_fallback_radius() {
    let dir = temp_dir("single");
    let traj = dir.join("traj");
    simulate_small(&traj, "smooth-gradient", "500");

    let schedule = dir.join("schedule.json");
    let output = frag()
        .args(["run", "--input"])
        .arg(&traj)
        .args(["--out"])
        .arg(&schedule)
        .output()
        .unwrap();
    stdout_json(&output);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&schedule).unwrap()).unwrap();
    assert_eq!(doc["steps"].as_array().unwrap().len(), 1);
    assert_eq!(doc["steps"][0]["radius"], 6.0);
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = temp_dir("config");
    let traj = dir.join("traj");
    simulate_small(&traj, "smooth-gradient", "900,500");

    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "d0 = 3.5\nmin_group = 1 # comment\n").unwrap();

    let schedule = dir.join("a.json");
    let output = frag()
        .args(["run", "--input"])
        .arg(&traj)
        .args(["--out"])
        .arg(&schedule)
        .args(["--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    stdout_json(&output);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&schedule).unwrap()).unwrap();
    assert_eq!(doc["config"]["d0"], 3.5);
    assert_eq!(doc["config"]["min_group"], 1);

    let output = frag()
        .args(["run", "--input"])
        .arg(&traj)
        .args(["--out"])
        .arg(&schedule)
        .args(["--config"])
        .arg(&cfg)
        .args(["--d0", "7.25"])
        .output()
        .unwrap();
    stdout_json(&output);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&schedule).unwrap()).unwrap();
    assert_eq!(doc["config"]["d0"], 7.25, "flag overrides file");
}

#[test]
fn enhanced_tensors_are_written_and_group_constant() {
    let dir = temp_dir("enhance");
    let traj = dir.join("traj");
    simulate_small(&traj, "two-scene", "999,500");

    let enhanced = dir.join("enhanced");
    let schedule = dir.join("schedule.json");
    let output = frag()
        .args(["run", "--input"])
        .arg(&traj)
        .args(["--out"])
        .arg(&schedule)
        .args(["--operator", "group-mean", "--enhanced-out"])
        .arg(&enhanced)
        .output()
        .unwrap();
    stdout_json(&output);

    let doc: Value = serde_json::from_str(&fs::read_to_string(&schedule).unwrap()).unwrap();
    let z = read_latents(enhanced.join("z_t999.frag")).unwrap();
    // within each group every frame equals the group mean, so frames match
    for group in doc["steps"][0]["groups"].as_array().unwrap() {
        let (start, end) = (
            group[0].as_u64().unwrap() as usize,
            group[1].as_u64().unwrap() as usize,
        );
        for l in start..=end {
            assert_eq!(z.frame(l), z.frame(start), "frame {l} differs from {start}");
        }
    }
}

#[test]
fn group_matches_worked_fixture() {
    let dir = temp_dir("fixture");
    // pooled scalar frames 0.0, 0.1, 0.6, 0.8: consecutive distances
    // 0.1, 0.5, 0.2
    let fixture =
        LatentSequence::from_fn(4, 1, 1, 1, |l, _, _, _| [0.0, 0.1, 0.6, 0.8][l]).unwrap();
    let path = dir.join("fixture.frag");
    write_latents(&fixture, &path).unwrap();

    let output = frag()
        .args(["group", "--input"])
        .arg(&path)
        .args(["--n-cut", "3", "--min-group", "1"])
        .output()
        .unwrap();
    let body = stdout_json(&output);
    assert_eq!(body["groups"], serde_json::json!([[0, 1], [2, 3]]));

    let scheduled = frag()
        .args(["group", "--input"])
        .arg(&path)
        .args(["--t", "999", "--min-group", "1"])
        .output()
        .unwrap();
    // n_cut = n_root = 3 at t = T-1
    assert_eq!(stdout_json(&scheduled)["n_cut"], 3);
}

#[test]
fn metrics_psnr_inf_sentinel() {
    let dir = temp_dir("metrics");
    let z = LatentSequence::from_fn(2, 8, 8, 1, |l, y, x, _| (l + y + x) as f64 * 0.01).unwrap();
    let path = dir.join("z.frag");
    write_latents(&z, &path).unwrap();

    let output = frag()
        .args(["metrics", "psnr", "--a"])
        .arg(&path)
        .args(["--b"])
        .arg(&path)
        .output()
        .unwrap();
    let body = stdout_json(&output);
    assert_eq!(body["value"], "inf");
    assert_eq!(body["proxy"], false);

    let consistency = frag()
        .args(["metrics", "consistency", "--a"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(stdout_json(&consistency)["proxy"], true);
}

#[test]
fn filter_heatmap_center_is_white() {
    let dir = temp_dir("filter");
    let heat = dir.join("heat.pgm");
    let output = frag()
        .args([
            "filter",
            "--r",
            "8",
            "--sigma",
            "0.25",
            "--width",
            "64",
            "--height",
            "64",
            "--export-heatmap",
        ])
        .arg(&heat)
        .output()
        .unwrap();
    stdout_json(&output);
    let bytes = fs::read(&heat).unwrap();
    let header_len = b"P5\n64 64\n255\n".len();
    assert_eq!(bytes[header_len + 32 * 64 + 32], 255);
}

#[test]
fn validate_rejects_corrupted_schedule() {
    let dir = temp_dir("validate");
    let traj = dir.join("traj");
    simulate_small(&traj, "smooth-gradient", "900,500");
    let schedule = dir.join("schedule.json");
    let output = frag()
        .args(["run", "--input"])
        .arg(&traj)
        .args(["--out"])
        .arg(&schedule)
        .output()
        .unwrap();
    stdout_json(&output);

    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&schedule).unwrap()).unwrap();
    doc["steps"][0]["groups"] = serde_json::json!([[0, 2], [4, 7]]); // gap at 3
    fs::write(&schedule, serde_json::to_vec(&doc).unwrap()).unwrap();

    let validate = frag()
        .args(["validate", "--schedule"])
        .arg(&schedule)
        .output()
        .unwrap();
    assert_eq!(validate.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&validate.stderr).unwrap();
    assert_eq!(err["error"], "invalid-schedule");
    assert_eq!(err["version"], 1);
}

#[test]
fn exit_codes_and_error_json() {
    // usage error: unknown metric name
    let dir = temp_dir("exitcodes");
    let z = LatentSequence::zeros(1, 4, 4, 1).unwrap();
    let path = dir.join("z.frag");
    write_latents(&z, &path).unwrap();
    let usage = frag()
        .args(["metrics", "nonsense", "--a"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(2));

    // usage error from clap: missing required flag
    let missing = frag().args(["spectrum"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    // data error: unreadable tensor file
    let data = frag()
        .args(["spectrum", "--input"])
        .arg(dir.join("missing.frag"))
        .output()
        .unwrap();
    assert_eq!(data.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&data.stderr).unwrap();
    assert_eq!(err["version"], 1);
    assert!(err["error"].is_string());
}

#[test]
fn spectrum_emits_csv_rows() {
    let dir = temp_dir("spectrum");
    let z = LatentSequence::from_fn(1, 16, 16, 1, |_, y, x, _| ((x + y) % 3) as f64 * 0.2).unwrap();
    let path = dir.join("z.frag");
    write_latents(&z, &path).unwrap();

    let output = frag()
        .args(["spectrum", "--input"])
        .arg(&path)
        .args(["--bins", "4"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "bin_center_f,mean_magnitude");
    assert_eq!(lines.len(), 5);
    for line in &lines[1..] {
        let (f, m) = line.split_once(',').unwrap();
        assert!(f.parse::<f64>().is_ok() && m.parse::<f64>().is_ok());
    }
}

#[test]
fn images_input_runs_degenerate_pipeline() {
    let dir = temp_dir("images");
    let frames = dir.join("frames");
    fs::create_dir_all(&frames).unwrap();
    for i in 0..4 {
        let mut bytes = b"P5\n16 16\n255\n".to_vec();
        bytes.extend((0..256).map(|p| ((p + i * 40) % 256) as u8));
        fs::write(frames.join(format!("f{i}.pgm")), bytes).unwrap();
    }

    let schedule = dir.join("schedule.json");
    let output = frag()
        .args(["run", "--input"])
        .arg(&frames)
        .args(["--images", "--steps", "999,500,19", "--out"])
        .arg(&schedule)
        .output()
        .unwrap();
    stdout_json(&output);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&schedule).unwrap()).unwrap();
    // the same tensor at every step: differentials vanish, radius stays d0
    for step in doc["steps"].as_array().unwrap() {
        assert_eq!(step["radius"], 6.0);
    }
}

#[test]
fn filter_apply_writes_refined_tensor() {
    let dir = temp_dir("apply");
    let z = LatentSequence::from_fn(2, 16, 16, 1, |l, y, x, _| {
        0.5 + 0.3 * (((x + 3 * y + l) % 7) as f64 / 7.0 - 0.5)
    })
    .unwrap();
    let input = dir.join("in.frag");
    write_latents(&z, &input).unwrap();

    let out = dir.join("out.frag");
    let output = frag()
        .args(["filter", "--r", "2", "--sigma", "0.25", "--apply"])
        .arg(&input)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    stdout_json(&output);

    let refined = read_latents(&out).unwrap();
    assert_eq!(refined.shape(), z.shape());
    // a narrow low-pass removes energy but keeps the mean
    let energy = |t: &LatentSequence| t.data().iter().map(|v| v * v).sum::<f64>();
    assert!(energy(&refined) < energy(&z));
    let mean = |t: &LatentSequence| t.data().iter().sum::<f64>() / t.data().len() as f64;
    assert!((mean(&refined) - mean(&z)).abs() < 1e-6);
}

#[test]
fn masked_psnr_ignores_masked_out_region() {
    let dir = temp_dir("maskcli");
    let a = LatentSequence::from_fn(1, 8, 8, 1, |_, y, x, _| (y * 8 + x) as f64 / 64.0).unwrap();
    // differ only in the left half, which the mask excludes
    let b = LatentSequence::from_fn(1, 8, 8, 1, |_, y, x, _| {
        (y * 8 + x) as f64 / 64.0 + if x < 4 { 0.2 } else { 0.0 }
    })
    .unwrap();
    let (pa, pb) = (dir.join("a.frag"), dir.join("b.frag"));
    write_latents(&a, &pa).unwrap();
    write_latents(&b, &pb).unwrap();

    let mut mask = b"P5\n8 8\n255\n".to_vec();
    mask.extend((0..64).map(|i| if i % 8 >= 4 { 255u8 } else { 0 }));
    let mask_path = dir.join("mask.pgm");
    fs::write(&mask_path, mask).unwrap();

    let output = frag()
        .args(["metrics", "masked-psnr", "--a"])
        .arg(&pa)
        .args(["--b"])
        .arg(&pb)
        .args(["--mask"])
        .arg(&mask_path)
        .output()
        .unwrap();
    assert_eq!(stdout_json(&output)["value"], "inf");
}

#[test]
fn simulate_accepts_base_file() {
    let dir = temp_dir("basefile");
    let base = LatentSequence::from_fn(4, 16, 16, 1, |l, y, x, _| {
        0.4 + 0.1 * ((x + y + l) % 5) as f64
    })
    .unwrap();
    let base_path = dir.join("base.frag");
    write_latents(&base, &base_path).unwrap();

    let traj = dir.join("traj");
    let output = frag()
        .args(["simulate", "--out"])
        .arg(&traj)
        .args(["--base-file"])
        .arg(&base_path)
        .args(["--steps", "900,100", "--r-min", "1.5", "--r-max", "9"])
        .output()
        .unwrap();
    stdout_json(&output);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(traj.join("trajectory.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["pattern"], Value::Null);
    assert_eq!(manifest["spec"]["frames"], 4);
    assert!(traj.join("z_t900.frag").exists() && traj.join("z_t100.frag").exists());
    let r_star = manifest["steps"][0]["r_star"].as_f64().unwrap();
    assert!((r_star - (1.5 + 7.5 * 0.1)).abs() < 1e-9);
}
