//! End-to-end tests that drive the compiled `regions` binary.

use std::path::Path;
use std::process::{Command, Output};

fn regions() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_regions"));
    // Tests control the seed environment explicitly.
    cmd.env_remove("REGION_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("the binary should run")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

/// Generates a scene PNG inside `dir` (relative paths throughout) and
/// returns the manifest line the binary printed.
fn synth_scene(dir: &Path, name: &str, extra: &[&str]) -> String {
    let output = run(regions()
        .current_dir(dir)
        .arg("synth")
        .arg(name)
        .args(extra));
    assert!(
        output.status.success(),
        "synth failed: {}",
        stderr_of(&output)
    );
    assert!(dir.join(name).exists(), "synth must write {name}");
    stdout_of(&output)
}

#[test]
fn synth_writes_png_and_manifest_line() {
    let dir = tempfile::tempdir().unwrap();
    let line = synth_scene(dir.path(), "scene.png", &["--blobs", "1"]);
    let value: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(value["image_id"], "scene");
    assert_eq!(value["heatmap_path"], "scene.png");
    assert_eq!(value["difficulty"], "easy");
    assert!(value["target_box"].is_array());
}

#[test]
fn synth_appends_to_a_manifest_file() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "a.png", &["--manifest", "m.jsonl"]);
    synth_scene(
        dir.path(),
        "b.png",
        &["--manifest", "m.jsonl", "--difficulty", "hard"],
    );
    let text = std::fs::read_to_string(dir.path().join("m.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("\"a\""));
    assert!(lines[1].contains("\"hard\""));
}

#[test]
fn synth_seed_determines_the_noise_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = ["--noise", "0.05", "--seed"];
    synth_scene(dir.path(), "s3a.png", &[&noisy[..], &["3"]].concat());
    synth_scene(dir.path(), "s3b.png", &[&noisy[..], &["3"]].concat());
    synth_scene(dir.path(), "s4.png", &[&noisy[..], &["4"]].concat());
    let a = std::fs::read(dir.path().join("s3a.png")).unwrap();
    let b = std::fs::read(dir.path().join("s3b.png")).unwrap();
    let c = std::fs::read(dir.path().join("s4.png")).unwrap();
    assert_eq!(a, b, "same seed must give identical PNG bytes");
    assert_ne!(a, c, "different seeds must draw different noise");
}

#[test]
fn synth_seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let noisy: &[&str] = &["--noise", "0.05"];
    // Seed from the environment...
    let output = run(regions()
        .current_dir(dir.path())
        .env("REGION_SEED", "5")
        .args(["synth", "env.png"])
        .args(noisy));
    assert!(output.status.success(), "{}", stderr_of(&output));
    // ...matches the explicit flag...
    synth_scene(dir.path(), "flag.png", &[noisy, &["--seed", "5"]].concat());
    // ...and the flag wins over a conflicting environment.
    let output = run(regions()
        .current_dir(dir.path())
        .env("REGION_SEED", "6")
        .args(["synth", "both.png", "--seed", "5"])
        .args(noisy));
    assert!(output.status.success(), "{}", stderr_of(&output));

    let from_env = std::fs::read(dir.path().join("env.png")).unwrap();
    let from_flag = std::fs::read(dir.path().join("flag.png")).unwrap();
    let from_both = std::fs::read(dir.path().join("both.png")).unwrap();
    assert_eq!(from_env, from_flag, "REGION_SEED must act as the seed");
    assert_eq!(from_both, from_flag, "an explicit --seed must win");
}

#[test]
fn synth_rejects_zero_blobs_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(regions()
        .current_dir(dir.path())
        .args(["synth", "none.png", "--blobs", "0"]));
    assert!(!output.status.success(), "zero blobs must be a usage error");
    assert!(stderr_of(&output).contains("--allow-empty"));
    assert!(!dir.path().join("none.png").exists());

    let output = run(regions().current_dir(dir.path()).args([
        "synth",
        "empty.png",
        "--blobs",
        "0",
        "--allow-empty",
    ]));
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert!(dir.path().join("empty.png").exists());
    assert!(
        stdout_of(&output).is_empty(),
        "no ground truth means no manifest line"
    );
}

#[test]
fn propose_emits_ranked_json() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "two.png", &["--blobs", "2"]);
    let output = run(regions()
        .current_dir(dir.path())
        .args(["propose", "two.png", "--restarts", "8"]));
    assert!(output.status.success(), "{}", stderr_of(&output));
    let records: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["rank"], 1);
    assert_eq!(records[1]["rank"], 2);
    assert!(records[0]["activation"].as_f64() > records[1]["activation"].as_f64());
    for record in records {
        assert_eq!(record["box"].as_array().unwrap().len(), 4);
        assert!(record["area"].as_u64().unwrap() >= 150);
    }
}

#[test]
fn propose_with_an_unreachable_threshold_is_empty_but_ok() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "one.png", &[]);
    let output = run(regions()
        .current_dir(dir.path())
        .args(["propose", "one.png", "--t-h", "1.0"]));
    assert!(output.status.success(), "empty results are not failures");
    let records: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 0);
}

#[test]
fn propose_is_byte_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "det.png", &["--blobs", "2"]);
    let run_once = || {
        let output = run(regions()
            .current_dir(dir.path())
            .args(["propose", "det.png", "--seed", "7", "--restarts", "4"]));
        assert!(output.status.success(), "{}", stderr_of(&output));
        output.stdout
    };
    assert_eq!(run_once(), run_once(), "same seed, same bytes");
}

#[test]
fn propose_writes_out_and_overlay_files() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "ov.png", &[]);
    let output = run(regions().current_dir(dir.path()).args([
        "propose",
        "ov.png",
        "--restarts",
        "4",
        "--out",
        "candidates.json",
        "--overlay",
        "overlay.png",
    ]));
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert!(stdout_of(&output).is_empty(), "--out redirects the JSON");
    let text = std::fs::read_to_string(dir.path().join("candidates.json")).unwrap();
    let records: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 1);
    let overlay = std::fs::read(dir.path().join("overlay.png")).unwrap();
    assert_eq!(&overlay[1..4], b"PNG", "overlay must be a PNG file");
}

#[test]
fn missing_heatmap_is_an_operational_failure() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(regions()
        .current_dir(dir.path())
        .args(["propose", "ghost.png"]));
    assert!(!output.status.success());
    assert!(stderr_of(&output).contains("ghost.png"));
}

#[test]
fn evaluate_prints_json_then_a_table() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "e1.png", &["--manifest", "m.jsonl"]);
    synth_scene(
        dir.path(),
        "e2.png",
        &["--blobs", "2", "--difficulty", "medium", "--manifest", "m.jsonl"],
    );
    let output = run(regions()
        .current_dir(dir.path())
        .args(["evaluate", "m.jsonl", "--restarts", "8"]));
    assert!(output.status.success(), "{}", stderr_of(&output));
    let text = stdout_of(&output);
    assert!(text.contains("\"per_difficulty\""));
    for needle in ["1st", "2nd", "3rd", "none", "easy", "medium", "hard", "overall"] {
        assert!(text.contains(needle), "table must mention {needle}");
    }
    assert!(text.contains("entries scored: 2"));
}

#[test]
fn evaluate_json_only_emits_a_single_json_document() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "j.png", &["--manifest", "m.jsonl"]);
    let output = run(regions().current_dir(dir.path()).args([
        "evaluate",
        "m.jsonl",
        "--restarts",
        "4",
        "--json-only",
    ]));
    assert!(output.status.success(), "{}", stderr_of(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output))
        .expect("the entire output must be one JSON document");
    assert_eq!(report["entries_scored"], 1);
    assert_eq!(report["per_difficulty"]["easy"]["first"], 1);
}

#[test]
fn evaluate_reports_missing_heatmaps_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "ok.png", &["--manifest", "m.jsonl"]);
    let ghost = r#"{"image_id":"ghost","heatmap_path":"ghost.png","expression":"x","target_box":[0,0,5,5],"difficulty":"easy"}"#;
    let manifest = dir.path().join("m.jsonl");
    let mut text = std::fs::read_to_string(&manifest).unwrap();
    text.push_str(ghost);
    text.push('\n');
    std::fs::write(&manifest, text).unwrap();

    let output = run(regions()
        .current_dir(dir.path())
        .args(["evaluate", "m.jsonl", "--restarts", "4"]));
    assert!(
        output.status.success(),
        "a skipped entry is a result, not a crash: {}",
        stderr_of(&output)
    );
    let text = stdout_of(&output);
    assert!(text.contains("\"ghost\""));
    assert!(text.contains("entries scored: 1 (1 skipped)"));
}

#[test]
fn unreadable_manifest_is_an_operational_failure() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(regions()
        .current_dir(dir.path())
        .args(["evaluate", "absent.jsonl"]));
    assert!(!output.status.success());
}

#[test]
fn debug_clusters_dumps_pipeline_internals() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "d.png", &["--blobs", "2"]);
    let output = run(regions()
        .current_dir(dir.path())
        .args(["debug-clusters", "d.png", "--restarts", "8"]));
    assert!(output.status.success(), "{}", stderr_of(&output));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(doc["width"], 96);
    assert_eq!(doc["height"], 96);
    assert_eq!(doc["active_components"], 2);
    assert_eq!(doc["requested_k"], 3);
    assert_eq!(doc["effective_k"], 3);
    let mask = doc["mask"].as_array().unwrap();
    assert_eq!(mask.len(), 96);
    assert!(mask.iter().all(|row| row.as_str().unwrap().len() == 96));
    assert!(mask.iter().any(|row| row.as_str().unwrap().contains('1')));
    let clusters = doc["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 2);
    for cluster in clusters {
        assert!(cluster["size"].as_u64().unwrap() >= 150);
        assert!(cluster["activation"].as_f64().unwrap() > 0.0);
        assert_eq!(cluster["box"].as_array().unwrap().len(), 4);
        assert_eq!(
            cluster["pixels"].as_array().unwrap().len() as u64,
            cluster["size"].as_u64().unwrap()
        );
    }
}
