//! End-to-end checks of the command-line surface and the file formats.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tubekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tubekit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let output = tubekit(args);
    assert!(
        output.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
}

fn synth_dataset(dir: &Path, videos: u32, untrimmed: f64, seed: u64) {
    run_ok(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--videos",
        &videos.to_string(),
        "--untrimmed-fraction",
        &untrimmed.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
}

#[test]
fn synth_link_trim_eval_chain_matches_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_dataset(&data, 12, 0.5, 99);

    let detections = data.join("detections.jsonl");
    let gt = data.join("gt.jsonl");
    let paths = dir.path().join("paths.jsonl");
    let proposals = dir.path().join("proposals.jsonl");
    let report = dir.path().join("report.json");

    run_ok(&[
        "link",
        "--detections",
        detections.to_str().unwrap(),
        "--out",
        paths.to_str().unwrap(),
    ]);
    run_ok(&[
        "trim",
        "--paths",
        paths.to_str().unwrap(),
        "--out",
        proposals.to_str().unwrap(),
    ]);
    run_ok(&[
        "eval",
        "--proposals",
        proposals.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);

    // The composed chain and the one-shot pipeline agree byte for byte.
    let piped = dir.path().join("piped");
    run_ok(&[
        "pipeline",
        "--detections",
        detections.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--out",
        piped.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(&proposals).unwrap(),
        fs::read(piped.join("proposals.jsonl")).unwrap()
    );
    assert_eq!(
        fs::read(&report).unwrap(),
        fs::read(piped.join("report.json")).unwrap()
    );
}

#[test]
fn proposals_reread_and_rescored_reproduce_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_dataset(&data, 10, 1.0, 123);

    let out = dir.path().join("run");
    run_ok(&[
        "pipeline",
        "--detections",
        data.join("detections.jsonl").to_str().unwrap(),
        "--gt",
        data.join("gt.jsonl").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);

    // Round-trip stability: eval on the serialized proposals writes an
    // identical report.
    let second = dir.path().join("report2.json");
    run_ok(&[
        "eval",
        "--proposals",
        out.join("proposals.jsonl").to_str().unwrap(),
        "--gt",
        data.join("gt.jsonl").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(out.join("report.json")).unwrap(),
        fs::read(&second).unwrap()
    );
}

#[test]
fn train_infer_pipeline_runs_from_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_dataset(&data, 6, 0.0, 5);

    // A deliberately tiny schedule: this checks plumbing, not quality.
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"k": 3, "boxes_per_cell": 1, "epochs": 2, "batch_size": 16, "seed": 5}"#,
    )
    .unwrap();

    let model = dir.path().join("model.json");
    run_ok(&[
        "train-toy",
        "--features",
        data.join("features.jsonl").to_str().unwrap(),
        "--gt",
        data.join("gt.jsonl").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(model.exists());

    let detections = dir.path().join("inferred.jsonl");
    run_ok(&[
        "infer",
        "--model",
        model.to_str().unwrap(),
        "--features",
        data.join("features.jsonl").to_str().unwrap(),
        "--out",
        detections.to_str().unwrap(),
    ]);

    let out = dir.path().join("run");
    run_ok(&[
        "pipeline",
        "--model",
        model.to_str().unwrap(),
        "--features",
        data.join("features.jsonl").to_str().unwrap(),
        "--gt",
        data.join("gt.jsonl").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--no-trim",
    ]);
    assert!(out.join("proposals.jsonl").exists());
    assert!(out.join("report.json").exists());

    // Model-driven pipeline equals detections-driven pipeline on the same
    // inferred boxes.
    let out2 = dir.path().join("run2");
    run_ok(&[
        "pipeline",
        "--detections",
        detections.to_str().unwrap(),
        "--gt",
        data.join("gt.jsonl").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
        "--no-trim",
    ]);
    assert_eq!(
        fs::read(out.join("proposals.jsonl")).unwrap(),
        fs::read(out2.join("proposals.jsonl")).unwrap()
    );
}

#[test]
fn recurrent_toy_training_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_dataset(&data, 3, 0.0, 6);

    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"k": 2, "boxes_per_cell": 1, "epochs": 1, "seed": 6}"#,
    )
    .unwrap();
    let model = dir.path().join("lstm.json");
    run_ok(&[
        "train-toy",
        "--features",
        data.join("features.jsonl").to_str().unwrap(),
        "--gt",
        data.join("gt.jsonl").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--head",
        "lstm",
        "--hidden",
        "16",
        "--out",
        model.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&model).unwrap();
    assert!(text.contains("\"kind\": \"lstm\""));
}

#[test]
fn fused_streams_flow_through_link() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    synth_dataset(&a, 4, 0.0, 7);
    synth_dataset(&b, 4, 0.0, 7);

    let paths = dir.path().join("paths.jsonl");
    run_ok(&[
        "link",
        "--detections",
        a.join("detections.jsonl").to_str().unwrap(),
        "--fuse",
        b.join("detections.jsonl").to_str().unwrap(),
        "--out",
        paths.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&paths).unwrap();
    assert!(!text.trim().is_empty());
}

#[test]
fn format_violation_reports_file_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        concat!(
            r#"{"video_id": "v", "frame": 0, "boxes": []}"#,
            "\n",
            r#"{"video_id": "v", "frame": 1, "boxes": [{"x": 0.5, "y": 0.5, "w": "wide", "h": 0.2, "conf": 1.0, "ac": 0.5, "bg": 0.5}]}"#,
            "\n"
        ),
    )
    .unwrap();
    let out = dir.path().join("paths.jsonl");
    let output = tubekit(&[
        "link",
        "--detections",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!output.status.success());

    let stderr = String::from_utf8_lossy(&output.stderr);
    let record: serde_json::Value =
        serde_json::from_str(stderr.trim()).expect("stderr is machine-readable JSON");
    assert_eq!(record["error"], "format");
    assert!(record["file"].as_str().unwrap().ends_with("bad.jsonl"));
    assert_eq!(record["line"], 2);
    assert_eq!(record["field"], "boxes[0].w");
}

#[test]
fn incomplete_video_frames_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("gap.jsonl");
    fs::write(
        &bad,
        concat!(
            r#"{"video_id": "v", "frame": 0, "boxes": []}"#,
            "\n",
            r#"{"video_id": "v", "frame": 2, "boxes": []}"#,
            "\n"
        ),
    )
    .unwrap();
    let out = dir.path().join("paths.jsonl");
    let output = tubekit(&[
        "link",
        "--detections",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let record: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&output.stderr).trim()).unwrap();
    assert_eq!(record["error"], "format");
    assert_eq!(record["field"], "frame");
}

#[test]
fn empty_frame_video_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let detections = dir.path().join("det.jsonl");
    fs::write(
        &detections,
        concat!(
            r#"{"video_id": "v", "frame": 0, "boxes": [{"x": 0.5, "y": 0.5, "w": 0.3, "h": 0.3, "conf": 0.9, "ac": 0.8, "bg": 0.1}]}"#,
            "\n",
            r#"{"video_id": "v", "frame": 1, "boxes": []}"#,
            "\n"
        ),
    )
    .unwrap();
    let gt = dir.path().join("gt.jsonl");
    fs::write(
        &gt,
        concat!(
            r#"{"video_id": "v", "class": "action", "start": 0, "end": 1, "boxes": [{"x": 0.5, "y": 0.5, "w": 0.3, "h": 0.3}, {"x": 0.5, "y": 0.5, "w": 0.3, "h": 0.3}]}"#,
            "\n"
        ),
    )
    .unwrap();

    let out = dir.path().join("run");
    let output = tubekit(&[
        "pipeline",
        "--detections",
        detections.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("warning"), "expected a warning, got: {stderr}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["recall_at_0_5"], 0.0);
    assert_eq!(
        fs::read_to_string(out.join("proposals.jsonl")).unwrap().trim(),
        ""
    );
}
