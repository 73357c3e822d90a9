//! Subcommand behavior: exit-code ladder, file formats, and pipeline verbs.

use serde_json::json;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cadseq"))
}

fn cube_json() -> String {
    json!({ "steps": [{
        "profile": { "loops": [{ "curves": [
            { "line": { "x": 0.5, "y": 0.0 } },
            { "line": { "x": 0.5, "y": 0.5 } },
            { "line": { "x": 0.0, "y": 0.5 } },
            { "line": { "x": 0.0, "y": 0.0 } },
        ]}]},
        "extrude": {
            "theta": 0.0, "phi": 0.0, "gamma": 0.0,
            "ox": 0.0, "oy": 0.0, "oz": 0.0,
            "s": 1.0, "e_p": 0.5, "e_n": 0.0,
            "bool": "new", "extent": "one"
        }
    }]})
    .to_string()
}

fn open_loop_json() -> String {
    json!({ "steps": [{
        "profile": { "loops": [{ "curves": [
            { "line": { "x": 0.5, "y": 0.0 } },
            { "line": { "x": 0.3, "y": 0.3 } },
        ]}]},
        "extrude": {
            "theta": 0.0, "phi": 0.0, "gamma": 0.0,
            "ox": 0.0, "oy": 0.0, "oz": 0.0,
            "s": 1.0, "e_p": 0.5, "e_n": 0.0,
            "bool": "new", "extent": "one"
        }
    }]})
    .to_string()
}

#[test]
fn build_writes_a_twelve_face_box() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("cube.json");
    let obj = dir.path().join("cube.obj");
    std::fs::write(&seq, cube_json()).unwrap();

    let output = bin().arg("build").arg(&seq).arg(&obj).output().unwrap();
    assert!(output.status.success());
    let text = std::fs::read_to_string(&obj).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 12);
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8);
}

#[test]
fn open_loop_fails_validation_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("open.json");
    std::fs::write(&seq, open_loop_json()).unwrap();

    for verb in ["validate", "build"] {
        let mut cmd = bin();
        cmd.arg(verb).arg(&seq);
        if verb == "build" {
            cmd.arg(dir.path().join("out.obj"));
        }
        let output = cmd.output().unwrap();
        assert_eq!(output.status.code(), Some(2), "{verb} exit code");
        let stderr = String::from_utf8_lossy(&output.stderr);
        assert!(stderr.contains("OpenLoop"), "{verb} stderr: {stderr}");
    }
}

#[test]
fn missing_input_exits_one() {
    let output = bin()
        .args(["build", "/nonexistent/x.json", "/tmp/out.obj"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn valid_sequence_validates_ok() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("cube.json");
    std::fs::write(&seq, cube_json()).unwrap();
    let output = bin().arg("validate").arg(&seq).output().unwrap();
    assert!(output.status.success());
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "ok");
}

#[test]
fn tokenize_detokenize_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("cube.json");
    let tokens = dir.path().join("cube.tokens");
    std::fs::write(&seq, cube_json()).unwrap();

    let out = bin()
        .arg("tokenize")
        .arg(&seq)
        .arg("-o")
        .arg(&tokens)
        .output()
        .unwrap();
    assert!(out.status.success());
    let token_text = std::fs::read_to_string(&tokens).unwrap();
    assert!(token_text.trim().ends_with("262"), "stream ends with the end token");

    let out = bin().arg("detokenize").arg(&tokens).output().unwrap();
    assert!(out.status.success());
    let json_line = String::from_utf8_lossy(&out.stdout);
    // decoded sequence re-tokenizes to the identical stream
    let decoded = dir.path().join("decoded.json");
    std::fs::write(&decoded, json_line.trim()).unwrap();
    let out2 = bin().arg("tokenize").arg(&decoded).output().unwrap();
    assert!(out2.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out2.stdout).trim(),
        token_text.trim()
    );
}

#[test]
fn truncated_token_stream_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = dir.path().join("bad.tokens");
    std::fs::write(&tokens, "256 10 20\n").unwrap();
    let output = bin().arg("detokenize").arg(&tokens).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("TruncatedStream"));
}

#[test]
fn augment_writes_one_file_per_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("two_step.json");
    let two_step = {
        let mut v: serde_json::Value = serde_json::from_str(&cube_json()).unwrap();
        let step = v["steps"][0].clone();
        let mut second = step.clone();
        second["extrude"]["bool"] = json!("join");
        second["extrude"]["oz"] = json!(0.25);
        v["steps"].as_array_mut().unwrap().push(second);
        v.to_string()
    };
    std::fs::write(&seq, two_step).unwrap();

    let out_dir = dir.path().join("prefixes");
    let output = bin()
        .arg("augment")
        .arg(&seq)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "2");
    assert!(out_dir.join("two_step.p1.json").exists());
    assert!(out_dir.join("two_step.p2.json").exists());

    // each prefix file must itself validate
    for i in 1..=2 {
        let p = out_dir.join(format!("two_step.p{i}.json"));
        assert!(bin().arg("validate").arg(&p).output().unwrap().status.success());
    }
}

#[test]
fn split_assigns_and_augments_without_leakage() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::new();
    for i in 0..10 {
        let name = format!("m{i}.json");
        std::fs::write(dir.path().join(&name), cube_json()).unwrap();
        manifest.push_str(&format!(
            "{}\n",
            json!({ "id": format!("m{i}"), "root_id": format!("m{i}"), "split": "unassigned", "path": name })
        ));
    }
    let manifest_path = dir.path().join("roots.jsonl");
    std::fs::write(&manifest_path, manifest).unwrap();

    let out_path = dir.path().join("split.jsonl");
    let output = bin()
        .args(["split", "--manifest"])
        .arg(&manifest_path)
        .args(["--ratio", "0.9", "--seed", "3", "--augment-train", "-o"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = std::fs::read_to_string(&out_path).unwrap();
    let entries: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let train = entries.iter().filter(|e| e["split"] == "train").count();
    let test = entries.iter().filter(|e| e["split"] == "test").count();
    assert_eq!(test, 1);
    assert_eq!(train, 9); // single-step roots augment to themselves
    let train_roots: std::collections::BTreeSet<&str> = entries
        .iter()
        .filter(|e| e["split"] == "train")
        .map(|e| e["root_id"].as_str().unwrap())
        .collect();
    let test_roots: std::collections::BTreeSet<&str> = entries
        .iter()
        .filter(|e| e["split"] == "test")
        .map(|e| e["root_id"].as_str().unwrap())
        .collect();
    assert!(train_roots.is_disjoint(&test_roots));
}

#[test]
fn sample_writes_deterministic_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("cube.json");
    std::fs::write(&seq, cube_json()).unwrap();

    let a = dir.path().join("a.ply");
    let b = dir.path().join("b.ply");
    for out in [&a, &b] {
        let output = bin()
            .arg("sample")
            .arg(&seq)
            .args(["--points", "256", "--seed", "11", "-o"])
            .arg(out)
            .output()
            .unwrap();
        assert!(output.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn perturb_and_decimate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("cube.json");
    std::fs::write(&seq, cube_json()).unwrap();

    let cloud = dir.path().join("cloud.xyz");
    assert!(bin()
        .arg("sample")
        .arg(&seq)
        .args(["--points", "1000", "--seed", "1", "--format", "xyz", "-o"])
        .arg(&cloud)
        .output()
        .unwrap()
        .status
        .success());

    let noisy = dir.path().join("noisy.xyz");
    assert!(bin()
        .arg("perturb")
        .arg(&cloud)
        .args(["--sigma", "0.01", "--seed", "2", "-o"])
        .arg(&noisy)
        .output()
        .unwrap()
        .status
        .success());
    assert_eq!(
        std::fs::read_to_string(&noisy).unwrap().lines().count(),
        1000
    );

    let sparse = dir.path().join("sparse.xyz");
    assert!(bin()
        .arg("decimate")
        .arg(&cloud)
        .args(["--fraction", "0.95", "--seed", "3", "-o"])
        .arg(&sparse)
        .output()
        .unwrap()
        .status
        .success());
    assert_eq!(std::fs::read_to_string(&sparse).unwrap().lines().count(), 50);

    // out-of-range fraction exits with a validation error
    let output = bin()
        .arg("decimate")
        .arg(&cloud)
        .args(["--fraction", "1.5", "--seed", "3", "-o"])
        .arg(dir.path().join("x.xyz"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn poses_prints_eight_fixed_cameras() {
    let output = bin().arg("poses").output().unwrap();
    assert!(output.status.success());
    let poses: Vec<serde_json::Value> =
        serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(poses.len(), 8);
    for p in &poses {
        let pos = p["position"].as_array().unwrap();
        let r2: f64 = pos.iter().map(|c| c.as_f64().unwrap().powi(2)).sum();
        assert!((r2.sqrt() - 2.5).abs() < 1e-9);
        assert_eq!(p["look_at"], json!([0.0, 0.0, 0.0]));
    }
}

#[test]
fn caption_prep_emits_prefixed_stub_captions() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m0.json"), cube_json()).unwrap();
    let manifest_path = dir.path().join("roots.jsonl");
    std::fs::write(
        &manifest_path,
        format!(
            "{}\n",
            json!({ "id": "m0", "root_id": "m0", "split": "train", "path": "m0.json" })
        ),
    )
    .unwrap();

    let output = bin()
        .args(["caption-prep", "--manifest"])
        .arg(&manifest_path)
        .args(["--seed", "4", "--stub-captions"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let record: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&output.stdout).trim()).unwrap();
    assert_eq!(record["image_refs"].as_array().unwrap().len(), 4);
    assert!(record["prompt"]
        .as_str()
        .unwrap()
        .starts_with("These are the rendering images"));
    assert!(record["caption"]
        .as_str()
        .unwrap()
        .starts_with("Generate a CAD design with "));
}
