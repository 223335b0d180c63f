//! End-to-end tests of the `cavann` binary on a small four-site instance.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn small_config(dir: &Path) -> std::path::PathBuf {
    let text = r#"
schema_version = 1

[candidates]
n_min = 100
n_max = 129
l_max = 2

[lattice]
sites = 4
atoms = 2

[pose]
z0 = -2.0
x0 = -1.0
angle_deg = 47.0

[problem]
memories = [[1, 1, -1, -1], [1, -1, 1, -1]]
input = [1, 1, -1, 1]
nu = 0.7

[schedule]
taus = [5.0]
samples = 50

[spectrum]
levels = 4
grid_points = 41

[runtime]
integrator_dt = 0.002
"#;
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path
}

fn cavann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavann"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn dir_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn pipeline_is_deterministic_and_manifest_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let run = cavann(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "pipeline",
        ]);
        assert_success(&run);
    }
    // byte-identical artifacts across reruns
    let names = dir_files(&out_a);
    assert_eq!(names, dir_files(&out_b));
    for name in &names {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "file {name} differs between identical runs");
    }
    // manifest lists every emitted file with its hash
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<(String, String)> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            (
                f["name"].as_str().unwrap().to_string(),
                f["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let mut listed_names: Vec<String> = listed.iter().map(|(n, _)| n.clone()).collect();
    listed_names.sort();
    let mut expected = names.clone();
    expected.retain(|n| n != "manifest.json");
    assert_eq!(listed_names, expected, "manifest must cover every artifact");
    for (name, hash) in &listed {
        let bytes = fs::read(out_a.join(name)).unwrap();
        let mut hasher = <sha2::Sha256 as sha2::Digest>::new();
        sha2::Digest::update(&mut hasher, &bytes);
        let got: String = sha2::Digest::finalize(hasher)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(&got, hash, "hash mismatch for {name}");
    }
}

#[test]
fn results_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let one = tmp.path().join("t1");
    let many = tmp.path().join("t4");
    for (out, threads) in [(&one, "1"), (&many, "4")] {
        assert_success(&cavann(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "pipeline",
        ]));
    }
    for name in dir_files(&one) {
        if name == "manifest.json" {
            continue; // records the worker count itself
        }
        let a = fs::read(one.join(&name)).unwrap();
        let b = fs::read(many.join(&name)).unwrap();
        assert_eq!(a, b, "{name} depends on the thread count");
    }
}

#[test]
fn selection_reuse_matches_full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let full = tmp.path().join("full");
    let reused = tmp.path().join("reused");
    assert_success(&cavann(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        full.to_str().unwrap(),
        "pipeline",
    ]));
    assert_success(&cavann(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        reused.to_str().unwrap(),
        "pipeline",
        "--selection",
        full.join("selection.json").to_str().unwrap(),
    ]));
    for name in ["program.json", "spectrum.csv", "trajectory_tau5.csv", "reconstruction.json"] {
        let a = fs::read(full.join(name)).unwrap();
        let b = fs::read(reused.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs when reusing the stored selection");
    }
}

#[test]
fn staged_pipeline_stops_where_asked() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("staged");
    assert_success(&cavann(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "pipeline",
        "--stage",
        "synthesize",
    ]));
    let names = dir_files(&out);
    assert!(names.contains(&"selection.json".to_string()));
    assert!(names.contains(&"program.json".to_string()));
    assert!(!names.iter().any(|n| n.starts_with("trajectory")), "anneal must not have run");
}

#[test]
fn golden_flags_corrupted_bundle_and_missing_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    // healthy bundle assembled from the fixture's own values
    let fixture: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden.json"),
        )
        .unwrap(),
    )
    .unwrap();
    let mut bundle = serde_json::Map::new();
    for (name, entry) in fixture["quantities"].as_object().unwrap() {
        bundle.insert(name.clone(), entry["value"].clone());
    }
    let healthy = tmp.path().join("bundle.json");
    fs::write(
        &healthy,
        serde_json::to_string(&serde_json::json!({ "quantities": bundle })).unwrap(),
    )
    .unwrap();
    let run = cavann(&[
        "--out",
        out.to_str().unwrap(),
        "golden",
        "--bundle",
        healthy.to_str().unwrap(),
    ]);
    assert_success(&run);

    // corrupt one quantity: exit code must flip and the line must FAIL
    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&healthy).unwrap()).unwrap();
    doc["quantities"]["min_gap"] = serde_json::json!(0.9);
    let corrupted = tmp.path().join("corrupted.json");
    fs::write(&corrupted, serde_json::to_string(&doc).unwrap()).unwrap();
    let run = cavann(&[
        "--out",
        out.to_str().unwrap(),
        "golden",
        "--bundle",
        corrupted.to_str().unwrap(),
    ]);
    assert!(!run.status.success(), "corrupted bundle must fail");
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("min_gap") && stdout.contains("FAIL"), "{stdout}");

    // missing key: named error
    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&healthy).unwrap()).unwrap();
    doc["quantities"].as_object_mut().unwrap().remove("min_gap");
    let missing = tmp.path().join("missing.json");
    fs::write(&missing, serde_json::to_string(&doc).unwrap()).unwrap();
    let run = cavann(&[
        "--out",
        out.to_str().unwrap(),
        "golden",
        "--bundle",
        missing.to_str().unwrap(),
    ]);
    assert!(!run.status.success());
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("min_gap"), "{stderr}");
}

#[test]
fn json_config_front_end() {
    let tmp = tempfile::tempdir().unwrap();
    let json = serde_json::json!({
        "schema_version": 1,
        "lattice": { "sites": 4, "atoms": 2 },
        "problem": {
            "memories": [[1, 1, -1, -1], [1, -1, 1, -1]],
            "input": [1, 1, -1, 1],
        },
    });
    let path = tmp.path().join("cfg.json");
    fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
    let out = tmp.path().join("o");
    let run = cavann(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "hopfield-bounds",
    ]);
    assert_success(&run);
    assert!(out.join("hopfield_bounds.json").exists());
}

#[test]
fn invalid_config_is_rejected_with_field_name() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "schema_version = 1\n[lattice]\nsites = 4\natoms = 9\n").unwrap();
    let run = cavann(&["--config", path.to_str().unwrap(), "hopfield-bounds"]);
    assert!(!run.status.success());
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("lattice.atoms"), "{stderr}");
}
