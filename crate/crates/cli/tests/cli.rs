//! Integration tests for the binary: determinism, run-directory handoff
//! between subcommands, sweep resumption, and error exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn topomap_raw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topomap"))
        .args(args)
        .output()
        .expect("spawn topomap")
}

/// Runs the binary, asserts success, and returns the printed run directory.
fn topomap(args: &[&str]) -> PathBuf {
    let out = topomap_raw(args);
    assert!(
        out.status.success(),
        "topomap {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

fn write_scene_config(dir: &Path, out_dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let cfg = serde_json::json!({
        "seed": 42,
        "out_dir": out_dir,
        "scene": {
            "locations": [[2.0, 5.0], [10.0, 5.0], [18.0, 5.0],
                          [2.0, 15.0], [10.0, 15.0], [18.0, 15.0]],
            "segments_per_location": 2,
            "samples_per_segment": 10
        }
    });
    std::fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn simulate_reruns_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_scene_config(tmp.path(), &tmp.path().join("out"));
    let mut dirs = Vec::new();
    for out in ["a", "b"] {
        dirs.push(topomap(&[
            "-c",
            config.to_str().unwrap(),
            "--out-dir",
            tmp.path().join(out).to_str().unwrap(),
            "simulate",
        ]));
    }
    for name in ["wifi.csv", "accel.csv", "labels.csv", "segments-truth.csv"] {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identically-seeded runs");
    }
}

#[test]
fn identical_segments_produce_zero_matrix() {
    let tmp = tempfile::tempdir().unwrap();

    // Two stationary windows whose observations are copies of each other.
    let mut wifi = String::from("timestamp_ms,device,bssid,ssid,rssi\n");
    for base in [0i64, 60_000] {
        for k in 0..10i64 {
            let t = base + 2_000 * k;
            wifi.push_str(&format!("{t},dev,aa:01,net,{}\n", -50 - (k % 3)));
            wifi.push_str(&format!("{t},dev,aa:02,net,{}\n", -70 + (k % 2)));
        }
    }
    let wifi_path = tmp.path().join("wifi.csv");
    std::fs::write(&wifi_path, wifi).unwrap();

    let segments_path = tmp.path().join("segments.csv");
    std::fs::write(
        &segments_path,
        "segment_id,device,start_ms,end_ms,n_observations\n\
         0,dev,0,20000,20\n\
         1,dev,60000,80000,20\n",
    )
    .unwrap();

    let cfg = serde_json::json!({
        "wifi": wifi_path,
        "estimator": "pmf",
        "measure": "symkl",
        "out_dir": tmp.path().join("out"),
    });
    let config = tmp.path().join("config.json");
    std::fs::write(&config, serde_json::to_vec(&cfg).unwrap()).unwrap();

    topomap(&[
        "-c",
        config.to_str().unwrap(),
        "fingerprint",
        "--segments",
        segments_path.to_str().unwrap(),
    ]);
    let run_dir = topomap(&["-c", config.to_str().unwrap(), "distances"]);

    let csv = std::fs::read_to_string(run_dir.join("distances.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "segment_id,0,1");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        for cell in line.split(',').skip(1) {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.0, "line {line}");
        }
    }
}

#[test]
fn manifests_name_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_scene_config(tmp.path(), &tmp.path().join("out"));
    let run_dir = topomap(&["-c", config.to_str().unwrap(), "segment"]);

    let manifest: serde_json::Value = serde_json::from_reader(
        std::fs::File::open(run_dir.join("run_manifest.segment.json")).unwrap(),
    )
    .unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    let dir_name = run_dir.file_name().unwrap().to_str().unwrap();
    assert_eq!(dir_name, format!("run-{hash}"));
    assert_eq!(manifest["command"], "segment");
    let artifacts: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(artifacts.contains(&"boundaries.csv"));
    assert!(artifacts.contains(&"segments.csv"));
    assert!(manifest["config"]["seed"] == 42);
}

#[test]
fn pipeline_chains_through_run_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_scene_config(tmp.path(), &tmp.path().join("out"));
    let c = config.to_str().unwrap();

    let run_dir = topomap(&["-c", c, "segment"]);
    for cmd in ["fingerprint", "distances", "evaluate", "embed"] {
        assert_eq!(topomap(&["-c", c, cmd]), run_dir);
    }

    let report: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(run_dir.join("report.json")).unwrap())
            .unwrap();
    let n = report["n_segments"].as_u64().unwrap();
    assert!(n >= 6, "expected at least one segment per location, got {n}");
    let auc = report["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    assert!(report["correlations"]["pearson"].as_f64().is_some());

    let embedding = std::fs::read_to_string(run_dir.join("embedding.csv")).unwrap();
    assert_eq!(embedding.lines().count() as u64, n + 1);
    assert!(embedding.lines().next().unwrap().starts_with("segment_id,x,y"));
    assert!(run_dir.join("embedding.svg").exists());
    assert!(run_dir.join("roc.csv").exists());
}

#[test]
fn sweep_resumes_from_marker_and_restarts_on_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_scene_config(tmp.path(), &tmp.path().join("out"));
    let c = config.to_str().unwrap();

    let run_dir = topomap(&["-c", c, "sweep"]);
    let csv_path = run_dir.join("sweep.csv");
    let marker_path = run_dir.join("sweep.progress.json");
    let full = std::fs::read_to_string(&csv_path).unwrap();

    // Truncate to ten completed rows and plant a sentinel value in the
    // first one; a resumed run must keep it, trusting the marker prefix.
    let keep = |csv: &str, marker_rows: usize| {
        let mut lines: Vec<String> =
            csv.lines().take(marker_rows + 1).map(String::from).collect();
        let mut fields: Vec<&str> = lines[1].split(',').collect();
        fields[4] = "0.123456789";
        lines[1] = fields.join(",");
        lines.join("\n") + "\n"
    };
    std::fs::write(&csv_path, keep(&full, 10)).unwrap();
    let mut marker: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(&marker_path).unwrap()).unwrap();
    let completed = marker["completed"].as_array().unwrap()[..10].to_vec();
    marker["completed"] = serde_json::Value::Array(completed);
    std::fs::write(&marker_path, serde_json::to_vec(&marker).unwrap()).unwrap();

    topomap(&["-c", c, "sweep"]);
    let resumed = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(resumed.lines().count(), 85);
    assert!(
        resumed.lines().nth(1).unwrap().contains("0.123456789"),
        "resume should keep rows already recorded in the marker"
    );

    // A marker for some other config must be ignored: fresh rows replace
    // the sentinel and the result matches the original end-to-end run.
    std::fs::write(&csv_path, keep(&full, 10)).unwrap();
    marker["config_hash"] = serde_json::Value::String("000000000000".into());
    std::fs::write(&marker_path, serde_json::to_vec(&marker).unwrap()).unwrap();

    topomap(&["-c", c, "sweep"]);
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), full);
}

#[test]
fn errors_carry_exit_codes_and_json_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();

    // Usage error: unreadable config file.
    let out = topomap_raw(&["-c", "/nonexistent/config.json", "segment"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["category"], "config");
    assert_eq!(err["error"]["exit_code"], 1);

    // Usage error: clap rejects an unknown enum value.
    let out = topomap_raw(&["--estimator", "bogus", "segment"]);
    assert_eq!(out.status.code(), Some(1));

    // Data error: malformed observation file.
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "timestamp_ms,device,bssid,ssid,rssi\n1,dev,ap,net\n").unwrap();
    let cfg = serde_json::json!({ "wifi": bad, "out_dir": tmp.path().join("out") });
    let config = tmp.path().join("config.json");
    std::fs::write(&config, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let out = topomap_raw(&["-c", config.to_str().unwrap(), "segment"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["category"], "parse");

    // Help never touches the pipeline and exits cleanly.
    assert_eq!(topomap_raw(&["--help"]).status.code(), Some(0));
}
