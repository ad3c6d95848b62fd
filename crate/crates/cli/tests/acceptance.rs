//! End-to-end acceptance check for the command-line pipeline. The test
//! prints one `ACCEPTANCE <n> <name>: PASS|FAIL` line before asserting so
//! the verdict survives in captured output.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

fn report(n: usize, name: &str, pass: bool, detail: &str) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    if detail.is_empty() {
        println!("ACCEPTANCE {n} {name}: {verdict}");
    } else {
        println!("ACCEPTANCE {n} {name}: {verdict} ({detail})");
    }
    pass
}

/// Runs the binary and returns the run directory it prints on success.
fn topomap(args: &[&str]) -> PathBuf {
    let out = Command::new(env!("CARGO_BIN_EXE_topomap"))
        .args(args)
        .output()
        .expect("spawn topomap");
    assert!(
        out.status.success(),
        "topomap {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

/// A compact scene keeps the 84-combination sweep fast while still
/// exercising every estimator, measure, norm, and invisibility flag.
fn write_config(dir: &Path, out_dir: &Path) -> PathBuf {
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

fn run_sweep(config: &Path, out_dir: &Path) -> Vec<u8> {
    let run_dir = topomap(&[
        "-c",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "sweep",
    ]);
    std::fs::read(run_dir.join("sweep.csv")).expect("sweep.csv")
}

#[test]
fn criterion_8_sweep_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &tmp.path().join("out-a"));

    let first = run_sweep(&config, &tmp.path().join("out-a"));
    let second = run_sweep(&config, &tmp.path().join("out-b"));

    let text = String::from_utf8(first.clone()).unwrap();
    let mut lines = text.lines();
    let header_ok = lines.next()
        == Some("estimator,measure,norm,invisibility,auc,pearson,spearman,kendall");

    // Exactly one row per combination: 3 estimators x 7 measures x 2 norms
    // x 2 invisibility flags, each row carrying a parseable AUC.
    let mut combos = BTreeSet::new();
    let mut rows = 0usize;
    let mut values_ok = true;
    for line in lines {
        rows += 1;
        let fields: Vec<&str> = line.split(',').collect();
        values_ok &= fields.len() == 8;
        if fields.len() >= 5 {
            combos.insert((
                fields[0].to_string(),
                fields[1].to_string(),
                fields[2].to_string(),
                fields[3].to_string(),
            ));
            values_ok &= fields[4].parse::<f64>().map_or(false, |a| (0.0..=1.0).contains(&a));
        }
    }
    let estimators: BTreeSet<_> = combos.iter().map(|c| c.0.clone()).collect();
    let measures: BTreeSet<_> = combos.iter().map(|c| c.1.clone()).collect();
    let norms: BTreeSet<_> = combos.iter().map(|c| c.2.clone()).collect();
    let flags: BTreeSet<_> = combos.iter().map(|c| c.3.clone()).collect();
    let grid_ok = rows == 84
        && combos.len() == 84
        && estimators.len() == 3
        && measures.len() == 7
        && norms.len() == 2
        && flags.len() == 2;

    let identical = first == second;
    let pass = header_ok && grid_ok && values_ok && identical;
    assert!(
        report(
            8,
            "sweep-grid",
            pass,
            &format!(
                "{rows} rows, {} unique combos, reruns byte-identical: {identical}",
                combos.len()
            ),
        ),
        "header_ok={header_ok} grid_ok={grid_ok} values_ok={values_ok} identical={identical}"
    );
}
