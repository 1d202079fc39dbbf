use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use capsd::Dataset;
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 3

[trajectory]
kind = "square"

[trajectory.region]
x_min = 9.0
x_max = 12.0
y_min = 6.0
y_max = 9.0
"#;

fn capsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capsd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Run {
    dataset: PathBuf,
    estimates: PathBuf,
    metrics: PathBuf,
    stdout: String,
}

fn full_run(dir: &Path, tag: &str, seed: Option<&str>) -> Run {
    let scenario = dir.join("small.toml");
    fs::write(&scenario, SMALL).unwrap();
    let dataset = dir.join(format!("{tag}.jsonl"));
    let estimates = dir.join(format!("{tag}.est.jsonl"));
    let metrics = dir.join(format!("{tag}.metrics.json"));

    let mut sim = vec!["simulate", "--scenario", s(&scenario), "--out", s(&dataset)];
    if let Some(seed) = seed {
        sim.extend(["--seed", seed]);
    }
    let out = capsd(&sim);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = capsd(&["solve", "--dataset", s(&dataset), "--out", s(&estimates)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = capsd(&[
        "eval",
        "--estimates",
        s(&estimates),
        "--dataset",
        s(&dataset),
        "--out",
        s(&metrics),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    Run {
        dataset,
        estimates,
        metrics,
        stdout: String::from_utf8(out.stdout).unwrap(),
    }
}

#[test]
fn simulate_solve_eval_happy_path() {
    let dir = TempDir::new().unwrap();
    let run = full_run(dir.path(), "a", None);
    assert!(run.stdout.contains("MED"));
    assert!(run.stdout.contains(" mm"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&run.metrics).unwrap()).unwrap();
    let med = json["med"].as_f64().unwrap();
    assert!(med > 0.0 && med < 0.4, "MED {med}");
    assert!(json["count"].as_u64().unwrap() > 0);
}

#[test]
fn eval_on_mismatched_files_fails() {
    let dir = TempDir::new().unwrap();
    let run = full_run(dir.path(), "a", None);
    let mut ds = Dataset::from_bytes(&fs::read(&run.dataset).unwrap()).unwrap();
    for r in &mut ds.records {
        r.t += 1000.0;
    }
    let shifted = dir.path().join("shifted.jsonl");
    fs::write(&shifted, ds.to_bytes()).unwrap();

    let out = capsd(&[
        "eval",
        "--estimates",
        s(&run.estimates),
        "--dataset",
        s(&shifted),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyOverlap"));
}

#[test]
fn same_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = full_run(dir.path(), "a", Some("11"));
    let b = full_run(dir.path(), "b", Some("11"));
    for (x, y) in [
        (&a.dataset, &b.dataset),
        (&a.estimates, &b.estimates),
        (&a.metrics, &b.metrics),
    ] {
        assert_eq!(
            fs::read(x).unwrap(),
            fs::read(y).unwrap(),
            "{}",
            x.display()
        );
    }
    assert_eq!(a.stdout, b.stdout);

    let c = full_run(dir.path(), "c", Some("12"));
    assert_ne!(fs::read(&a.dataset).unwrap(), fs::read(&c.dataset).unwrap());
}

#[test]
fn plot_writes_images() {
    let dir = TempDir::new().unwrap();
    let run = full_run(dir.path(), "a", None);
    let plots = dir.path().join("plots");
    let out = capsd(&[
        "plot",
        "--estimates",
        s(&run.estimates),
        "--dataset",
        s(&run.dataset),
        "--out-dir",
        s(&plots),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["trajectory.svg", "axes.svg", "histogram.svg"] {
        let text = fs::read_to_string(plots.join(f)).unwrap();
        assert!(text.starts_with("<svg"), "{f}");
    }
}

#[test]
fn dump_scans_writes_graymaps() {
    let dir = TempDir::new().unwrap();
    let scenario = dir.path().join("small.toml");
    fs::write(&scenario, SMALL).unwrap();
    let scans = dir.path().join("scans");
    let out = capsd(&[
        "simulate",
        "--scenario",
        s(&scenario),
        "--out",
        s(&dir.path().join("d.jsonl")),
        "--dump-scans",
        s(&scans),
        "--dump-every",
        "400",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = fs::read(scans.join("scan_00000.pgm")).unwrap();
    assert!(first.starts_with(b"P5\n512 512\n255\n"));
}

#[test]
fn usage_and_input_errors_exit_nonzero() {
    assert!(!capsd(&[]).status.success());
    assert!(!capsd(&["simulate", "--out", "x.jsonl"]).status.success());
    let out = capsd(&[
        "solve",
        "--dataset",
        "/nonexistent/ds.jsonl",
        "--out",
        "/tmp/never.jsonl",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[noise]\npixel_sigma = 1.0\n").unwrap();
    let out = capsd(&[
        "simulate",
        "--scenario",
        s(&bad),
        "--out",
        s(&dir.path().join("o.jsonl")),
    ]);
    assert!(!out.status.success());
}
