use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vmt-rebound"));
    cmd.env_remove("VMT_REBOUND_DATA").env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/nhts_mini")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

/// A small synthetic run keeps each test under a second or two.
const SMALL: &str = "[synthetic]\nn = 4000\n";

fn grid_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,delta,energy_ratio,backfire"));
    lines
        .map(|l| {
            l.split(',')
                .map(|v| match v {
                    "true" => 1.0,
                    "false" => 0.0,
                    _ => v.parse().unwrap(),
                })
                .collect()
        })
        .collect()
}

#[test]
fn simulate_estimate_forecast_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let data = tmp.path().join("data");
    ok(&["--config", s(&cfg), "simulate", "--out", s(&data)]);
    assert!(data.join("households.csv").exists());
    assert!(data.join("manifest.json").exists());

    let est = tmp.path().join("m3.json");
    let out = ok(&["--config", s(&cfg), "estimate", "--data", s(&data), "--model", "m3", "--out", s(&est)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Observations"));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(&est).unwrap()).unwrap();
    let names = fit["fit"]["names"].as_array().unwrap();
    let idx = names.iter().position(|n| n == "log_pf").unwrap();
    let value = fit["fit"]["beta"][idx].as_f64().unwrap();
    assert!((value + 0.10).abs() < 0.1, "fuel elasticity {value}");

    let fc = tmp.path().join("fc");
    ok(&["--config", s(&cfg), "forecast", "--elasticities", s(&est), "--out", s(&fc)]);
    for f in ["grid.csv", "frontier.csv", "grid.json", "path.json", "gge.json", "manifest.json"] {
        assert!(fc.join(f).exists(), "missing {f}");
    }
    assert_eq!(grid_rows(&fc.join("grid.csv")).len(), 4 * 13);

    let report = tmp.path().join("report.txt");
    ok(&["report", "--estimates", s(&est), "--forecasts", s(&fc), "--out", s(&report)]);
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("Model 3"));
    assert!(text.contains("Break-even"), "{text}");
}

#[test]
fn forecast_from_configured_elasticities() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[forecast]\neps_f = -0.0989\neps_t = -0.4007\n");
    let fc = tmp.path().join("fc");
    ok(&["--config", s(&cfg), "forecast", "--out", s(&fc)]);
    let rows = grid_rows(&fc.join("grid.csv"));
    let max = rows.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max);
    assert!((max - 0.470).abs() < 5e-4, "max induced travel {max}");
    let corner = rows.iter().find(|r| (r[0] - 0.2).abs() < 1e-12 && (r[1] - 0.6).abs() < 1e-12).unwrap();
    assert_eq!(corner[2], max);
    assert_eq!(corner[4], 1.0);
}

#[test]
fn frontier_prints_break_even() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[forecast]\neps_f = -0.0989\neps_t = -0.4007\n");
    let out = ok(&["--config", s(&cfg), "frontier", "--x", "0.1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y_star"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // at the break-even point the energy ratio is exactly one
    let (x, y) = (row[0], row[1]);
    let ratio = (1.0 / (1.0 + x)).powf(-0.0989) * (1.0 - y).powf(-0.4007) / (1.0 + x);
    assert!((ratio - 1.0).abs() < 1e-8, "ratio {ratio} at y {y}");
}

#[test]
fn missing_input_is_a_data_error_naming_the_file() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nowhere/households.csv");
    let out = run(&["estimate", "--data", s(&missing), "--out", s(&tmp.path().join("e.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

#[test]
fn bad_config_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[estimate]\nmodle = \"m3\"\n");
    let out = run(&["--config", s(&cfg), "simulate", "--out", s(&tmp.path().join("d"))]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = write_config(tmp.path(), "schema_version = 7\n");
    let out = run(&["--config", s(&cfg), "simulate", "--out", s(&tmp.path().join("d"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema_version"));

    let out = run(&["forecast", "--out", s(&tmp.path().join("f"))]);
    assert_eq!(out.status.code(), Some(2), "forecast with no elasticities");
}

#[test]
fn ingest_fixture_through_data_root() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("ingested");
    let out = bin()
        .env("VMT_REBOUND_DATA", fixture_dir())
        .args([
            "ingest",
            "--households",
            "hhpub.csv",
            "--vehicles",
            "vehpub.csv",
            "--trips",
            "trippub.csv",
            "--epa",
            "epa.csv",
            "--out",
            s(&out_dir),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["filter"]["retained"], 74);
    let rows = fs::read_to_string(out_dir.join("households.csv")).unwrap().lines().count();
    assert_eq!(rows, 75);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 4);

    let est = tmp.path().join("m4.json");
    ok(&["estimate", "--data", s(&out_dir), "--model", "m4", "--controls", "none", "--out", s(&est)]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[synthetic]\nn = 3000\n[run]\nby_income = false\nmodels = [\"m3\", \"m4\"]\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&["--config", s(&cfg), "--seed", "11", "run", "--out", s(dir)]);
    }
    let files = ["households.csv", "estimates/m3.json", "estimates/m4.json", "report.txt"];
    for f in files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let grids: Vec<_> = fs::read_dir(a.join("forecast")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(!grids.is_empty());
    for g in grids {
        for f in ["grid.csv", "frontier.csv"] {
            let rel = Path::new("forecast").join(&g).join(f);
            assert_eq!(fs::read(a.join(&rel)).unwrap(), fs::read(b.join(&rel)).unwrap());
        }
    }

    let c = tmp.path().join("c");
    ok(&["--config", s(&cfg), "--seed", "12", "run", "--out", s(&c)]);
    assert_ne!(fs::read(a.join("households.csv")).unwrap(), fs::read(c.join("households.csv")).unwrap());
}

#[test]
fn empty_report_shows_placeholders() {
    let out = ok(&["report"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("(no results)"));
}

#[test]
fn monte_carlo_recovery_runs() {
    let tmp = TempDir::new().unwrap();
    let out_file = tmp.path().join("mc.json");
    ok(&["mc-recovery", "--reps", "4", "--n", "2000", "--out", s(&out_file)]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(report["reps"], 4);
    assert!(report["coefficients"].as_array().unwrap().iter().any(|c| c["name"] == "log_pt"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["estimate"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}
