use std::fs;
use std::path::Path;
use std::process::Command;

use calogero_cli::scenario::parse_scenario_str;
use calogero_cli::table::{Format, Table};
use calogero_cli::{parse_scenario, run_scenario, verify_all, CliError, RunOptions};

fn opts(dir: &Path) -> RunOptions {
    RunOptions { out_dir: dir.to_path_buf(), format: Format::Csv }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_calogero"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn discrete_single_particle_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let sc = parse_scenario_str("kind = \"discrete\"\nn = 1\nx0 = [0]\nx1 = [1]\nsteps = 10\n").unwrap();
    let (art, report) = run_scenario(&sc, &opts(dir.path())).unwrap();
    assert!(report.all_passed());
    let t = Table::from_csv(&fs::read_to_string(art.trajectory.unwrap()).unwrap()).unwrap();
    assert_eq!(t.header, ["n", "x1", "I1", "I2", "I3"]);
    assert_eq!(t.rows.len(), 11);
    for (k, row) in t.rows.iter().enumerate() {
        assert_eq!(row[0], Some(k as f64));
        assert!((row[1].unwrap() - k as f64).abs() < 1e-12);
    }
    assert_eq!(t.rows[10][2], None);
}

#[test]
fn continuous_symmetric_pair() {
    let dir = tempfile::tempdir().unwrap();
    let sc = parse_scenario_str("kind = \"continuous\"\nn = 2\nx = [-2, 2]\np = [0, 0]\nduration = 0.5\n").unwrap();
    let (art, report) = run_scenario(&sc, &opts(dir.path())).unwrap();
    assert!(report.all_passed(), "{report:?}");
    assert!(report.entries.iter().any(|e| e.name == "invariant-drift-I2"));
    let text = fs::read_to_string(art.trajectory.unwrap()).unwrap();
    assert!(text.starts_with("s,t2,t3,x1,x2,p1,p2,I1,I2,I3\n"));
    assert!(!text.contains('\r'));
    let t = Table::from_csv(&text).unwrap();
    assert_eq!(t.rows.len(), 501);
    let last = &t.rows[500];
    let gap = last[4].unwrap() - last[3].unwrap();
    assert!((gap * gap - (16.0 - 0.25)).abs() < 1e-6);
}

#[test]
fn json_lines_output() {
    let dir = tempfile::tempdir().unwrap();
    let sc = parse_scenario_str("kind = \"discrete\"\nx0 = [0]\nx1 = [1]\nsteps = 2\n").unwrap();
    let ro = RunOptions { out_dir: dir.path().to_path_buf(), format: Format::JsonLines };
    let (art, _) = run_scenario(&sc, &ro).unwrap();
    let path = art.trajectory.unwrap();
    assert_eq!(path.extension().unwrap(), "jsonl");
    let text = fs::read_to_string(path).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["x1"], 0.0);
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn verify_all_is_deterministic_and_complete() {
    let sc = parse_scenario_str("kind = \"verify-all\"\nseed = 11\n").unwrap();
    let a = verify_all(&sc).unwrap();
    let b = verify_all(&sc).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert!(a.all_passed(), "{:#?}", a.entries.iter().filter(|e| !e.passed).collect::<Vec<_>>());
    let closure = a.entries.iter().find(|e| e.name == "discrete-closure").unwrap();
    assert!(closure.meta.contains_key("printed") && closure.meta.contains_key("negated"));
    for name in ["lagrangian-closure-flow", "lagrangian-closure-constraint", "legendre-t3", "semi-closure", "edge-lagrangian-log-det"] {
        assert!(a.entries.iter().any(|e| e.name == name), "{name}");
    }
}

#[test]
fn zero_tolerance_fails_nontrivial_checks() {
    let mut sc = parse_scenario_str("kind = \"verify-all\"\n").unwrap();
    sc.tolerance_scale = 0.0;
    let r = verify_all(&sc).unwrap();
    for e in &r.entries {
        assert_eq!(e.passed, e.residual <= 0.0, "{}", e.name);
    }
    assert!(r.summary.failed > 10);
}

#[test]
fn report_files_are_byte_identical_across_runs() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let sc = parse_scenario_str("kind = \"continuous\"\nn = 3\nseed = 5\nmin_gap = 1.5\nduration = 0.2\n").unwrap();
    let (a1, _) = run_scenario(&sc, &opts(d1.path())).unwrap();
    let (a2, _) = run_scenario(&sc, &opts(d2.path())).unwrap();
    assert_eq!(fs::read(a1.report).unwrap(), fs::read(a2.report).unwrap());
    assert_eq!(fs::read(a1.trajectory.unwrap()).unwrap(), fs::read(a2.trajectory.unwrap()).unwrap());
}

#[test]
fn missing_file() {
    let e = parse_scenario(Path::new("/nonexistent/scenario.toml")).unwrap_err();
    assert!(matches!(e, CliError::FileNotFound(_)));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let ok = write_config(dir.path(), "kind = \"discrete\"\nx0 = [0]\nx1 = [1]\n");
    assert_eq!(bin().args(["run", ok.to_str().unwrap(), "--out-dir", out]).status().unwrap().code(), Some(0));

    // drift of exactly zero still passes at zero tolerance, the continuous run does not
    let cont = write_config(dir.path(), "kind = \"continuous\"\nx = [-3, 0.2, 3.1]\np = [-0.5, 0.1, 0.6]\nduration = 0.1\n");
    let status = bin().args(["run", cont.to_str().unwrap(), "--out-dir", out, "--tolerance-scale", "0"]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    // released from rest at distance 4 the pair collides at t = 4
    let crash = write_config(dir.path(), "kind = \"continuous\"\nx = [-2, 2]\np = [0, 0]\nduration = 5\ndt = 0.01\n");
    assert_eq!(bin().args(["run", crash.to_str().unwrap(), "--out-dir", out]).status().unwrap().code(), Some(2));

    let bad = write_config(dir.path(), "kind = \"continuous\"\nfoo = 1\n");
    let res = bin().args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("foo"));

    assert_eq!(bin().args(["demo", "nope"]).status().unwrap().code(), Some(2));
}

#[test]
fn demo_and_verify_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = bin().args(["demo", "discrete", "--out-dir", out, "--format", "json-lines"]).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    assert!(dir.path().join("trajectory.jsonl").exists());

    let cfg = write_config(dir.path(), "kind = \"discrete\"\nx0 = [0]\nx1 = [1]\n");
    let res = bin().args(["verify", cfg.to_str().unwrap(), "--out-dir", out, "--seed", "3"]).output().unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["kind"], "verify-all");
}
