use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lusin"))
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/segment_div.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(bundled()).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn run_bundled(out: &Path, extra: &[&str]) -> Output {
    let scenario = bundled();
    let mut args = vec![
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn run_writes_dumps_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = run_bundled(&out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["report.json", "grid.csv", "atoms.csv", "solution.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], Value::Bool(true));
    let text = fs::read_to_string(out.join("report.json")).unwrap();
    let at = |k: &str| text.find(&format!("\"{k}\":")).unwrap();
    assert!(at("name") < at("kind") && at("kind") < at("pass") && at("pass") < at("verification"));

    let grid = fs::read_to_string(out.join("grid.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,V1,V2,divV");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 200 * 200);
    for cell in rows[0].split(',') {
        cell.parse::<f64>().unwrap();
    }
    let atoms = fs::read_to_string(out.join("atoms.csv")).unwrap();
    assert!(atoms.starts_with("id,x1,x2,weight,group,residual,f,divV\n"));
}

#[test]
fn grid_flag_overrides_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_bundled(dir.path(), &["--grid", "20"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let grid = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 20 * 20);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(code(&run_bundled(&a, &[])), 0);
    assert_eq!(code(&run_bundled(&b, &[])), 0);
    for f in ["report.json", "grid.csv", "atoms.csv", "solution.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(code(&run_bundled(&c, &["--seed", "8"])), 0);
    assert_ne!(fs::read(a.join("report.json")).unwrap(), fs::read(c.join("report.json")).unwrap());
}

#[test]
fn verify_round_trip_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    assert_eq!(code(&run_bundled(&out, &[])), 0);
    let sol = out.join("solution.json");
    let o = run(&["verify", sol.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let again: Value = serde_json::from_slice(&o.stdout).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(again, report["verification"]);

    let vdir = dir.path().join("v");
    let o = run(&["verify", sol.to_str().unwrap(), "--out", vdir.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&o), 0);
    let written: Value = serde_json::from_str(&fs::read_to_string(vdir.join("verification.json")).unwrap()).unwrap();
    assert_eq!(written, again);
}

#[test]
fn verify_rejects_corrupted_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    assert_eq!(code(&run_bundled(&out, &[])), 0);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    v["solution"]["certified_sup"] = Value::from(0.0);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    let o = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == Value::Bool(false))
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["sup_certificate_dominates_grid"]);
}

#[test]
fn zero_eps_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), "s.json", |v| v["eps"] = Value::from(0));
    let o = run(&["run", "--scenario", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("eps"), "{}", stderr(&o));
}

#[test]
fn unknown_symbol_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), "s.json", |v| v["problem"]["f"] = Value::from("sin(3*x1) + y"));
    let o = run(&["run", "--scenario", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("problem.f") && e.contains("12") && e.contains("'y'"), "{e}");
}

#[test]
fn unknown_field_and_missing_file_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), "s.json", |v| v["epsilon"] = Value::from(0.1));
    let o = run(&["run", "--scenario", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("epsilon"), "{}", stderr(&o));
    let o = run(&["run", "--scenario", dir.path().join("none.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
    assert_eq!(code(&run(&["run"])), 2);
}

#[test]
fn net_in_the_plane() {
    let o = run(&["net", "2", "0.785"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let dirs = v.as_array().unwrap();
    assert_eq!(dirs.len(), 8);
    for d in dirs {
        let c: Vec<f64> = d.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!((c[0].hypot(c[1]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn width_demo_dumps_phi_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "width-demo",
        "cantor",
        "--out",
        dir.path().to_str().unwrap(),
        "--grid",
        "50",
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let grid = fs::read_to_string(dir.path().join("width_grid.csv")).unwrap();
    assert!(grid.starts_with("x1,x2,phi,dphi_e\n"));
    assert_eq!(grid.lines().count(), 1 + 50 * 50);
    let atoms = fs::read_to_string(dir.path().join("width_atoms.csv")).unwrap();
    for line in atoms.lines().skip(1) {
        let slope: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((slope - 1.0).abs() <= 1e-9, "{line}");
    }
    for carrier in ["segment", "sine"] {
        let o = run(&[
            "width-demo",
            carrier,
            "--out",
            dir.path().to_str().unwrap(),
            "--grid",
            "50",
            "--quiet",
            "--zeta",
            "0.01",
        ]);
        assert_eq!(code(&o), 0, "{carrier}: {}", stderr(&o));
    }
}

#[test]
fn other_problem_kinds_run() {
    let dir = tempfile::tempdir().unwrap();
    let problems = [
        serde_json::json!({ "kind": "jacobian", "g": "1 + 0.3*sin(2*x1)" }),
        serde_json::json!({ "kind": "perturb-div", "f": "x1", "background": ["x1*x2", "x2"] }),
        serde_json::json!({ "kind": "perturb-jac", "g": "1.1", "forward": ["x1 + 0.3*x2", "x2"], "inverse": ["x1 - 0.3*x2", "x2"] }),
    ];
    for (i, problem) in problems.into_iter().enumerate() {
        let p = write_scenario(dir.path(), &format!("s{i}.json"), |v| v["problem"] = problem);
        let out = dir.path().join(format!("o{i}"));
        let o = run(&[
            "run",
            "--scenario",
            p.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid",
            "40",
            "--quiet",
        ]);
        assert_eq!(code(&o), 0, "problem {i}: {}", stderr(&o));
        let sol = out.join("solution.json");
        let o = run(&["verify", sol.to_str().unwrap(), "--quiet"]);
        assert_eq!(code(&o), 0, "problem {i} reverify: {}", stderr(&o));
    }
    let jac = fs::read_to_string(dir.path().join("o0/grid.csv")).unwrap();
    assert!(jac.starts_with("x1,x2,Phi1,Phi2,detDPhi\n"));
}
