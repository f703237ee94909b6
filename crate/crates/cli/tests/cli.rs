use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nicholson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nicholson"))
        .args(args)
        .env_remove("NICHOLSON_JOBS")
        .output()
        .expect("binary runs")
}

fn model(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest_value(text: &str, key: &str) -> Option<String> {
    text.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim().to_string())
    })
}

#[test]
fn check_passes_on_the_reference_model() {
    let o = nicholson(&["check", &model("reference.model")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("result: PASS"));
}

#[test]
fn check_without_birth_in_patch_one_names_the_hypothesis() {
    let o = nicholson(&["check", &model("reference.model"), "--set", "beta_scale=0,1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("violated: (a4)"), "{}", stdout(&o));
}

#[test]
fn check_with_inflated_birth_names_the_zone() {
    let o = nicholson(&["check", &model("reference.model"), "--set", "beta_scale=10,1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("violated: (zone)"), "{}", stdout(&o));
    assert!(stdout(&o).contains("result: FAIL"));
}

#[test]
fn sampled_check_agrees() {
    let o = nicholson(&["check", "--sampled", "--grid-step", "0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.model");
    fs::write(&bad, "mu = one\n").unwrap();
    let unknown = dir.path().join("unknown.model");
    fs::write(&unknown, "colour = red\n").unwrap();
    for args in [
        vec!["check", bad.to_str().unwrap()],
        vec!["check", unknown.to_str().unwrap()],
        vec!["check", "/nonexistent/model"],
        vec!["check", "--set", "mu"],
        vec!["check", "--set", "nope=1"],
        vec!["check", "--bogus"],
        vec!["frobnicate"],
        vec!["simulate", "--h", "0"],
        vec!["simulate", "--method", "euler"],
        vec!["simulate", "--theta", "1,2,3"],
        vec!["study", "--axis", "sideways", "--values", "1"],
    ] {
        let o = nicholson(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn persistence_on_reference_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let o = nicholson(&["persistence", &model("reference.model"), "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: uniformly persistent at 0"));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("block,indices,lambda,converged\n1,1;2,"));
    assert!(dir.path().join("p.manifest.txt").exists());
}

#[test]
fn persistence_without_births_fails() {
    // unit delays and a long horizon keep the decay bias of the segment norm below the band
    let o = nicholson(&["persistence", "--set", "beta_scale=0,0", "--set", "delays=1,1", "--horizon", "4000"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("not persistent"), "{}", stdout(&o));
}

#[test]
fn zero_duration_simulation_writes_header_only() {
    let o = nicholson(&["simulate", "--t-end", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "t,y1,y2");
}

#[test]
fn simulation_csv_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let o = nicholson(&["simulate", "--t-end", "1", "--h", "0.1", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 11);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-12);
    assert!(last[1] > 0.0 && last[2] > 0.0);
    let manifest = fs::read_to_string(dir.path().join("run.manifest.txt")).unwrap();
    assert_eq!(manifest_value(&manifest, "command").as_deref(), Some("simulate"));
}

#[test]
fn stiff_explicit_run_is_flagged() {
    let o = nicholson(&["simulate", &model("stiff.model"), "--method", "rk23", "--t-end", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("WARNING"), "{}", stderr(&o));
    let o = nicholson(&["simulate", &model("stiff.model"), "--method", "gl2", "--t-end", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stderr(&o).contains("WARNING"), "{}", stderr(&o));
}

#[test]
fn single_node_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let o = nicholson(&["mesh", "--n", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("mesh.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,j,theta1,theta2,y1,y2,T_final");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,0,0.0000000000000000e0,0.0000000000000000e0,"));
}

#[test]
fn mesh_writes_outputs_and_reruns_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let o = nicholson(&["mesh", &model("reference.model"), "--n", "4", "--out-dir", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["mesh.csv", "mesh_y1.svg", "mesh_y2.svg", "manifest.txt"] {
        assert!(first.join(f).exists(), "{f}");
    }
    let svg = fs::read_to_string(first.join("mesh_y1.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let second = dir.path().join("b");
    let o = nicholson(&[
        "--jobs",
        "2",
        "mesh",
        first.join("manifest.txt").to_str().unwrap(),
        "--out-dir",
        second.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        fs::read(first.join("mesh.csv")).unwrap(),
        fs::read(second.join("mesh.csv")).unwrap()
    );
}

#[test]
fn flags_override_set_override_config_override_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(&config, "h = 0.02\nmu = 0.9\nt_end = 2\n").unwrap();
    let csv = dir.path().join("run.csv");
    let o = nicholson(&[
        "simulate",
        &model("reference.model"),
        "--config",
        config.to_str().unwrap(),
        "--set",
        "mu=0.8",
        "--set",
        "h=0.04",
        "--h",
        "0.05",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = fs::read_to_string(dir.path().join("run.manifest.txt")).unwrap();
    assert_eq!(manifest_value(&manifest, "h").as_deref(), Some("0.05"));
    assert_eq!(manifest_value(&manifest, "mu").as_deref(), Some("0.8"));
    assert_eq!(manifest_value(&manifest, "t_end").as_deref(), Some("2"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 41);
}

#[test]
fn jobs_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = Command::new(env!("CARGO_BIN_EXE_nicholson"))
            .args(["mesh", "--n", "3", "--out-dir", out.to_str().unwrap()])
            .env("NICHOLSON_JOBS", jobs)
            .output()
            .unwrap();
        (o, out)
    };
    let (a, out_a) = run("1", "one");
    let (b, out_b) = run("3", "three");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(
        fs::read(out_a.join("mesh.csv")).unwrap(),
        fs::read(out_b.join("mesh.csv")).unwrap()
    );
    let (bad, _) = run("many", "bad");
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn study_writes_one_mesh_per_value_and_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = nicholson(&[
        "study",
        "--axis",
        "mortality",
        "--values",
        "0.85,1",
        "--n",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["mu_0.85.csv", "mu_1.csv", "mu_1_y2.svg", "monotonicity.txt", "manifest.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report = fs::read_to_string(dir.path().join("monotonicity.txt")).unwrap();
    assert!(report.contains("y1 overall: decreasing in mu"), "{report}");
    assert!(report.contains("result: uniformly ordered"));
}
