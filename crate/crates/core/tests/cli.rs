use std::fs;
use std::path::Path;
use std::process::Command;

use predpack_core::cli::run_with;

const CONFIG: &str = "\
[model]
d = 0.5
D = 1
omega = 0.5
k = 1
lambda = 1
mu = 1
beta = 1
N = 2

[domain]
dim = 1
lengths = 1
cells = 40
";

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["predpack"];
    full.extend_from_slice(args);
    let code = run_with(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn constant_prints_reference_state() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["constant", "--out", &out_arg(dir.path())]);
    assert_eq!(code, 0);
    assert!(out.contains("w = 0.16666666666666666"), "{out}");
    assert!(out.contains("u = 0.6666666666666666"), "{out}");
    assert!(out.contains("residual = "));
    assert!(dir.path().join("constant.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "constant");
    assert_eq!(manifest["outputs"][0], "constant.json");
}

#[test]
fn spectrum_csv_has_reference_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&["spectrum", "--out", &out_arg(dir.path())]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .filter(|l| l.ends_with("closed_form"))
        .map(|l| l.split(',').take(3).map(|x| x.parse().unwrap()).collect())
        .collect();
    let s23 = 23f64.sqrt() / 12.0;
    let expected = [[1.0 / 6.0, 0.0, 1.0], [-5.0 / 12.0, s23, 1.0], [-5.0 / 12.0, -s23, 1.0]];
    assert_eq!(rows.len(), 3);
    for (row, want) in rows.iter().zip(&expected) {
        for (a, b) in row.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{row:?}");
        }
    }
    assert!(csv.lines().any(|l| l.ends_with("numeric")));
}

#[test]
fn usage_errors_exit_2() {
    let (code, _, err) = run(&["bogus"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, _) = run(&["cover", "--count", "many"]);
    assert_eq!(code, 2);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("sweep"));
}

#[test]
fn config_errors_exit_2_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ini");
    fs::write(&path, CONFIG.replace("beta = 1", "beta = -1")).unwrap();
    let (code, _, err) = run(&["constant", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 8: beta ≥ 0"), "{err}");

    let (code, _, err) = run(&["constant", "--config", "/nonexistent/x.ini"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read"));

    let (code, _, err) = run(&["constant", "--set", "model.N=0"]);
    assert_eq!(code, 2);
    assert!(err.contains("N ≥ 1"), "{err}");
}

#[test]
fn evolve_converges_for_one_pack() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.ini");
    fs::write(&cfg, CONFIG.replace("N = 2", "N = 1")).unwrap();
    let (code, out, err) = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--perturbation",
        "noise",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("converged = true"));
    assert!(out.contains("label = Constant"));
    let hist = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(hist.starts_with("step,time,residual,max_u,sum_w_max\n"));
    let snap: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("final.json")).unwrap()).unwrap();
    assert_eq!(snap["grid"]["cells"][0], 40);
    assert_eq!(snap["components"].as_array().unwrap().len(), 2);
}

#[test]
fn unsettled_evolve_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&[
        "evolve",
        "--set",
        "solver.T=1",
        "--set",
        "domain.cells=20",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(code, 1);
    assert!(out.contains("converged = false"));
    assert!(dir.path().join("final.json").exists());
}

#[test]
fn steady_from_snapshot_and_iteration_cap() {
    let dir = tempfile::tempdir().unwrap();
    let d = out_arg(dir.path());
    let (code, out, _) = run(&["steady", "--set", "domain.cells=30", "--out", &d]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("label = Constant"));
    assert!(out.contains("ordering_violations = 0"));
    let snap = dir.path().join("steady.json");
    let (code, out, _) = run(&[
        "steady",
        "--set",
        "domain.cells=30",
        "--init",
        snap.to_str().unwrap(),
        "--out",
        &d,
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("iterations = 0"));

    let (code, _, err) = run(&[
        "steady",
        "--set",
        "domain.cells=30",
        "--set",
        "solver.newton_max_iters=0",
        "--set",
        "solver.amplitude=0.1",
        "--out",
        &d,
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("no convergence"), "{err}");

    // snapshot on a different grid is rejected
    let (code, _, _) = run(&["steady", "--init", snap.to_str().unwrap(), "--out", &d]);
    assert_eq!(code, 2);
}

#[test]
fn sweep_is_reproducible_and_writes_svg() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "sweep".to_string(),
            "--set".into(),
            "sweep.beta_grid=0,1".into(),
            "--set".into(),
            "sweep.N_grid=1,2".into(),
            "--set".into(),
            "domain.cells=20".into(),
            "--seed".into(),
            "11".into(),
            "--svg".into(),
            "--out".into(),
            out_arg(dir),
        ]
    };
    let run_owned = |v: Vec<String>| {
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        run(&refs)
    };
    assert_eq!(run_owned(args(a.path())).0, 0);
    assert_eq!(run_owned(args(b.path())).0, 0);
    let csv_a = fs::read(a.path().join("sweep.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.path().join("sweep.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("beta,N,label,flatness,runs,runtime_s\n"));
    assert_eq!(text.lines().count(), 5);
    assert!(fs::read_to_string(a.path().join("sweep.svg")).unwrap().starts_with("<svg"));
    // config_hash covers output.dir, so only the remaining fields must agree
    let manifest = |dir: &Path| -> serde_json::Value {
        let mut m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        m.as_object_mut().unwrap().remove("config_hash");
        m
    };
    assert_eq!(manifest(a.path()), manifest(b.path()));
    assert_eq!(manifest(a.path())["seed"], 11);
    assert!(a.path().join("thresholds.json").exists());
}

#[test]
fn cover_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let d = out_arg(dir.path());
    let (code, out, _) = run(&[
        "cover", "--n", "1", "--count", "50", "--radius", "0.2", "--trials", "4", "--seed", "5",
        "--out", &d,
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("failures = 0"));
    let csv = fs::read_to_string(dir.path().join("cover.csv")).unwrap();
    assert!(csv.starts_with("trial,m,bound,ok\n"));
    assert_eq!(csv.lines().count(), 5);

    let (code, out, _) = run(&["identity", "--beta-eff", "1", "--out", &d]);
    assert_eq!(code, 0);
    assert!(out.contains("I_reaction"));
    let (code, _, _) = run(&["identity", "--beta-eff", "-1", "--out", &d]);
    assert_eq!(code, 2);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_predpack");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(exe)
        .args(["constant", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stdout).contains("w = 0.16666666666666666"));
    let status = Command::new(exe).arg("nonsense").output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}
