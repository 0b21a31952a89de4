use std::path::Path;
use std::process::{Command, Output};

use metricbundle::verify::VerificationReport;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metricbundle"))
        .args(args)
        .env("METRICBUNDLE_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn evolve_rabi_csv_tracks_cos_2t() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let o = bin(&["evolve", "demo:hermitian-rabi", "--step", "1e-3", "--t1", "10", "-o", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    let col = header.iter().position(|h| *h == "sz_re").unwrap();
    assert!(header.contains(&"sz_im"));
    let mut rows = 0;
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[col] - (2.0 * f[0]).cos()).abs() < 1e-8);
        rows += 1;
    }
    assert_eq!(rows, 10_001);
}

#[test]
fn evolve_extra_columns() {
    let o = bin(&["evolve", "demo:pt-dimer-unbroken", "--t1", "0.1", "--step", "0.05", "--extra", "norm,G"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with("norm_re,norm_im,g_00_re,g_00_im,g_01_re,g_01_im,g_10_re,g_10_im,g_11_re,g_11_im"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn verify_unbroken_passes_with_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = bin(&["verify", "demo:pt-dimer-unbroken", "-o", path_str(&report)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: VerificationReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.summary.unexpected_failures, 0);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("inverse_identity_lr"));
}

#[test]
fn verify_broken_phase_exits_zero_with_pd_failure() {
    let o = bin(&["verify", "demo:pt-dimer-broken", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: VerificationReport = serde_json::from_slice(&o.stdout).unwrap();
    let pd = r.check("metric_positive_definite", None).unwrap();
    assert!(!pd.pass && pd.expected_failure);
}

#[test]
fn all_non_broken_demos_self_verify() {
    for name in ["hermitian-rabi", "pt-dimer-unbroken", "pt-ep", "driven-dimer", "time-dependent-observable"] {
        let o = bin(&["verify", &format!("demo:{name}")]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
    }
}

#[test]
fn json_trajectory_reingest_reproduces_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.json");
    let direct = dir.path().join("direct.json");
    let replay = dir.path().join("replay.json");
    let o = bin(&["evolve", "demo:driven-dimer", "--t1", "2", "--format", "json", "-o", path_str(&traj)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&bin(&["verify", "demo:driven-dimer", "--t1", "2", "-o", path_str(&direct)])), 0);
    let o = bin(&["verify", "demo:driven-dimer", "--t1", "2", "--trajectory", path_str(&traj), "-o", path_str(&replay)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(&direct).unwrap(), std::fs::read(&replay).unwrap());
}

#[test]
fn trajectory_for_a_different_window_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.json");
    assert_eq!(code(&bin(&["evolve", "demo:driven-dimer", "--t1", "1", "-o", path_str(&traj)])), 0);
    let o = bin(&["verify", "demo:driven-dimer", "--t1", "2", "--trajectory", path_str(&traj)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).starts_with("error[2]:"));
}

#[test]
fn stationary_metric_on_broken_phase_is_a_scenario_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("broken.json");
    let o = bin(&["demo", "pt-dimer-broken", "-o", path_str(&file)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&file).unwrap().replace("\"identity\"", "\"stationary\"");
    std::fs::write(&file, text).unwrap();
    let o = bin(&["verify", path_str(&file)]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.starts_with("error[2]:"), "{err}");
    assert!(err.contains("system in broken phase; supply explicit metric or use identity"), "{err}");
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(
        &file,
        r#"{"dim": 2, "hamiltonian": [{"coeff": "1", "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}],
            "metric": {"mode": "identity"}, "psi0": [[1,0]], "t0": 0, "t1": 1,
            "integrator": {"method": "rk4", "step": 0.01}}"#,
    )
    .unwrap();
    let o = bin(&["evolve", path_str(&file)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/psi0"), "{}", stderr(&o));
    let o = bin(&["evolve", path_str(&dir.path().join("missing.json"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn blow_up_is_a_numerical_error() {
    let o = bin(&["evolve", "demo:pt-dimer-broken", "--t1", "40", "--step", "1e-2"]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.starts_with("error[3]:") && err.contains("node"), "{err}");
}

#[test]
fn unexpected_verification_failure_exits_4() {
    let o = bin(&["verify", "demo:pt-dimer-unbroken", "--t1", "1", "--tolerance-scale", "1e-9"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).starts_with("error[4]:"));
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        vec!["frobnicate"],
        vec!["verify"],
        vec!["verify", "demo:hermitian-rabi", "--node-stride", "0"],
        vec!["evolve", "demo:hermitian-rabi", "--format", "xml"],
        vec!["spectrum", "demo:hermitian-rabi", "nope"],
        vec!["evolve", "demo:hermitian-rabi", "--param", "s"],
    ] {
        let o = bin(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error[1]:"), "{args:?}");
    }
    assert_eq!(code(&bin(&["--help"])), 0);
    assert_eq!(code(&bin(&["--version"])), 0);
}

#[test]
fn unknown_model_or_parameter_is_a_scenario_error() {
    assert_eq!(code(&bin(&["verify", "demo:nope"])), 2);
    assert_eq!(code(&bin(&["verify", "demo:hermitian-rabi", "--param", "gamma=1"])), 2);
}

#[test]
fn spectrum_matches_across_pictures() {
    let o = bin(&["spectrum", "demo:pt-dimer-unbroken", "sx", "--times", "0,1,5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    for row in &rows {
        let re0: f64 = row[2].parse().unwrap();
        let re1: f64 = row[4].parse().unwrap();
        assert!((re0 + 1.0).abs() < 1e-8 && (re1 - 1.0).abs() < 1e-8, "{row:?}");
    }
}

#[test]
fn demo_params_and_listing() {
    let o = bin(&["demo"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 6);
    let o = bin(&["demo", "pt-dimer-unbroken", "--param", "gamma=0.25"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"0.25\""), "{text}");
}
