use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sel-lab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("spawn sel-lab")
}

fn summary(o: &Output) -> Vec<(String, String)> {
    String::from_utf8_lossy(&o.stdout)
        .split_whitespace()
        .filter_map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn value(o: &Output, key: &str) -> String {
    summary(o)
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no `{key}` in {}", String::from_utf8_lossy(&o.stdout)))
        .1
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn eigen_from_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["eigen", "N=3", "R=1", "mode=ball"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let l: f64 = value(&o, "lambda1").parse().unwrap();
    assert!((l - std::f64::consts::PI.powi(2)).abs() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("eigen.csv")).unwrap();
    assert!(csv.lines().nth(1) == Some("r,phi"));
    assert!(dir.path().join("eigen.json").exists());
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("lef_singular.toml");
    for d in [a.path(), b.path()] {
        let o = bin().arg("--config").arg(&cfg).arg("--out").arg(d).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["lef.csv", "lef_probes.csv", "lef.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn missing_key_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["eigen", "mode=ball", "R=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`N`"), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn duplicate_and_unknown_keys_are_rejected_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dup.toml");
    std::fs::write(&cfg, "[problem]\ncommand = \"check-ko\"\ncommand = \"eigen\"\n").unwrap();
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    std::fs::write(&cfg, "[problem]\ncommand = \"check-ko\"\n\n[functions]\nf = \"t^2\"\nh = \"t\"\n").unwrap();
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field `h`"), "{}", stderr(&o));
}

#[test]
fn bad_expression_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-ko", "functions.f=t^^2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("functions.f"), "{}", stderr(&o));
}

#[test]
fn minimal_ko_config_parses() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-ko", "functions.f=t^2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&o, "verdict"), "convergent");
}

#[test]
fn numerical_failure_exits_3_with_json_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    // ξ₀ via A with a target far outside the sampled range of A.
    let o = run(&["xi0", "functions.f=t^2", "ell1=0", "c=1e-12"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let diag = std::fs::read_to_string(dir.path().join("xi0.error.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&diag).unwrap();
    assert_eq!(v["status"], "error");
    assert_eq!(v["error"]["kind"], "numerical");
}

#[test]
fn blowup_config_reports_the_boundary_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("--config")
        .arg(configs().join("blowup_x2u3.toml"))
        .arg("--out")
        .arg(dir.path())
        .env("SEL_LAB_JOBS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let r: f64 = value(&o, "rate_ratio").parse().unwrap();
    assert!((r - 1.0).abs() < 0.02, "{r}");
    assert!(dir.path().join("blowup_rate.csv").exists());
}

#[test]
fn sweep_config_brackets_lambda_star() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("--config")
        .arg(configs().join("sweep_linear.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let b = value(&o, "lambda_star_bracket");
    let inner = b.trim_start_matches('[').trim_end_matches(']');
    let (lo, hi) = inner.split_once(',').unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((lo.parse::<f64>().unwrap() / pi2 - 0.95).abs() < 1e-9);
    assert!((hi.parse::<f64>().unwrap() / pi2 - 1.05).abs() < 1e-9);
    assert_eq!(value(&o, "monotone"), "true");
}

#[test]
fn unknown_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve-radial", "N=3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
