use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_herglotz-flow"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("herglotz-flow-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &str, config: &str, dir: &Path, out: Option<&Path>) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let mut c = bin();
    c.arg(cmd).arg("--config").arg(&cfg);
    if let Some(o) = out {
        c.arg("--out").arg(o);
    }
    c.output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const DELTA0_PARABOLIC: &str = r#"{
  "fixture": {"A": 0.0, "B": 0.0, "mu": {"atoms": [{"pos": 0.0, "w": 1.0}]}},
  "generator": {"alpha": 0.0, "beta": 0.0, "gamma": 1.0},
  "t_range": [0.0, 2.0],
  "lambda_grid": [-1.0, -0.5, 0.5, 1.0],
  "intervals": [[-1.0, 1.0]]
}"#;

#[test]
fn malformed_config_exits_nonzero_and_writes_nothing() {
    let dir = scratch("malformed");
    let out = dir.join("out");
    for bad in [
        r#"{"fixture": "#,
        r#"{"unknown_key": 1}"#,
        r#"{"fixture": {"A": -1.0, "B": 0.0, "mu": {}}, "generator": {"alpha": 0.0, "beta": 0.0, "gamma": 1.0}, "intervals": [[0.0, 1.0]]}"#,
        r#"{"fixture": {"A": 0.0, "B": 0.0, "mu": {"atoms": [{"pos": 0.0, "w": 1.0}]}}, "intervals": [[1.0, 0.0]]}"#,
    ] {
        let o = run("global", bad, &dir, Some(&out));
        assert_eq!(o.status.code(), Some(1), "{bad}");
        let err: serde_json::Value = serde_json::from_slice(&o.stderr).expect("JSON diagnostic");
        assert!(err["message"].is_string());
        assert!(!out.exists());
    }
}

#[test]
fn missing_field_for_subcommand_is_a_config_error() {
    let dir = scratch("missing");
    let out = dir.join("out");
    let o = run("xi", r#"{"fixture": {"constant": {"re": 0.0, "im": 1.0}}}"#, &dir, Some(&out));
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = bin().arg("nonsense").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "usage");
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn global_hyperbolic_constant_i_reports_both_densities() {
    let dir = scratch("global");
    let out = dir.join("out");
    let cfg = r#"{
      "fixture": {"constant": {"re": 0.0, "im": 1.0}},
      "generator": {"alpha": 1.0, "beta": 0.0, "gamma": 1.0},
      "intervals": [[-1.0, 1.0]]
    }"#;
    let o = run("global", cfg, &dir, Some(&out));
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    let d = &r["details"][0];
    assert_eq!(d["case"], "CASE_III");
    assert!((d["xi_global_density"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    let alt = d["alternative_density"].as_f64().unwrap();
    assert!((alt - 0.639).abs() < 1e-3, "{alt}");
    assert_eq!(d["alternative_discrepant"], true);
    assert!((d["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn xi_csv_has_metadata_and_header() {
    let dir = scratch("xi");
    let out = dir.join("out");
    let o = run("xi", DELTA0_PARABOLIC, &dir, Some(&out));
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("xi.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    assert_eq!(lines.next().unwrap(), "lambda,xi");
    let xi: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // M_t = -1/(z - t): the atom sweeps (0, 2], where ξ is 1.
    assert_eq!(xi.len(), 4);
    assert!(xi[0].abs() < 1e-8 && xi[1].abs() < 1e-8);
    assert!((xi[2] - 1.0).abs() < 1e-8 && (xi[3] - 1.0).abs() < 1e-8);
}

#[test]
fn flow_csv_columns() {
    let dir = scratch("flow");
    let out = dir.join("out");
    let cfg = DELTA0_PARABOLIC.replace("\"t_range\"", "\"t_grid\": [0.0, 0.5], \"t_range\"");
    let o = run("flow", &cfg, &dir, Some(&out));
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("flow.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "t,A_t,B_t,mass_0");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = scratch("determinism");
    let (a, b) = (dir.join("a"), dir.join("b"));
    for o in [&a, &b] {
        assert_eq!(run("xi", DELTA0_PARABOLIC, &dir, Some(o)).status.code(), Some(0));
    }
    for f in ["report.json", "xi.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let cls = r#"{
      "fixture": {"A": 0.0, "B": 0.0, "mu": {"ac": [{"lo": 0.0, "hi": 1.0, "density": {"kind": "constant", "c": 1.0}}]}},
      "random_lambdas": 4, "lambda_range": [-1.0, 2.0], "seed": 7
    }"#;
    let (c, d) = (dir.join("c"), dir.join("d"));
    run("classify", cls, &dir, Some(&c));
    let mut with_workers = bin();
    std::fs::write(dir.join("cls.json"), cls).unwrap();
    with_workers.env("HF_WORKERS", "1").arg("classify").arg("--config").arg(dir.join("cls.json")).arg("--out").arg(&d);
    assert_eq!(with_workers.output().unwrap().status.code(), Some(0));
    assert_eq!(std::fs::read(c.join("report.json")).unwrap(), std::fs::read(d.join("report.json")).unwrap());
}

#[test]
fn seed_flag_changes_the_digest() {
    let dir = scratch("seed");
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, DELTA0_PARABOLIC).unwrap();
    let digest = |seed: &str| {
        let o = bin().arg("average").arg("--config").arg(&cfg).arg("--seed").arg(seed).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["inputs_digest"].as_str().unwrap().to_string()
    };
    assert_ne!(digest("1"), digest("2"));
    assert_eq!(digest("3"), digest("3"));
}

#[test]
fn rankone_two_level_passes() {
    let dir = scratch("rankone");
    let cfg = r#"{
      "fixture": {"eigs": [-1.0, 1.0], "phi": [0.7071067811865476, 0.7071067811865476]},
      "t_range": [0.0, 1.0],
      "intervals": [[-2.0, 0.5]]
    }"#;
    let o = run("rankone", cfg, &dir, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn extension_average_equals_interval_length() {
    let dir = scratch("extension");
    let cfg = r#"{
      "fixture": {"A": 0.0, "B": 0.0, "mu": {"ac": [{"lo": 0.0, "hi": 1.0, "density": {"kind": "constant", "c": 1.0}}]}},
      "intervals": [[0.2, 0.7], [-3.0, 2.0]]
    }"#;
    let o = run("extension", cfg, &dir, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}
