use std::process::{Command, Output};

use serde_json::Value;

fn fw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracwell"))
        .args(args)
        .env_remove("FW_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = head.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn density_matches_cauchy_kernel() {
    let o = fw(&["density", "--d", "1", "--alpha", "1", "--x", "0.5,2"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let j0 = column(&s, "j_0");
    for (r, j) in [0.5, 2.0].iter().zip(j0) {
        let exact = 1.0 / (std::f64::consts::PI * r * r);
        assert!((j - exact).abs() < 1e-12 * exact);
    }
}

#[test]
fn missing_lambda_is_a_usage_error() {
    let o = fw(&["exit-mgf", "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--lambda"), "{err}");
}

#[test]
fn bad_parameters_exit_one() {
    let o = fw(&["density", "--alpha", "2.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = fw(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fw(&["--help"]).status.code(), Some(0));
}

#[test]
fn divergence_writes_output_and_exits_two() {
    let o = fw(&[
        "exit-mgf", "--lambda", "5", "--lambda-r", "1.1578", "--x", "0", "--n", "200", "--h", "1e-2", "--tmax", "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("true"));
}

#[test]
fn csv_and_json_agree() {
    let base = ["survival", "--brownian", "--x", "0,0.5", "--n", "500", "--h", "1e-2", "--t", "0.3"];
    let csv = stdout(&fw(&base));
    let mut args = base.to_vec();
    args.extend(["--format", "json"]);
    let doc: Value = serde_json::from_str(&stdout(&fw(&args))).unwrap();
    let values = column(&csv, "value");
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), values.len());
    for (row, v) in rows.iter().zip(values) {
        assert_eq!(row["value"].as_f64().unwrap(), v);
    }
    assert_eq!(doc["meta"]["mc"]["n"], 500);
}

#[test]
fn reruns_are_byte_identical_and_seed_env_overrides() {
    let args = ["hit-laplace", "--lambda", "1", "--x", "1.5", "--n", "300", "--h", "1e-2", "--tmax", "5", "--seed", "11"];
    let a = fw(&args);
    let b = fw(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let env = Command::new(env!("CARGO_BIN_EXE_fracwell"))
        .args(args)
        .env("FW_SEED", "12")
        .output()
        .unwrap();
    let mut flag = args.to_vec();
    *flag.last_mut().unwrap() = "12";
    assert_eq!(env.stdout, fw(&flag).stdout);
    assert_ne!(env.stdout, a.stdout);
}

#[test]
fn verify_suite_passes_and_writes_plot() {
    let dir = std::env::temp_dir().join(format!("fracwell-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let svg = dir.join("density.svg");
    let o = fw(&["verify", "tail-asymptotic"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("suite,check,value,lower,upper,pass"));
    let o = fw(&["density", "--plot", svg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = std::env::temp_dir().join(format!("fracwell-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# relativistic\nalpha = 1\nm = 1\nx = 1\n").unwrap();
    let o = fw(&["density", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(column(&s, "sigma")[0] > 0.0);
    // explicit flag wins
    let o = fw(&["density", "--config", cfg.to_str().unwrap(), "--m", "0"]);
    assert_eq!(column(&stdout(&o), "sigma")[0], 0.0);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn classical_groundstate_has_header() {
    let o = fw(&["groundstate", "classical", "--brownian", "--x", "0,1,2"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let first = s.lines().next().unwrap();
    let header: Value = serde_json::from_str(first.trim_start_matches("# ")).unwrap();
    assert!(header["lambda0"].as_f64().unwrap() < 0.0);
    let phi = column(&s, "phi0");
    assert!(phi[0] > phi[1] && phi[1] > phi[2]);
}

#[test]
fn moments_table_flags_divergence() {
    let o = fw(&["groundstate", "moments", "--lambda0", "4.0344", "--lambda-r", "1.1578", "--p", "1,3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let rows: Vec<&str> = s.lines().skip(1).collect();
    assert!(rows[0].ends_with("false"));
    assert!(rows[1].ends_with("true"));
}
