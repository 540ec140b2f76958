use std::process::{Command, Output};

use serde_json::Value;

fn repchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repchain"))
        .args(args)
        .output()
        .expect("run repchain")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn deterministic_table_starts_with_exact_values() {
    let o = repchain(&["deterministic", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2", "--ttrunc", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "level,t,pmf,cdf,werner,fidelity"));
    let rows = data_rows(&text);
    let top: Vec<_> = rows.iter().filter(|r| r[0] == "1").collect();
    assert_eq!(top[1][1], "1");
    assert_eq!(top[1][2].parse::<f64>().unwrap(), 0.125);
    assert_eq!(top[2][2].parse::<f64>().unwrap(), 0.171875);
    // No Werner profile requested: empty fields.
    assert_eq!(top[1][4], "");
    assert_eq!(top[1][5], "");
}

#[test]
fn certain_chain_is_a_point_mass() {
    let o = repchain(&["deterministic", "--pgen", "1", "--pswap", "1", "--segments", "16", "--ttrunc", "4", "--werner"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&stdout(&o));
    let top: Vec<_> = rows.iter().filter(|r| r[0] == "4").collect();
    assert_eq!(top[1][2], "1");
    assert_eq!(top[1][4], "1");
    // Undefined Werner entries are empty, not zero.
    assert_eq!(top[2][4], "");
}

#[test]
fn header_config_reruns_to_the_same_output() {
    let dir = tempfile::tempdir().unwrap();
    let first = repchain(&[
        "deterministic", "--pgen", "0.4", "--pswap", "0.7", "--segments", "4", "--coverage", "0.9",
        "--f0", "0.95", "--tcoh", "20", "--werner",
    ]);
    assert_eq!(first.status.code(), Some(0));
    let text = stdout(&first);
    let config_line = text.lines().find_map(|l| l.strip_prefix("# config: ")).unwrap();
    let config: Value = serde_json::from_str(config_line).unwrap();
    assert_eq!(config["coverage"], 0.9);
    assert_eq!(config["distill"], 0);
    assert_eq!(config["comm-time"], false);
    let path = dir.path().join("config.json");
    std::fs::write(&path, config_line).unwrap();
    let second = repchain(&["deterministic", "--config", path.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(stdout(&second), text);
}

#[test]
fn montecarlo_is_byte_reproducible() {
    let args = ["montecarlo", "--pgen", "0.3", "--pswap", "0.6", "--segments", "4", "--samples", "1", "--seed", "7"];
    let a = repchain(&args);
    let b = repchain(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.lines().any(|l| l == "t,ecdf,ecdf_lo,ecdf_hi,werner_mean,count"));
    assert!(text.contains("# seed: 7"));
}

#[test]
fn montecarlo_json_with_eps() {
    let o = repchain(&[
        "montecarlo", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2", "--eps", "0.1", "--z", "0.01",
        "--format", "json", "--threads", "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["samples"], 265);
    assert_eq!(v["config"]["seed"], 0);
    let rows = v["rows"].as_array().unwrap();
    let total: u64 = rows.iter().map(|r| r["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 265);
    assert!(rows[0]["werner_mean"].is_null());
}

#[test]
fn output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let o = repchain(&[
        "mean-bounds", "--pgen", "1", "--pswap", "1", "--segments", "16", "--ttrunc", "64", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let rows = data_rows(&text);
    let ratio: f64 = rows[0][8].parse().unwrap();
    assert!((0.19..=0.21).contains(&ratio), "{ratio}");
}

#[test]
fn mean_bounds_sweep_at_zero_truncation() {
    let o = repchain(&["mean-bounds", "--pgen-grid", "4", "--pswap", "0.5", "--segments", "2,8", "--ttrunc", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 8);
    for r in rows {
        let n: i32 = r[1].parse().unwrap();
        let pgen: f64 = r[2].parse().unwrap();
        let upper: f64 = r[6].parse().unwrap();
        assert_eq!(r[5], "0");
        let analytic = 4f64.powi(n) / pgen;
        assert!((upper - analytic).abs() < 1e-9 * analytic);
    }
}

#[test]
fn compare_passes_and_reports() {
    let o = repchain(&[
        "compare", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2", "--ttrunc", "200", "--samples",
        "20000", "--z", "0.001", "--seed", "3", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["distance"].as_f64().unwrap() <= v["threshold"].as_f64().unwrap());

    let certain = repchain(&["compare", "--pgen", "1", "--pswap", "1", "--segments", "8", "--ttrunc", "5", "--samples", "100"]);
    assert_eq!(certain.status.code(), Some(0));
    assert!(stdout(&certain).contains("# distance: 0"));
}

#[test]
fn compare_failure_has_its_own_exit_code() {
    // One sample against a wide distribution: the ECDF is a single step, far
    // outside the loosest band. Seed 3 lands in the upper tail.
    let o = repchain(&[
        "compare", "--pgen", "0.1", "--pswap", "0.5", "--segments", "4", "--ttrunc", "3000", "--samples", "1",
        "--z", "0.999", "--seed", "3",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("# pass: false"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds DKW threshold"));
}

#[test]
fn invalid_input_exit_code() {
    for args in [
        vec!["deterministic", "--pgen", "0.5", "--pswap", "0.5", "--segments", "3", "--ttrunc", "10"],
        vec!["deterministic", "--pgen", "1.5", "--pswap", "0.5", "--segments", "2", "--ttrunc", "10"],
        vec!["deterministic", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2"],
        vec!["deterministic", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2", "--ttrunc", "5", "--coverage", "0.9"],
        vec!["deterministic", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2", "--ttrunc", "5", "--distill", "1"],
        vec!["montecarlo", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2"],
        vec!["montecarlo", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2", "--samples", "5", "--eps", "0.1"],
        vec!["montecarlo", "--pgen", "0.5,0.6", "--pswap", "0.5", "--segments", "2", "--samples", "5"],
        vec!["montecarlo", "--pgen", "0.5", "--pswap", "0.5", "--segments", "2", "--samples", "5", "--w0", "0.9", "--f0", "0.9"],
        vec!["bogus"],
    ] {
        let o = repchain(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = repchain(&["deterministic", "--pgen", "0.5", "--pswap", "0.5", "--segments", "12", "--ttrunc", "10"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("2^n"));
}
