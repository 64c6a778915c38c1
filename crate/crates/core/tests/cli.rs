use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn covlrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covlrt"))
        .args(args)
        .env_remove("COVLRT_THREADS")
        .output()
        .expect("binary runs")
}

fn csv_file(rows: usize, cols: usize, seed: u64) -> tempfile::NamedTempFile {
    // small deterministic pseudo-random content
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for _ in 0..rows {
        let cells: Vec<String> = (0..cols)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                format!("{:.4}", (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
            })
            .collect();
        writeln!(f, "{}", cells.join(",")).unwrap();
    }
    f
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn lite_test_happy_path() {
    let a = csv_file(5, 20, 1);
    let b = csv_file(5, 25, 2);
    let out = covlrt(&[
        "test",
        a.path().to_str().unwrap(),
        b.path().to_str().unwrap(),
        "--variant",
        "lite",
        "--kurtosis",
        "gaussian",
    ]);
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "test");
    assert_eq!(v["config"]["sidedness"], "two-sided");
    assert_eq!(v["config"]["level"], 0.05);
    let s = &v["results"]["statistics"][0];
    assert_eq!(s["variant"], "lite-lrt");
    assert_eq!((v["results"]["n1"].as_u64(), v["results"]["n2"].as_u64()), (Some(19), Some(24)));
    let t = s["standardized"].as_f64().unwrap();
    let pv = s["p_value"].as_f64().unwrap();
    let expected = 2.0 * 0.5 * libm::erfc(t.abs() / std::f64::consts::SQRT_2);
    assert!((pv - expected.min(1.0)).abs() < 1e-15);
    assert!(v["timings"].is_null());
}

#[test]
fn test_with_known_kurtosis_and_comparators() {
    let a = csv_file(20, 4, 3);
    let b = csv_file(30, 4, 4);
    let out = covlrt(&[
        "test",
        a.path().to_str().unwrap(),
        b.path().to_str().unwrap(),
        "--orientation",
        "columns",
        "--variant",
        "both",
        "--kurtosis",
        "known:-1.2,-1.2",
        "--sided",
        "lower",
        "--comparators",
    ]);
    let v = json(&out);
    assert_eq!(v["results"]["p"], 4);
    assert_eq!(v["results"]["statistics"].as_array().unwrap().len(), 2);
    assert_eq!(v["results"]["statistics"][1]["kurtosis"]["delta1"], -1.2);
    assert_eq!(v["results"]["decisions"].as_array().unwrap().len(), 4);
}

#[test]
fn dimensions_assumption_exits_two() {
    let a = csv_file(12, 5, 5);
    let b = csv_file(12, 7, 6);
    let out = covlrt(&["test", a.path().to_str().unwrap(), b.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Dimensions Assumption p < n1+n2"), "{err}");
}

#[test]
fn usage_and_parse_errors_exit_one() {
    let out = covlrt(&["test", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = covlrt(&["simulate", "--case", "9", "--n1", "5", "--n2", "5", "--p", "2"]);
    assert_eq!(out.status.code(), Some(1));

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(bad, "1,2,3\n4,x,6\n").unwrap();
    let good = csv_file(2, 3, 7);
    let out = covlrt(&["test", bad.path().to_str().unwrap(), good.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(covlrt(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_is_thread_independent_and_csv_agrees_with_json() {
    let base = [
        "simulate", "--case", "2", "--n1", "20", "--n2", "30", "--p", "10", "--replicates", "60",
        "--seed", "3",
    ];
    let one = covlrt(&[&base[..], &["--threads", "1"]].concat());
    let four = covlrt(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one.stdout, four.stdout);
    let v = json(&one);
    assert_eq!(v["config"]["kurtosis_mode"], "true-values");
    assert!(v["config"].get("threads").is_none());

    let csv = covlrt(&[&base[..], &["--format", "csv"]].concat());
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "test,rate,rejections,completed,statistic_mean,statistic_variance"
    );
    for (line, tally) in lines.zip(v["results"]["tests"].as_array().unwrap()) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[4].parse::<f64>().unwrap(), tally["statistic"]["mean"].as_f64().unwrap());
        assert_eq!(cells[1].parse::<f64>().unwrap(), tally["rate"].as_f64().unwrap());
    }
}

#[test]
fn log_returns_pipeline_feeds_test() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    let mut text = String::from("date,AAA,BBB,CCC\n");
    for d in 0..12u32 {
        let f = |k: u32| 10.0 + ((d * 7 + k * 5) % 13) as f64;
        text.push_str(&format!("2012-03-{:02},{},{},{}\n", d + 1, f(1), f(2), f(3)));
    }
    std::fs::write(&prices, text).unwrap();
    let returns = dir.path().join("returns.csv");
    let out = covlrt(&[
        "log-returns",
        prices.to_str().unwrap(),
        "--from",
        "2012-03-02",
        "--returns-out",
        returns.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert_eq!(v["results"]["n_obs"], 10);
    assert_eq!(v["results"]["p"], 3);
    let r0 = v["results"]["returns"][0][0].as_f64().unwrap();
    assert!((r0 - (f64::ln(10.0 + 19.0 % 13.0) - f64::ln(10.0 + 12.0 % 13.0))).abs() < 1e-15);

    let out = covlrt(&[
        "estimate-kurtosis",
        returns.to_str().unwrap(),
        returns.to_str().unwrap(),
        "--orientation",
        "columns",
        "--header",
    ]);
    let v = json(&out);
    assert_eq!(v["results"]["method"], "pooled-leave-one-out");
}

#[test]
fn density_and_surface_commands() {
    let v = json(&covlrt(&["density", "--p", "40", "--n1", "25", "--n2", "35", "--points", "5"]));
    let q = v["results"]["full_ell"]["quadrature"].as_f64().unwrap();
    let c = v["results"]["full_ell"]["closed_form"].as_f64().unwrap();
    assert!((q - c).abs() < 1e-6);
    assert_eq!(v["results"]["density"].as_array().unwrap().len(), 5);

    let out = covlrt(&[
        "surface", "--y1-range", "0.5,0.5", "--y2-range", "0.5,0.5", "--steps", "1", "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("y1,y2,value\n0.5,0.5,"));
}
