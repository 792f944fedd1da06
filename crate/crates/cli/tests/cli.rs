use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rsamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsamp"))
        .args(args)
        .output()
        .unwrap()
}

const EXAMPLE1: &str = "seed = 11
model.name = normal-mean
model.T = 1
data.psi = 0.6
prior.kind = normal
sampler.method = rs
sampler.B = 20000
";

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_artifacts_and_matches_exact_posterior() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), EXAMPLE1);
    let out = tmp.path().join("out");
    let o = rsamp(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "draws.csv",
        "summary.json",
        "histogram.csv",
        "report.md",
        "meta.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for key in ["method", "B", "delta", "ess", "coordinates"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert_eq!(summary["method"], "rs");
    assert_eq!(summary["B"], 20000);
    let c = &summary["coordinates"][0];
    for key in ["name", "mean", "sd", "mc_se", "quantiles"] {
        assert!(c.get(key).is_some(), "{key}");
    }
    assert!((c["mean"].as_f64().unwrap() - 0.3).abs() < 0.02);
    assert!(c["reference"]["ks"].as_f64().unwrap() < 0.02);

    let draws = fs::read_to_string(out.join("draws.csv")).unwrap();
    assert!(draws.starts_with("b,theta_1,weight_norm,j_value,vol_inv,valid\n"));
    assert_eq!(draws.lines().count(), 20001);
    let hist = fs::read_to_string(out.join("histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 101);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "seed = 3
model.name = exponential-oi
model.T = 5
data.theta0 = 0.5
data.seed = 2
prior.kind = uniform
prior.lo = 0.01
prior.hi = 10
weight.diag = 0.2, 0.8
sampler.method = rs
sampler.B = 200
sampler.quantile = 0.1
";
    let cfg = write_config(tmp.path(), text);
    let mut files = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = rsamp(&[
            "run",
            "--config",
            &cfg,
            "--threads",
            threads,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push((
            fs::read(out.join("draws.csv")).unwrap(),
            fs::read(out.join("summary.json")).unwrap(),
            fs::read(out.join("histogram.csv")).unwrap(),
        ));
    }
    assert!(files[0] == files[1]);
    assert!(files[1] == files[2]);
}

#[test]
fn zero_draws_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), EXAMPLE1);
    let o = rsamp(&["run", "--config", &cfg, "--B", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sampler.B"));
}

#[test]
fn unknown_model_exit_2_naming_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &EXAMPLE1.replace("normal-mean", "cauchy"));
    let o = rsamp(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("model.name") && err.contains("cauchy"),
        "{err}"
    );
}

#[test]
fn unknown_key_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{EXAMPLE1}sampler.tolerance = 3\n"));
    let o = rsamp(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sampler.tolerance"));
}

#[test]
fn infeasible_schedule_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "seed = 1
model.name = mixture
model.T = 1
data.psi = 0
prior.kind = uniform
prior.lo = -10
prior.hi = 10
sampler.method = abc-smc
sampler.population = 10
sampler.schedule = 1e-12
";
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    let o = rsamp(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn method_override_switches_sampler() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), EXAMPLE1);
    let out = tmp.path().join("out");
    let o = rsamp(&[
        "run",
        "--config",
        &cfg,
        "--method",
        "abc-ar",
        "--quantile",
        "0.1",
        "--B",
        "500",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["method"], "abc-ar");
    assert_eq!(summary["proposed"], 5000);
}

#[test]
fn bench_commands_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("acc");
    let o = rsamp(&[
        "bench-acceptance",
        "--seed",
        "1",
        "--proposals",
        "100000",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let acc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("acceptance.json")).unwrap()).unwrap();
    let rates: Vec<f64> = acc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["rate"].as_f64().unwrap())
        .collect();
    assert_eq!(rates.len(), 5);
    assert!(rates.windows(2).all(|r| r[0] >= r[1]));

    let out = tmp.path().join("race");
    let o = rsamp(&[
        "bench-race",
        "--seed",
        "1",
        "--proposals",
        "5000",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("report.md")).unwrap();
    for m in ["| rs |", "| abc-ar |", "| abc-smc |"] {
        assert_eq!(report.matches(m).count(), 1, "{m}");
    }

    let o = rsamp(&["table1", "--seed", "1", "--replications", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rsamp(&["bench-acceptance"]);
    assert_eq!(o.status.code(), Some(2));
}
