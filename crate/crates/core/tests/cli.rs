//! End-to-end runs of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surrogate-newton"))
        .args(args)
        .output()
        .expect("failed to spawn the binary")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("schema_version = 1\n{body}")).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn effective_dim_prints_csv() {
    let text = stdout(&cli(&["effective-dim"]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dataset,n,d,lambda,m,d_lambda,gamma,lambda_prime,feasible"));
    let row = text
        .lines()
        .find(|l| l.contains(",1.0000000000000000e1,50,"))
        .expect("row for lambda = 10, m = 50");
    let lambda_prime: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
    assert!((lambda_prime - 4.06).abs() < 1e-9);
    assert!(!text.contains('\r'));
}

#[test]
fn json_output_carries_config_and_fingerprint() {
    let text = stdout(&cli(&["effective-dim", "--format", "json", "--seed", "5"]));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["experiment"], "effective-dim");
    assert_eq!(doc["config"]["seed"], "5");
    assert!(doc["fingerprint"]["rng"].is_string());
}

#[test]
fn out_file_is_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "m = 30\nq_grid = [2, 4]\ntrials = 4\n");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("c{i}.csv"));
        let res = cli(&[
            "concentration",
            "--config",
            &config,
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        stdout(&res);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn libsvm_dataset_is_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.svm");
    let mut body = String::new();
    for i in 0..30 {
        let x = i as f64 / 10.0;
        body += &format!("{} 1:{x} 2:{} 4:{}\n", if i % 3 == 0 { -1 } else { 1 }, (x * 1.7).sin(), 1.0 + x * x);
    }
    std::fs::write(&data, body).unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "dataset = \"{}\"\ndata_format = \"libsvm\"\nlambda_grid = [1.0]\nm_grid = [10]\n",
            data.display()
        ),
    );
    let text = stdout(&cli(&["effective-dim", "--config", &config]));
    let row = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[1], "30");
    assert_eq!(fields[2], "4");
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "no_such_key = 1\n");
    let res = cli(&["bias-sweep", "--config", &unknown]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));

    let mismatch = write_config(dir.path(), "experiment = \"dpp-check\"\n");
    assert!(!cli(&["bias-sweep", "--config", &mismatch]).status.success());

    let infeasible = write_config(dir.path(), "m_grid = [5]\nlambda_grid = [1.0]\n");
    let res = cli(&["avg-compare", "--config", &infeasible]);
    assert!(!res.status.success());
}
