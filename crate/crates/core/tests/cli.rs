//! End-to-end checks of the command-line surface and exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spiketail"))
}

fn write_demo_dataset(path: &Path, n: usize) {
    // Deterministic dataset with a tail interaction: positive-x treated
    // subjects benefit in proportion to x.
    let mut text = String::from("y,t,x\n");
    for i in 0..n {
        let x = if i % 3 == 0 { 0.0 } else { (i % 17) as f64 / 4.0 };
        let t = i % 2;
        let noise = ((i * 2654435761 % 97) as f64 / 97.0 - 0.5) * 2.0;
        let y = noise + if t == 1 { 1.5 * x } else { 0.0 };
        text.push_str(&format!("{y},{t},{x}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn test_command_runs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("trial.csv");
    write_demo_dataset(&data, 80);

    let out1 = dir.path().join("r1.csv");
    let out2 = dir.path().join("r2.csv");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["test", "--input"])
            .arg(&data)
            .args(["--perms", "300", "--seed", "9", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let b1 = std::fs::read(&out1).unwrap();
    assert_eq!(b1, std::fs::read(&out2).unwrap());
    let text = String::from_utf8(b1).unwrap();
    assert!(text.starts_with("spike_stat,p_a,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn malformed_dataset_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "y,t,x\n1.0,2,0.5\n").unwrap();
    let out = bin()
        .args(["test", "--input"])
        .arg(&data)
        .args(["--perms", "10", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2"), "stderr: {msg}");

    // Unknown flag is a usage error.
    let out = bin().args(["test", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_exits_with_code_two() {
    let out = bin()
        .args(["test", "--input", "/nonexistent/file.csv", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_cutpoint_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    std::fs::write(&data, "y,t,x\n1,1,0.1\n0,0,0.2\n1,1,0.3\n0,0,0.4\n").unwrap();
    let out = bin()
        .args(["cutpoint", "--input"])
        .arg(&data)
        .args(["--perms", "10", "--boot", "10", "--seed", "1", "--out"])
        .arg(dir.path().join("cp.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnose_and_cutpoint_write_expected_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("trial.csv");
    write_demo_dataset(&data, 120);

    let dout = dir.path().join("diag.csv");
    let status = bin()
        .args(["diagnose", "--input"])
        .arg(&data)
        .args(["--perms", "200", "--boot", "40", "--seed", "5", "--out"])
        .arg(&dout)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&dout).unwrap();
    assert!(text.starts_with("record,name,x,value,lo,hi\n"));
    assert!(text.contains("pvalue,p_fisher,"));
    assert!(text.contains("curve,effect,"));

    let cout = dir.path().join("cut.csv");
    let status = bin()
        .args(["cutpoint", "--input"])
        .arg(&data)
        .args(["--perms", "200", "--boot", "40", "--seed", "5", "--out"])
        .arg(&cout)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&cout).unwrap();
    assert!(text.starts_with("tau_hat,c_hat,p_perm,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn theory_and_copula_commands_produce_grids() {
    let dir = tempfile::tempdir().unwrap();

    let tout = dir.path().join("theory.csv");
    let status = bin()
        .args([
            "theory", "--delta0", "5", "--d0", "0", "--sigma", "7.9", "--n", "120",
            "--pi0-grid", "0:0.8:0.1", "--out",
        ])
        .arg(&tout)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&tout).unwrap();
    assert_eq!(text.lines().count(), 10); // header + 9 grid points
    let powers: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(powers.windows(2).all(|w| w[1] <= w[0] + 1e-12), "power must fall with pi0");

    let cout = dir.path().join("copula.csv");
    let status = bin()
        .args(["copula", "--rhos", "0,0.5", "--draws", "2000", "--seed", "3", "--out"])
        .arg(&cout)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&cout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("rho,draws,fisher_rejections,"));
}

#[test]
fn simulate_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        r#"
replicates = 10
perms = 40
seed = 2
methods = ["fisher"]

[[scenario]]
kind = "spike_only"
n = 30
pi0 = 0.4
delta = 2.0
"#,
    )
    .unwrap();
    let out = dir.path().join("cells.csv");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    let rate_idx = header.iter().position(|h| *h == "rate").unwrap();
    let rej_idx = header.iter().position(|h| *h == "rejections").unwrap();
    let rate: f64 = row[rate_idx].parse().unwrap();
    let rej: f64 = row[rej_idx].parse().unwrap();
    assert_eq!(rate, rej / 10.0);
}
