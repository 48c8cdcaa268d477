//! End-to-end checks of the compiled binary: artifact layout, determinism
//! of the non-timing columns, and config-file semantics.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pinn-cli"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn pinn-cli");
    assert!(
        out.status.success(),
        "pinn-cli {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Loss CSV rows with the wall-clock column blanked out.
fn loss_rows_without_timing(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .expect("loss.csv")
        .lines()
        .skip(1)
        .map(|line| {
            let mut fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7, "bad loss row {line:?}");
            fields.pop();
            fields.join(",")
        })
        .collect()
}

const TINY: &[&str] = &["--n0", "8", "--nb", "8", "--nf", "40"];

#[test]
fn train_writes_artifacts_and_reruns_reproduce_loss_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let mut args = vec!["train"];
        args.extend_from_slice(TINY);
        args.extend_from_slice(&["--epochs", "4", "--seed", "3", "--out", out.to_str().unwrap()]);
        run_ok(&args);
    }
    for name in ["loss.csv", "loss.svg", "checkpoint.txt"] {
        assert!(out_a.join(name).exists(), "missing {name}");
    }
    let rows_a = loss_rows_without_timing(&out_a.join("loss.csv"));
    let rows_b = loss_rows_without_timing(&out_b.join("loss.csv"));
    assert_eq!(rows_a.len(), 4);
    assert_eq!(rows_a, rows_b, "same seed must reproduce identical loss columns");
}

#[test]
fn config_file_supplies_defaults_and_explicit_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        "# comment line\nepochs=3\nseed=5\nn0=8\nnb=8\nnf=40\nschedule=0:0.02\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--epochs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = loss_rows_without_timing(&out.join("loss.csv"));
    assert_eq!(rows.len(), 2, "explicit --epochs must override the file");
    assert!(rows[0].ends_with(",0.02"), "schedule from file must apply: {}", rows[0]);
    let checkpoint = fs::read_to_string(out.join("checkpoint.txt")).unwrap();
    let header = checkpoint.lines().next().unwrap();
    assert!(header.contains("\"seed\":5"), "seed from file must apply: {header}");
}

#[test]
fn evaluate_consumes_a_checkpoint_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let train_out = dir.path().join("train");
    let mut args = vec!["train"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--epochs", "4", "--out", train_out.to_str().unwrap()]);
    run_ok(&args);

    let eval_out = dir.path().join("eval");
    let checkpoint = train_out.join("checkpoint.txt");
    let out = run_ok(&[
        "evaluate",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--grid",
        "6x17",
        "--snapshots",
        "0.25,1.0",
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("relative L2 error"), "stdout: {stdout}");
    for name in [
        "surface.csv",
        "surface.svg",
        "snapshot_t0.25.csv",
        "snapshot_t1.csv",
        "error_report.csv",
    ] {
        assert!(eval_out.join(name).exists(), "missing {name}");
    }
    let surface = fs::read_to_string(eval_out.join("surface.csv")).unwrap();
    assert_eq!(surface.lines().count(), 1 + 6 * 17);

    let missing = bin()
        .args(["evaluate", "--checkpoint", dir.path().join("nope.txt").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!missing.status.success(), "absent checkpoint must be an error");
}

#[test]
fn compare_emits_the_four_row_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let mut args = vec!["compare"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--epochs", "2", "--grid", "8x33", "--out", out.to_str().unwrap()]);
    run_ok(&args);
    let table = fs::read_to_string(out.join("compare.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "optimizer,final_loss,rel_l2,seconds,epochs");
    assert_eq!(lines.len(), 5);
    for (line, name) in lines[1..].iter().zip(["adam", "adamax", "rmsprop", "diffgrad"]) {
        assert!(line.starts_with(&format!("{name},")), "row order: {line}");
        assert!(out.join(name).join("loss.csv").exists());
    }
}

#[test]
fn sample_dump_and_oracle_dump_write_parseable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("points.csv");
    run_ok(&[
        "sample-dump",
        "--n0",
        "5",
        "--nb",
        "6",
        "--nf",
        "7",
        "--sampling",
        "lhs",
        "--seed",
        "9",
        "--out",
        sample.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&sample).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "family,t,x,target");
    assert_eq!(lines.len(), 1 + 5 + 6 + 7);
    assert_eq!(lines.iter().filter(|l| l.starts_with("initial,0,")).count(), 5);

    let grid = dir.path().join("reference.csv");
    run_ok(&[
        "oracle-dump",
        "--method",
        "colehopf",
        "--grid",
        "3x8",
        "--quad-order",
        "64",
        "--out",
        grid.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&grid).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x,u");
    assert_eq!(lines.len(), 1 + 4 * 9, "inclusive (3+1) x (8+1) grid");
    // the t = 0 row is the initial profile: first interior x of row 0
    let first = lines[1 + 1];
    assert!(first.starts_with("0,-0.75,"), "row: {first}");
}

#[test]
fn bad_arguments_fail_with_a_message() {
    let out = bin().args(["train", "--optimizer", "sgd"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sgd"), "stderr should name the offender: {err}");

    let out = bin().args(["oracle-dump", "--method", "spectral", "--grid", "3x8", "--out", "/tmp/x.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
