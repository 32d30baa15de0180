use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qpush(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qpush"));
    cmd.args(args).env_remove("QPUSH_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn qpush")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_trace_summary_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = qpush(
        &[
            "run",
            "--problem",
            "fig1-num",
            "-T",
            "2000",
            "--plot",
            "--full-trace",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trace.csv",
        "summary.json",
        "convergence.svg",
        "trace_full.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let header = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(header.starts_with("t,f_xbar,max_violation,queue_norm,drift,drift_bound,obj_bound_residual,cons_bound_residual"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"], 2000);
    assert_eq!(summary["invariant_violations"], 0);
}

#[test]
fn alpha_auto_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let o = qpush(
        &[
            "run",
            "--problem",
            "fig1-num",
            "-T",
            "10",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    let text = stdout(&o);
    assert!(text.contains("alpha = beta^2/2 + 1 = 3.95"), "{text}");
    assert!(text.contains("+ 1 = 12"), "{text}");
}

#[test]
fn replot_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = qpush(
        &[
            "run",
            "--problem",
            "fig1-num",
            "-T",
            "3000",
            "--alpha",
            "10",
            "--verify-bounds",
            "--plot",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    let first = fs::read(out.join("convergence.svg")).unwrap();
    let replot = out.join("again.svg");
    let o = qpush(
        &[
            "plot",
            "--trace",
            out.join("trace.csv").to_str().unwrap(),
            "--output",
            replot.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    assert_eq!(first, fs::read(replot).unwrap());
    assert!(out.join("bounds.csv").exists());
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("from-env");
    let flag_out = dir.path().join("from-flag");
    let o = qpush(
        &["run", "--problem", "fig1-num", "-T", "5"],
        &[("QPUSH_OUT", &env_out)],
    );
    assert!(o.status.success());
    assert!(env_out.join("trace.csv").exists());
    let o = qpush(
        &[
            "run",
            "--problem",
            "fig1-num",
            "-T",
            "5",
            "--out",
            flag_out.to_str().unwrap(),
        ],
        &[("QPUSH_OUT", &env_out)],
    );
    assert!(o.status.success());
    assert!(flag_out.join("trace.csv").exists());
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "--problem", "fig1-num", "--seed", "3", "--out", d],
        vec!["run", "--problem", "nope", "--out", d],
        vec!["run", "--out", d],
        vec![
            "run",
            "--problem",
            "qp",
            "--algo",
            "dsg",
            "--agents",
            "--out",
            d,
        ],
    ] {
        let o = qpush(&args, &[]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn bound_violation_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref.json");
    // A wrong optimum makes the objective lower bound fail at once.
    fs::write(
        &reference,
        r#"{"f_star": -100.0, "x_star": [0,0,0,0,0,0,0,0,0,0], "lambda_star": [0,0,0,0,0,0,0,0,0,0,0,0], "beta": 2.4307877427915194}"#,
    )
    .unwrap();
    let o = qpush(
        &[
            "verify",
            "--problem",
            "fig1-num",
            "-T",
            "50",
            "--alpha",
            "10",
            "--reference",
            reference.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn agents_report_message_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = qpush(
        &[
            "run",
            "--problem",
            "fig1-num",
            "--agents",
            "--alpha",
            "10",
            "-T",
            "100",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("12 prices, 12 rates"));
}

#[test]
fn bench_writes_table_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = qpush(
        &[
            "bench",
            "--problem",
            "fig1-num",
            "--alpha",
            "10",
            "-T",
            "1000",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    for f in ["bench.csv", "trace_vq.csv", "trace_dsg.csv", "bench.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let rows = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
}

#[test]
fn topology_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/fig1.json");
    let o = qpush(
        &[
            "run",
            "--topology",
            fixture,
            "--alpha",
            "10",
            "-T",
            "20000",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let f = summary["final_objective"].as_f64().unwrap();
    assert!((f - 1.65687).abs() < 2e-3, "{f}");
}
