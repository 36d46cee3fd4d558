use std::path::Path;
use std::process::{Command, Output};

use ahpe_bench::{CompareSummary, Summary, CSV_HEADER};

fn bench(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahpe-bench"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn quartic_run_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q");
    let o = bench(&["run", "--problem", "quartic", "--d", "3", "--check-certificates"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let mut rd = csv::Reader::from_path(out.with_extension("csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, CSV_HEADER);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i + 1);
        for field in r.iter().skip(1) {
            field.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn unknown_problem_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["run", "--problem", "rosenbrock"], &dir.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["logistic", "logsumexp", "lasso", "quartic"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn invalid_parameters_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(
        &["run", "--problem", "logistic", "--sigma-l", "0.9", "--sigma-u", "0.5"],
        &dir.path().join("x"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn loose_inner_solver_fails_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(
        &[
            "run",
            "--problem",
            "logistic",
            "--sigma-hat",
            "0",
            "--inner-sigma",
            "0.5",
            "--ats",
            "generic",
            "--check-certificates",
        ],
        &dir.path().join("x"),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn summary_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = bench(
        &["run", "--problem", "logistic", "--report", "potential", "--report", "rate", "--report", "bisect"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.with_extension("json")).unwrap();
    let s: Summary = serde_json::from_str(&text).unwrap();
    let again: Summary = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(s, again);
    assert!(s.potential.is_some() && s.rate.is_some() && s.bisect.is_some());
    assert_eq!(s.certificates.as_ref().unwrap().violations, 0);
}

#[test]
fn baselines_run_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["gd", "agd", "basic"] {
        let o = bench(&["run", "--problem", "quartic", "--method", method], &dir.path().join(method));
        assert_eq!(o.status.code(), Some(0), "{method}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn compare_aligns_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = bench(
        &["compare", "--problem", "logistic", "--method", "optimal-d2,agd,gd", "--tol", "1e-6"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: CompareSummary = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(s.methods, ["optimal-d2", "agd", "gd"]);
    assert!(s.iterations_to_tol.iter().all(|k| k.is_some()));

    let mut rd = csv::Reader::from_path(out.with_extension("csv")).unwrap();
    assert_eq!(rd.headers().unwrap().len(), 4);
    assert!(rd.records().count() >= s.iterations_to_tol.iter().flatten().copied().max().unwrap());
}

#[test]
fn compare_needs_two_methods() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["compare", "--problem", "logistic", "--method", "gd"], &dir.path().join("c"));
    assert_eq!(o.status.code(), Some(2));
}
