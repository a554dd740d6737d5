use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_recm"));
    c.env_remove("RECM_OUTPUT_DIR");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn error_json(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.lines().last().unwrap()).unwrap()
}

fn ingest_q1(dir: &Path) -> PathBuf {
    run(bin()
        .arg("ingest")
        .arg(fixture("ledger.csv"))
        .args(["--filter", "maturity=ON", "--out-dir"])
        .arg(dir));
    dir.join("graph_2011Q1.csv")
}

#[test]
fn ingest_writes_one_graph_per_quarter() {
    let dir = tempfile::tempdir().unwrap();
    ingest_q1(dir.path());
    assert!(dir.path().join("graph_2011Q2.csv").exists());
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ingest.json")).unwrap()).unwrap();
    assert_eq!(summary["periods"].as_array().unwrap().len(), 2);
    assert_eq!(summary["filtered"], 72);
}

#[test]
fn fit_meets_tolerance_for_every_model() {
    let dir = tempfile::tempdir().unwrap();
    let graph = ingest_q1(dir.path());
    for model in ["decm", "rwcm", "recm"] {
        let out = dir.path().join(format!("{model}.json"));
        run(bin()
            .arg("fit")
            .arg(&graph)
            .args(["--model", model, "--tol", "1e-4", "-o"])
            .arg(&out));
        let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert_eq!(doc["model"], model);
        assert!(doc["fit"]["residual_sup_norm"].as_f64().unwrap() <= 1e-4);
        assert_eq!(doc["fit"]["converged"], true);
    }
}

#[test]
fn sampling_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let graph = ingest_q1(dir.path());
    let params = dir.path().join("p.json");
    run(bin()
        .arg("fit")
        .arg(&graph)
        .args(["--model", "recm", "-o"])
        .arg(&params));
    let mut files = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("s{k}"));
        run(bin()
            .arg("sample")
            .arg(&params)
            .args(["--samples", "1000", "--seed", "42", "--out-dir"])
            .arg(&out));
        files.push(fs::read(out.join("samples.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert!(files[0].starts_with(b"sample_index,src_label,dst_label,weight\n"));
}

#[test]
fn output_dir_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    run(bin()
        .arg("coreperiphery")
        .arg(fixture("graph.csv"))
        .env("RECM_OUTPUT_DIR", dir.path()));
    let cp: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("coreperiphery.json")).unwrap())
            .unwrap();
    assert_eq!(cp["core"], serde_json::json!(["a", "b", "c"]));
    assert_eq!(cp["error"], 0.0);
}

#[test]
fn stats_and_motifs_against_an_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let graph = fixture("graph.csv");
    let params = dir.path().join("p.json");
    run(bin()
        .arg("fit")
        .arg(&graph)
        .args(["--model", "decm", "-o"])
        .arg(&params));
    run(bin()
        .arg("stats")
        .arg(&graph)
        .arg("--params")
        .arg(&params)
        .args(["--samples", "50", "--out-dir"])
        .arg(dir.path()));
    let stats: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["global"]["links"], 9);
    assert!(dir.path().join("ensemble_values.csv").exists());
    run(bin()
        .arg("motifs")
        .arg(&graph)
        .arg("--params")
        .arg(&params)
        .args(["--samples", "50", "--out-dir"])
        .arg(dir.path()));
    let census = fs::read_to_string(dir.path().join("motifs.csv")).unwrap();
    assert_eq!(census.lines().count(), 14);
    let z = fs::read_to_string(dir.path().join("motif_z.csv")).unwrap();
    assert_eq!(z.lines().count(), 27);
    assert!(z.starts_with("model,period,motif_id,variant,z\ndecm,all,1,unweighted,"));
}

fn report(dir: &Path) {
    run(bin()
        .arg("report")
        .arg(fixture("ledger.csv"))
        .args([
            "--filter",
            "maturity=ON",
            "--samples",
            "60",
            "--seed",
            "11",
            "--out-dir",
        ])
        .arg(dir));
}

#[test]
fn report_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    report(dir.path());
    for name in ["report.csv", "motif_z.csv"] {
        let produced = fs::read(dir.path().join(name)).unwrap();
        if std::env::var_os("RECM_BLESS").is_some() {
            fs::create_dir_all(golden("")).unwrap();
            fs::write(golden(name), &produced).unwrap();
        }
        let expected = fs::read(golden(name)).unwrap();
        assert!(produced == expected, "{name} differs from its golden copy");
    }
}

#[test]
fn report_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    report(a.path());
    report(b.path());
    for name in [
        "report.csv",
        "motif_z.csv",
        "period_2011Q1.json",
        "period_2011Q2.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn failures_are_reported_as_json() {
    let out = bin()
        .args(["fit", "missing.csv", "--model", "recm"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "io");

    let out = bin().args(["fit", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "date,lender,borrower,amount\n2011-01-03,A,B,5\n2011-01-04,A,A,5\n",
    )
    .unwrap();
    let out = bin()
        .arg("ingest")
        .arg(&bad)
        .arg("--strict")
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = error_json(&out);
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains("line 3"));

    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"schema_version": 1, "model": "recm"}"#).unwrap();
    let out = bin()
        .arg("sample")
        .arg(&params)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["error"], "json");
}
