use std::path::Path;
use std::process::{Command, Output};

use fairkit::fixture::COMPAS_JSON;
use fairkit::ingest::ingest_csv;
use fairkit::report::{audit_records, AuditOptions};
use fairkit::schema::SchemaConfig;
use fairkit::synth::{generate, write_csv, SyntheticSpec};
use fairkit::CliError;
use sha2::{Digest, Sha256};

const COMPAS_SHA256: &str = "b1666219de4ddbcafa7f8f013630de3534ebf20a9d0cca80351f983a0e860c75";

fn fairkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairkit"))
        .args(args)
        .env_remove("FAIRKIT_SEED")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn compas_fixture_is_pinned() {
    let digest = Sha256::digest(COMPAS_JSON.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, COMPAS_SHA256);
}

#[test]
fn ingest_well_formed_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "a.csv",
        "group,y,pred,score\na,1,1,0.9\na,0,0,0.1\nb,1,0,0.4\n",
    );
    let got = ingest_csv(Path::new(&p), &SchemaConfig::default(), false).unwrap();
    assert_eq!(got.records.len(), 3);
    assert!(got.skipped.is_empty());
}

#[test]
fn ingest_missing_group_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "a.csv", "team,y,pred,score\na,1,1,0.9\n");
    match ingest_csv(Path::new(&p), &SchemaConfig::default(), false) {
        Err(CliError::Schema(msg)) => assert!(msg.contains("group"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn ingest_out_of_range_score() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "a.csv", "group,y,pred,score\na,1,1,1.3\n");
    match ingest_csv(Path::new(&p), &SchemaConfig::default(), false) {
        Err(CliError::Parse(rows)) => {
            assert_eq!(rows[0].row, 1);
            assert!(rows[0].message.contains("out of range"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn ingest_missing_file() {
    let err = ingest_csv(
        Path::new("/nonexistent/x.csv"),
        &SchemaConfig::default(),
        false,
    )
    .unwrap_err();
    assert!(matches!(err, CliError::File { .. }));
}

#[test]
fn propublica_preset() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "compas.csv",
        "id,race,score_text,two_year_recid\n1,African-American,High,1\n2,Caucasian,Low,0\n3,Caucasian,Medium,0\n",
    );
    let got = ingest_csv(Path::new(&p), &SchemaConfig::propublica(), false).unwrap();
    let preds: Vec<bool> = got.records.iter().map(|r| r.pred).collect();
    assert_eq!(preds, [true, false, true]);
    assert!(got.records.iter().all(|r| r.score.is_none()));
}

#[test]
fn generate_is_deterministic() {
    let spec = SyntheticSpec::two_group_demo();
    let csv = |seed| {
        let mut buf = Vec::new();
        write_csv(&generate(&spec, seed).unwrap(), &mut buf).unwrap();
        buf
    };
    assert_eq!(csv(3), csv(3));
    assert_ne!(csv(3), csv(4));
}

#[test]
fn generated_prevalence_within_binomial_bound() {
    let mut spec = SyntheticSpec::two_group_demo();
    spec.groups.truncate(1);
    spec.groups[0].prevalence = 0.25;
    let records = generate(&spec, 7).unwrap();
    let positives = records.iter().filter(|r| r.y).count() as f64;
    let bound = 3.0 * (1e4f64 * 0.25 * 0.75).sqrt();
    assert!((positives - 2500.0).abs() <= bound, "{positives}");
}

#[test]
fn generate_ingest_audit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let records = generate(&SyntheticSpec::two_group_demo(), 11).unwrap();
    let path = dir.path().join("synthetic.csv");
    write_csv(&records, std::fs::File::create(&path).unwrap()).unwrap();
    let back = ingest_csv(&path, &SchemaConfig::default(), false)
        .unwrap()
        .records;
    assert_eq!(back, records);
    let opts = AuditOptions::default();
    assert_eq!(
        audit_records(&back, &opts).unwrap().to_json().unwrap(),
        audit_records(&records, &opts).unwrap().to_json().unwrap()
    );
}

#[test]
fn binary_selftest() {
    let out = fairkit(&["selftest", "--trials", "2000", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["violations"], 0);
    assert_eq!(v["trials"], 2000);
}

#[test]
fn binary_selftest_independent_of_threads() {
    let a = fairkit(&[
        "selftest",
        "--trials",
        "3000",
        "--seed",
        "5",
        "--threads",
        "1",
    ]);
    let b = fairkit(&[
        "selftest",
        "--trials",
        "3000",
        "--seed",
        "5",
        "--threads",
        "7",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn binary_audit_markdown() {
    let out = fairkit(&["audit", "--fixture", "compas", "--format", "markdown"]);
    assert_eq!(out.status.code(), Some(0));
    let md = String::from_utf8(out.stdout).unwrap();
    assert!(md.contains("1.1436") && md.contains("0.8841"));
    assert!(md.contains("Set 3"));
}

#[test]
fn binary_audit_json_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    assert_eq!(
        fairkit(&["generate", "--seed", "2", "--out", p.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let a = fairkit(&["audit", "--input", p.to_str().unwrap()]);
    let b = fairkit(&["audit", "--input", p.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn binary_usage_errors_exit_one() {
    let out = fairkit(&["audit", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(fairkit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fairkit(&[]).status.code(), Some(1));
    assert_eq!(fairkit(&["audit"]).status.code(), Some(1));
    assert_eq!(fairkit(&["--help"]).status.code(), Some(0));
}

#[test]
fn binary_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        fairkit(&["audit", "--input", "/nonexistent.csv"])
            .status
            .code(),
        Some(1)
    );
    let p = write(dir.path(), "bad.csv", "group,y,pred,score\na,1,1,7\n");
    let out = fairkit(&["audit", "--input", &p]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
    assert_eq!(
        fairkit(&["audit", "--input", &p, "--skip-bad-rows"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn loose_tolerance_trips_the_theorem_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("group,y,pred\n");
    for (g, tp, fp, fn_, tn) in [("a", 40, 10, 10, 40), ("b", 20, 15, 5, 60)] {
        for (n, y, p) in [(tp, 1, 1), (fp, 0, 1), (fn_, 1, 0), (tn, 0, 0)] {
            for _ in 0..n {
                text.push_str(&format!("{g},{y},{p}\n"));
            }
        }
    }
    let p = write(dir.path(), "d.csv", &text);
    let schema = write(
        dir.path(),
        "s.json",
        r#"{"group":"group","outcome":"y","prediction":"pred"}"#,
    );
    assert_eq!(
        fairkit(&["audit", "--input", &p, "--schema", &schema])
            .status
            .code(),
        Some(0)
    );
    let loose = fairkit(&[
        "audit",
        "--input",
        &p,
        "--schema",
        &schema,
        "--tolerance",
        "0.9",
    ]);
    assert_eq!(loose.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&loose.stdout).unwrap();
    assert_eq!(v["pairs"][0]["report"]["theorem_violated"], true);
}

#[test]
fn seed_flag_beats_environment() {
    let run = |args: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_fairkit"));
        c.args(args).env_remove("FAIRKIT_SEED");
        if let Some(s) = env {
            c.env("FAIRKIT_SEED", s);
        }
        c.output().unwrap().stdout
    };
    let base = run(&["generate", "--seed", "9"], None);
    assert_eq!(run(&["generate"], Some("9")), base);
    assert_eq!(run(&["generate", "--seed", "9"], Some("10")), base);
    assert_ne!(run(&["generate"], Some("10")), base);
}

#[test]
fn generate_respects_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"seed":3,"groups":[{"name":"x","n":0,"prevalence":0.3,
            "positive":{"mean":0.7,"concentration":5},"negative":{"mean":0.3,"concentration":5}}]}"#,
    );
    let out = fairkit(&["generate", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "group,y,pred,score\n"
    );
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"groups":[{"name":"x","n":5,"prevalence":2,
        "positive":{"mean":0.7,"concentration":5},"negative":{"mean":0.3,"concentration":5}}]}"#,
    );
    assert_eq!(
        fairkit(&["generate", "--spec", &bad]).status.code(),
        Some(1)
    );
}

#[test]
fn binary_equalize_modes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    fairkit(&["generate", "--seed", "4", "--out", p.to_str().unwrap()]);
    let p = p.to_str().unwrap();

    let out = fairkit(&["equalize", "--input", p, "--odds", "--seed", "1"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["equalization"]["mode"], "odds");
    assert_eq!(v["meta"]["seed"], 1);

    let out = fairkit(&["equalize", "--input", p, "--target", "precision"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["equalization"]["target"], "ppv");
    assert_eq!(v["equalization"]["groups"][0]["achieved"], true);

    assert_eq!(fairkit(&["equalize", "--input", p]).status.code(), Some(1));
    assert_eq!(
        fairkit(&["equalize", "--input", p, "--target", "nonsense"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        fairkit(&["equalize", "--input", p, "--odds", "--target", "tpr"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn equalize_needs_scores() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "d.csv",
        "group,y,pred\na,1,1\na,0,0\nb,1,0\nb,0,1\n",
    );
    let schema = write(
        dir.path(),
        "s.json",
        r#"{"group":"group","outcome":"y","prediction":"pred"}"#,
    );
    let out = fairkit(&[
        "equalize", "--input", &p, "--schema", &schema, "--target", "tpr",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("score"));
}
