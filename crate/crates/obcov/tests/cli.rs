use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use obcov::matrix_io::{parse_matrix_csv, ERROR_FOOTER};
use obcov_core::estimators::estimate_stream;
use obcov_core::quantize::{decode_stream, encode_stream};

fn obcov(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obcov"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = obcov(dir, args);
    assert!(
        out.status.success(),
        "obcov {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    obcov(dir, args).status.code().expect("exit code")
}

#[test]
fn acquire_with_no_samples_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["acquire", "-n", "0", "--out", "empty.obcv"]);
    let bytes = fs::read(dir.path().join("empty.obcv")).unwrap();
    assert_eq!(bytes.len(), 24);
    let s = decode_stream(&bytes).unwrap();
    assert!(s.is_empty());
}

#[test]
fn acquire_reports_bit_cost_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &["acquire", "-p", "10", "-n", "100", "--out", "a.obcv"],
    );
    assert!(
        stdout.contains("bits: 5200 quantized vs 32000 full precision"),
        "{stdout}"
    );
    ok(
        dir.path(),
        &["acquire", "-p", "10", "-n", "100", "--out", "b.obcv"],
    );
    let a = fs::read(dir.path().join("a.obcv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.obcv")).unwrap());
    let s = decode_stream(&a).unwrap();
    assert_eq!((s.dim(), s.len()), (10, 100));
    assert_eq!(encode_stream(&s), a);
    ok(
        dir.path(),
        &[
            "acquire", "-p", "10", "-n", "100", "--seed", "7", "--out", "c.obcv",
        ],
    );
    assert_ne!(a, fs::read(dir.path().join("c.obcv")).unwrap());
}

#[test]
fn estimate_matches_the_library_and_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["acquire", "-p", "4", "-n", "300", "--out", "s.obcv"]);
    ok(d, &["estimate", "s.obcv", "--out", "est.csv"]);
    let text = fs::read_to_string(d.join("est.csv")).unwrap();
    let from_cli = parse_matrix_csv(&text).unwrap();
    let stream = decode_stream(&fs::read(d.join("s.obcv")).unwrap()).unwrap();
    let direct = estimate_stream(&stream).unwrap();
    assert_eq!(&from_cli, direct.as_matrix());

    fs::write(d.join("eye.csv"), "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n").unwrap();
    ok(
        d,
        &[
            "estimate",
            "s.obcv",
            "--mask",
            "eye.csv",
            "--out",
            "masked.csv",
        ],
    );
    let masked = parse_matrix_csv(&fs::read_to_string(d.join("masked.csv")).unwrap()).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let expected = if i == j { direct[(i, j)] } else { 0.0 };
            assert_eq!(masked[(i, j)], expected);
        }
    }

    let stdout = ok(
        d,
        &[
            "estimate",
            "s.obcv",
            "--truth",
            "eye.csv",
            "--out",
            "scored.csv",
        ],
    );
    assert!(stdout.contains("error: op"));
    let scored = fs::read_to_string(d.join("scored.csv")).unwrap();
    let mut tail = scored.lines().skip_while(|l| *l != ERROR_FOOTER);
    assert_eq!(tail.next(), Some(ERROR_FOOTER));
    let values: Vec<f64> = tail
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
    assert!(values.iter().all(|v| *v >= 0.0));
    // max <= op <= fro
    assert!(values[2] <= values[0] && values[0] <= values[1]);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("scored.json")).unwrap()).unwrap();
    assert_eq!(sidecar["errors"]["op"].as_f64(), Some(values[0]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    fs::write(d.join("bad.toml"), "seed = 1\nbogus = 3\n").unwrap();
    assert_eq!(code(d, &["acquire", "--config", "bad.toml"]), 2);
    assert_eq!(code(d, &["acquire", "-p", "0"]), 2);
    assert_eq!(code(d, &["acquire", "--out", "x.json"]), 2);
    assert_eq!(code(d, &["estimate", "missing.obcv"]), 3);
    assert_eq!(code(d, &["acquire", "--config", "missing.toml"]), 3);

    ok(d, &["acquire", "-p", "3", "-n", "20", "--out", "g.obcv"]);
    assert_eq!(code(d, &["estimate", "g.obcv", "--kind", "dith"]), 2);

    let mut bytes = fs::read(d.join("g.obcv")).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(d.join("cut.obcv"), &bytes).unwrap();
    assert_eq!(code(d, &["estimate", "cut.obcv"]), 3);
    fs::write(d.join("junk.obcv"), b"not a stream at all, just text").unwrap();
    assert_eq!(code(d, &["estimate", "junk.obcv"]), 3);

    fs::write(d.join("indef.csv"), "1,2\n2,1\n").unwrap();
    fs::write(
        d.join("custom.toml"),
        "p = 2\nn = 10\n[sigma]\nkind = \"custom\"\npath = \"indef.csv\"\n",
    )
    .unwrap();
    assert_eq!(code(d, &["acquire", "--config", "custom.toml"]), 4);
}

#[test]
fn figure2_sweeps_lambda_and_sidecar_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["reproduce", "2", "--trials", "5", "--out", "f2.csv"]);
    let csv = fs::read_to_string(d.join("f2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("sweep,estimator,mean_error,std_error,trials")
    );
    let dith: Vec<&str> = lines
        .filter(|l| l.split(',').nth(1) == Some("dith"))
        .collect();
    assert_eq!(dith.len(), 50);
    let sidecar = fs::read_to_string(d.join("f2.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(doc["command"], "reproduce");
    assert_eq!(doc["config"]["trials"], 5);
    assert_eq!(doc["experiment"]["p_values"], serde_json::json!([5]));

    fs::rename(d.join("f2.json"), d.join("first.json")).unwrap();
    fs::rename(d.join("f2.csv"), d.join("first.csv")).unwrap();
    ok(d, &["reproduce", "2", "--config", "first.json"]);
    assert_eq!(fs::read(d.join("f2.csv")).unwrap(), csv.as_bytes());
    assert_eq!(fs::read_to_string(d.join("f2.json")).unwrap(), sidecar);
}

#[test]
fn grid_search_and_rate_study_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(
        d,
        &[
            "grid-search",
            "--target",
            "c1",
            "--trials",
            "3",
            "--out",
            "g.csv",
        ],
    );
    assert!(stdout.contains("best"), "{stdout}");
    let rows = fs::read_to_string(d.join("g.csv")).unwrap().lines().count();
    assert_eq!(rows, 41);
    ok(d, &["rate-study", "--trials", "3", "--out", "r.csv"]);
    let csv = fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("16000,adap,")), "{csv}");
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert!(doc["notes"]
        .as_object()
        .unwrap()
        .keys()
        .any(|k| k.contains("slope")));
}
