use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dyndiv::channels::ClassicalChannel;
use dyndiv::io::classical_to_json;
use dyndiv::majorization::{relatively_majorizes, Dichotomy};
use dyndiv::random::{random_stochastic, rng_from_seed};
use serde_json::Value;
use tempfile::TempDir;

const FIG2_M: &str = r#"{"matrix": [[0.3333333333333333, 0.4166666666666667], [0.25, 0.16666666666666666],
    [0.25, 0.25], [0.16666666666666666, 0.16666666666666666]]}"#;
const FIG2_N: &str = r#"{"matrix": [[0.08333333333333333, 0.08333333333333333], [0.16666666666666666, 0.08333333333333333],
    [0.3333333333333333, 0.5], [0.4166666666666667, 0.3333333333333333]]}"#;

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn dyndiv(args: &[&str], files: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyndiv"))
        .args(args)
        .args(files)
        .env_remove("DYNDIV_TOL")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn reals(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn channel_dmax_on_the_worked_example() {
    let d = Dir::new();
    let (m, n) = (d.file("m.json", FIG2_M), d.file("n.json", FIG2_N));
    let doc = json(&dyndiv(&["compute", "--div", "channel-dmax"], &[&m, &n]));
    assert_eq!(doc["divergence"], "channel-dmax");
    assert_eq!(doc["exact"], true);
    assert!((doc["value_bits"].as_f64().unwrap() - 5f64.log2()).abs() < 1e-10);
}

#[test]
fn kl_of_a_certain_bit() {
    let d = Dir::new();
    let p = d.file("p.json", r#"{"probs": [1, 0]}"#);
    let q = d.file("q.json", r#"{"probs": [0.5, 0.5]}"#);
    let doc = json(&dyndiv(&["compute", "--div", "kl"], &[&p, &q]));
    assert_eq!(doc["value_bits"].as_f64().unwrap(), 1.0);
    let back = json(&dyndiv(&["compute", "--div", "kl"], &[&q, &p]));
    assert_eq!(back["value_bits"], "inf");
}

#[test]
fn a_channel_against_itself_is_zero() {
    let d = Dir::new();
    let m = d.file("m.json", FIG2_M);
    for div in ["channel-dmax", "min-ext", "max-ext", "geometric"] {
        let out = dyndiv(&["compute", "--div", div, "--alpha", "0.5"], &[&m, &m]);
        let doc = json(&out);
        assert_eq!(doc["value_bits"].as_f64().unwrap(), 0.0, "{div}");
    }
}

#[test]
fn join_of_the_worked_example() {
    let d = Dir::new();
    let (m, n) = (d.file("m.json", FIG2_M), d.file("n.json", FIG2_N));
    let doc = json(&dyndiv(&["join"], &[&m, &n]));
    assert!(close(&reals(&doc["p"]), &[5.0 / 12.0, 1.0 / 6.0, 0.25, 1.0 / 6.0], 1e-11));
    assert!(close(&reals(&doc["q"]), &[1.0 / 12.0, 1.0 / 12.0, 5.0 / 12.0, 5.0 / 12.0], 1e-11));
    let lorenz: Vec<f64> = doc["lorenz"].as_array().unwrap().iter().flat_map(reals).collect();
    let expect = [0.0, 0.0, 5.0 / 12.0, 1.0 / 12.0, 7.0 / 12.0, 2.0 / 12.0, 5.0 / 6.0, 7.0 / 12.0, 1.0, 1.0];
    assert!(close(&lorenz, &expect, 1e-11));
}

#[test]
fn join_of_a_single_column_echoes_it_sorted() {
    let d = Dir::new();
    let m = d.file("m.json", r#"{"matrix": [[0.2], [0.8]]}"#);
    let n = d.file("n.json", r#"{"matrix": [[0.6], [0.4]]}"#);
    let doc = json(&dyndiv(&["join"], &[&m, &n]));
    assert!(close(&reals(&doc["p"]), &[0.8, 0.2], 1e-12));
    assert!(close(&reals(&doc["q"]), &[0.4, 0.6], 1e-12));
}

#[test]
fn join_of_random_channels_majorizes_every_column() {
    let d = Dir::new();
    let mut rng = rng_from_seed(11);
    for k in 0..5 {
        let (m, n) = (random_stochastic(&mut rng, 3, 4), random_stochastic(&mut rng, 3, 4));
        let mf = d.file(&format!("m{k}.json"), &classical_to_json(&m).to_string());
        let nf = d.file(&format!("n{k}.json"), &classical_to_json(&n).to_string());
        let doc = json(&dyndiv(&["join"], &[&mf, &nf]));
        let j = Dichotomy::from_weights(reals(&doc["p"]), reals(&doc["q"])).unwrap();
        for x in 0..m.dim_in() {
            let col = Dichotomy::new(m.column(x), n.column(x)).unwrap();
            assert!(relatively_majorizes(&j, &col), "instance {k}, column {x}");
        }
    }
}

#[test]
fn join_of_dichotomy_files() {
    let d = Dir::new();
    let a = d.file("a.json", r#"{"p": [1, 0], "q": [0.5, 0.5]}"#);
    let b = d.file("b.json", r#"{"p": [0.5, 0.5], "q": [0.5, 0.5]}"#);
    let doc = json(&dyndiv(&["join"], &[&a, &b]));
    assert!(close(&reals(&doc["p"]), &[1.0, 0.0], 1e-12));
}

fn csv_rows(out: &Output) -> Vec<(f64, f64)> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a,b"));
    lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn lorenz_csv_examples() {
    let d = Dir::new();
    let f = d.file("d.json", r#"{"p": [1, 0], "q": [0.5, 0.5]}"#);
    assert_eq!(csv_rows(&dyndiv(&["lorenz"], &[&f])), vec![(0.0, 0.0), (1.0, 0.5), (1.0, 1.0)]);

    let u = d.file("u.json", r#"{"p": [0.25, 0.25, 0.25, 0.25], "q": [0.25, 0.25, 0.25, 0.25]}"#);
    let rows = csv_rows(&dyndiv(&["lorenz"], &[&u]));
    assert_eq!(rows.first(), Some(&(0.0, 0.0)));
    assert_eq!(rows.last(), Some(&(1.0, 1.0)));
    assert!(rows.iter().all(|(a, b)| (a - b).abs() < 1e-12));

    let j = d.file(
        "j.json",
        r#"{"p": [0.4166666666666667, 0.16666666666666666, 0.25, 0.16666666666666666],
            "q": [0.08333333333333333, 0.08333333333333333, 0.4166666666666667, 0.4166666666666667]}"#,
    );
    let rows = csv_rows(&dyndiv(&["lorenz"], &[&j]));
    let expect = [(0.0, 0.0), (5.0 / 12.0, 1.0 / 12.0), (7.0 / 12.0, 2.0 / 12.0), (5.0 / 6.0, 7.0 / 12.0), (1.0, 1.0)];
    assert_eq!(rows.len(), expect.len());
    for (r, e) in rows.iter().zip(expect) {
        assert!((r.0 - e.0).abs() < 1e-11 && (r.1 - e.1).abs() < 1e-11, "{r:?} vs {e:?}");
    }
}

#[test]
fn lorenz_rejects_other_objects() {
    let d = Dir::new();
    let m = d.file("m.json", FIG2_M);
    assert_eq!(dyndiv(&["lorenz"], &[&m]).status.code(), Some(2));
}

#[test]
fn empty_suite() {
    let out = dyndiv(&["suite", "--instances", "0"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out), Value::Array(vec![]));
}

#[test]
fn broken_divergence_fails_the_suite_but_writes_reports() {
    let d = Dir::new();
    let out_file = d.path("rep.json");
    let out = dyndiv(
        &["suite", "--div", "broken-stub", "--instances", "20", "--out", out_file.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(4));
    let reports: Value = serde_json::from_str(&fs::read_to_string(&out_file).unwrap()).unwrap();
    let dpi = reports
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["checkName"] == "dpi/broken-stub")
        .unwrap();
    assert!(dpi["failures"].as_u64().unwrap() > 0);
    assert_eq!(dpi["seeds"].as_array().unwrap().len() as u64, dpi["failures"].as_u64().unwrap());
}

#[test]
fn small_suite_passes_and_writes_csv() {
    let out = dyndiv(
        &["suite", "--div", "channel-dmax", "--div", "min-ext:kl", "--instances", "10", "--format", "csv"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("check,"));
    assert!(text.lines().count() > 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let d = Dir::new();
    let (m, n) = (d.file("m.json", FIG2_M), d.file("n.json", FIG2_N));
    let runs: Vec<(&[&str], Vec<&Path>)> = vec![
        (&["compute", "--div", "channel-umegaki", "--seed", "3"], vec![&m, &n]),
        (&["join"], vec![&m, &n]),
        (&["suite", "--instances", "3", "--seed", "9"], vec![]),
    ];
    for (args, files) in runs {
        let a = dyndiv(args, &files);
        let b = dyndiv(args, &files);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn parse_errors_exit_2_with_the_field() {
    let d = Dir::new();
    let bad = d.file("bad.json", r#"{"probs": [0.5, 0.7]}"#);
    let q = d.file("q.json", r#"{"probs": [0.5, 0.5]}"#);
    let out = dyndiv(&["compute", "--div", "kl"], &[&bad, &q]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.json") && err.contains("$.probs"), "{err}");

    let syntax = d.file("syntax.json", "{\"probs\": [0.5,\n 0.5");
    let out = dyndiv(&["compute", "--div", "kl"], &[&syntax, &q]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));

    let missing = d.path("missing.json");
    assert_eq!(dyndiv(&["compute", "--div", "kl"], &[&missing, &q]).status.code(), Some(2));
    assert_eq!(dyndiv(&["compute", "--div", "renyi"], &[&q, &q]).status.code(), Some(2));
    assert_eq!(dyndiv(&["compute", "--div", "nope"], &[&q, &q]).status.code(), Some(2));
    assert_eq!(dyndiv(&["suite", "--div", "geometric:7"], &[]).status.code(), Some(2));
}

#[test]
fn shape_mismatch_exits_3() {
    let d = Dir::new();
    let p = d.file("p.json", r#"{"probs": [0.5, 0.5]}"#);
    let r = d.file("r.json", r#"{"probs": [0.2, 0.3, 0.5]}"#);
    assert_eq!(dyndiv(&["compute", "--div", "kl"], &[&p, &r]).status.code(), Some(3));
    let m = d.file("m.json", FIG2_M);
    let n = d.file("n.json", r#"{"matrix": [[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]]}"#);
    assert_eq!(dyndiv(&["compute", "--div", "channel-dmax"], &[&m, &n]).status.code(), Some(3));
}

#[test]
fn tolerance_override_from_the_environment() {
    let d = Dir::new();
    let p = d.file("p.json", r#"{"probs": [0.5, 0.5000001]}"#);
    let q = d.file("q.json", r#"{"probs": [0.5, 0.5]}"#);
    assert_eq!(dyndiv(&["compute", "--div", "kl"], &[&p, &q]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_dyndiv"))
        .args(["compute", "--div", "kl"])
        .args([&p, &q])
        .env("DYNDIV_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let bad = Command::new(env!("CARGO_BIN_EXE_dyndiv"))
        .args(["compute", "--div", "kl"])
        .args([&q, &q])
        .env("DYNDIV_TOL", "-1")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn written_channels_parse_back() {
    let d = Dir::new();
    let mut rng = rng_from_seed(5);
    let m: ClassicalChannel = random_stochastic(&mut rng, 3, 2);
    let f = d.file("m.json", &classical_to_json(&m).to_string());
    let doc = json(&dyndiv(&["compute", "--div", "channel-dmax"], &[&f, &f]));
    assert_eq!(doc["value_bits"].as_f64().unwrap(), 0.0);
}

#[test]
fn out_file_matches_stdout() {
    let d = Dir::new();
    let (m, n) = (d.file("m.json", FIG2_M), d.file("n.json", FIG2_N));
    let out_file = d.path("o.json");
    let a = dyndiv(&["compute", "--div", "min-ext", "--base", "renyi", "--alpha", "2"], &[&m, &n]);
    let b = dyndiv(
        &["compute", "--div", "min-ext", "--base", "renyi", "--alpha", "2", "--out", out_file.to_str().unwrap()],
        &[&m, &n],
    );
    assert!(b.status.success() && b.stdout.is_empty());
    assert_eq!(fs::read(&out_file).unwrap(), a.stdout);
}
