use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use vinegc::copula::CopulaFamily;
use vinegc::mvine::{self, MVineModel};
use vinegc::rng::substream;
use vinegc::simstudy::{generate, Dgp, DgpSpec};

fn vinegc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vinegc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_csv(dir: &Path, name: &str, model: Dgp, t: usize, seed: u64) -> PathBuf {
    let (x, y) = generate(&DgpSpec::new(model, t), &mut substream(seed, &[]));
    let mut s = String::from("period,x,y\n");
    for (i, (a, b)) in x.iter().zip(&y).enumerate() {
        s.push_str(&format!("{i},{a},{b}\n"));
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path
}

#[test]
fn test_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path(), "p1.csv", Dgp::P1, 80, 1);
    let args = [
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--cause",
        "y",
        "--effect",
        "x",
        "--k",
        "1",
        "--N",
        "20",
        "--B",
        "10",
        "--seed",
        "9",
    ];
    let a = vinegc(&args);
    let b = vinegc(&[&args[..], &["--workers", "2"]].concat());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("--seed 9"));
    assert!(text.contains("y -> x"));
    assert!(text.contains("x -> y"));
    for method in ["mvine", "split", "linear"] {
        assert!(text.contains(method), "{text}");
    }
}

#[test]
fn test_machine_output_has_six_p_values() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path(), "s1.csv", Dgp::S1, 80, 2);
    let out = dir.path().join("report.jsonl");
    let o = vinegc(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--cause",
        "y",
        "--effect",
        "x",
        "--k",
        "1",
        "--N",
        "10",
        "--B",
        "5",
        "--format",
        "machine",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let tests: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["record"] == "test")
        .collect();
    assert_eq!(tests.len(), 6);
    assert!(tests.iter().all(|v| v["version"] == 1 && v["p_value"].as_f64().is_some()));
}

#[test]
fn missing_column_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path(), "s1.csv", Dgp::S1, 50, 3);
    let o = vinegc(&["test", "--input", csv.to_str().unwrap(), "--cause", "nope", "--effect", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"));
    let o = vinegc(&["test", "--input", "/no/such/file.csv", "--cause", "y", "--effect", "x"]);
    assert!(!o.status.success());
    let o = vinegc(&["test", "--input", csv.to_str().unwrap(), "--cause", "y", "--effect", "x", "--k", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("study");
    let dump = dir.path().join("p");
    let o = vinegc(&[
        "simulate",
        "--preset",
        "desk",
        "--models",
        "S1,P1",
        "--T",
        "100",
        "--methods",
        "linear",
        "--out",
        prefix.to_str().unwrap(),
        "--dump-p",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
    // desk preset: 200 replicates for size models, 100 for power models
    assert!(csv.lines().nth(1).unwrap().starts_with("S1,100,linear,"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",200,1"));
    assert!(csv.lines().nth(2).unwrap().ends_with(",100,1"));
    let table = std::fs::read_to_string(prefix.with_extension("txt")).unwrap();
    assert!(table.contains("# command: vinegc simulate"));
    let p = std::fs::read_to_string(dump.join("P1_T100_linear.txt")).unwrap();
    assert_eq!(p.lines().count(), 100);
}

#[test]
fn simulate_small_vine_cell() {
    let o = vinegc(&[
        "simulate",
        "--models",
        "P1",
        "--methods",
        "mvine,split",
        "--S",
        "2",
        "--B",
        "5",
        "--N",
        "10",
        "--format",
        "machine",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn simulate_flags() {
    let o = vinegc(&["simulate", "--models", "S9"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("S1") && err.contains("P4k4"), "{err}");
    let o = vinegc(&[
        "simulate",
        "--preset",
        "paper",
        "--models",
        "S1",
        "--methods",
        "linear",
        "--S",
        "3",
        "--format",
        "machine",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning: paper-scale"));
}

#[test]
fn fit_reports_aic_and_round_trips_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path(), "p1.csv", Dgp::P1, 120, 4);
    let model_path = dir.path().join("model.json");
    let o = vinegc(&[
        "fit",
        "--input",
        csv.to_str().unwrap(),
        "--cause",
        "y",
        "--effect",
        "x",
        "--k-max",
        "2",
        "--model-out",
        model_path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("not comparable"));
    assert_eq!(text.lines().filter(|l| l.starts_with("mvine")).count(), 2);
    assert_eq!(text.lines().filter(|l| l.starts_with("var")).count(), 2);
    let loaded = MVineModel::from_json(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    let selected: usize = text.lines().find_map(|l| l.strip_prefix("# selected_k: ")).unwrap().parse().unwrap();
    let table = vinegc::tsprep::load_csv(&csv, &Default::default()).unwrap();
    let refit = mvine::fit(&[&table.columns[0], &table.columns[1]], selected, &CopulaFamily::ALL).unwrap();
    assert_eq!(loaded, refit);
}

#[test]
fn prep_differences_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = String::from("q,level\n");
    // the running sum of a stationary AR(1) has a unit root
    let (steps, _) = generate(&DgpSpec::new(Dgp::S1, 199), &mut substream(5, &[]));
    for (i, level) in vinegc::tsprep::cumulate(0.0, &steps).iter().enumerate() {
        s.push_str(&format!("{i},{level}\n"));
    }
    s.push_str("200,\n");
    let path = dir.path().join("walk.csv");
    std::fs::write(&path, s).unwrap();
    let out = dir.path().join("diff.csv");
    let o = vinegc(&["prep", "--input", path.to_str().unwrap(), "--diff", "--series-out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("# dropped_rows: 1"));
    assert!(text.contains("p = <0.01"), "{text}");
    let written = std::fs::read_to_string(&out).unwrap();
    assert_eq!(written.lines().count(), 1 + 199);
    let o = vinegc(&["prep", "--input", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("does not reject a unit root"));
}
