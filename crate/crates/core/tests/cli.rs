//! Runs the `fss` binary end to end.

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn fss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fss"))
        .args(args)
        .current_dir(dir)
        .env_remove("FSS_OUTPUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rules() -> String {
    common::workspace_root()
        .join("rules/desharnais.toml")
        .display()
        .to_string()
}

/// Ingests the synthetic table into `dir/out` and returns the dataset path.
fn ingested(dir: &Path) -> String {
    std::fs::write(dir.join("d.csv"), common::desharnais_like_csv(3)).unwrap();
    let o = fss(dir, &["ingest", "--input", "d.csv", "--rules", &rules(), "--output-dir", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    "out/d.dataset.json".into()
}

#[test]
fn ingest_reports_shape_and_dropped_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), common::desharnais_like_csv(3)).unwrap();
    let o = fss(dir.path(), &["ingest", "--input", "d.csv", "--rules", &rules(), "--output-dir", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("77 rows, 8 features\n"), "{s}");
    assert!(s.contains("dropped 4 of 81 rows"), "{s}");
    assert!(dir.path().join("out/d.dataset.json").is_file());
}

#[test]
fn header_only_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.csv"), "Effort,Size\n").unwrap();
    std::fs::write(dir.path().join("r.toml"), "effort_column = \"Effort\"\n").unwrap();
    let o = fss(dir.path(), &["ingest", "--input", "e.csv", "--rules", "r.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[data]"), "{}", stderr(&o));
    assert!(stderr(&o).contains("no rows"), "{}", stderr(&o));
}

#[test]
fn sparse_column_is_dropped_and_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("Effort,Size,Sparse\n");
    for i in 0..22 {
        let sparse = if i < 9 { "".to_string() } else { (i % 5).to_string() };
        csv += &format!("{},{},{}\n", 100 + 10 * i, i + 1, sparse);
    }
    std::fs::write(dir.path().join("s.csv"), csv).unwrap();
    std::fs::write(dir.path().join("r.toml"), "effort_column = \"Effort\"\n").unwrap();
    let o = fss(dir.path(), &["ingest", "--input", "s.csv", "--rules", "r.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("22 rows, 1 features"), "{s}");
    assert!(s.contains("dropped column Sparse"), "{s}");
    assert!(dir.path().join("fss-output/s.dataset.json").is_file());
}

#[test]
fn unknown_method_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingested(dir.path());
    let o = fss(dir.path(), &["run", "--dataset", &ds, "--methods", "FFS,NOPE"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("error[usage]") && e.contains("NOPE"), "{e}");
    for id in ["FFS", "BFE", "FSWF", "GARSON", "GA"] {
        assert!(e.contains(id), "{e}");
    }
}

#[test]
fn bad_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fss(dir.path(), &["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(fss(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_report_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fss(dir.path(), &["report", "nowhere.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[data]"));
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingested(dir.path());
    let o = fss(
        dir.path(),
        &["run", "--dataset", &ds, "--methods", "FFS,FSWF", "--partitions", "2", "--seed", "9", "--output-dir", "res"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("FFS") && s.contains("FSWF"), "{s}");
    assert!(dir.path().join("res/report.json").is_file());
    let csv = std::fs::read_to_string(dir.path().join("res/partitions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);

    let o = fss(dir.path(), &["report", "res/report.json", "--consistency"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert_eq!(s.lines().count(), 4, "{s}");
    assert!(s.contains("80% (2/2)"), "{s}");
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingested(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_fss"))
        .args(["run", "--dataset", &ds, "--methods", "FSWF", "--partitions", "1"])
        .current_dir(dir.path())
        .env("FSS_OUTPUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("from-env/report.json").is_file());
}

#[test]
fn failed_cells_still_write_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingested(dir.path());
    let cfg = format!(
        "dataset = \"{ds}\"\nmethods = [\"FSWF\", \"GARSON\"]\nn_partitions = 1\n[ann.train]\nlearning_rate = 1e300\n"
    );
    std::fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let o = fss(dir.path(), &["run", "--config", "run.toml"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("error[compute]"));
    let report = std::fs::read_to_string(dir.path().join("fss-output/report.json")).unwrap();
    assert!(report.contains("\"failures\""));
}

#[test]
fn oracle_prints_best_subset() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingested(dir.path());
    let o = fss(dir.path(), &["oracle", "--dataset", &ds, "--evaluator", "ls"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("partition 0: best subset "), "{s}");
    assert!(s.contains("(255 subsets)"), "{s}");
}
