#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::data_dir;
use tempfile::TempDir;

fn hybridreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn copy_data(to: &Path) {
    for entry in fs::read_dir(data_dir()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}

/// Rewrites one cell of a tab-separated table, counting data rows from 1.
fn edit_cell(file: &Path, row: usize, column: &str, f: impl Fn(&str) -> String) {
    let text = fs::read_to_string(file).unwrap();
    let mut header: Option<Vec<String>> = None;
    let mut data_row = 0;
    let mut out = String::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            out.push_str(line);
        } else if header.is_none() {
            header = Some(line.split('\t').map(str::to_string).collect());
            out.push_str(line);
        } else {
            data_row += 1;
            let mut cells: Vec<String> = line.split('\t').map(str::to_string).collect();
            if data_row == row {
                let j = header.as_ref().unwrap().iter().position(|h| h == column).unwrap();
                cells[j] = f(&cells[j]);
            }
            out.push_str(&cells.join("\t"));
        }
        out.push('\n');
    }
    fs::write(file, out).unwrap();
}

/// Appends a constant column to every data row.
fn add_column(file: &Path, name: &str, value: &str) {
    let text = fs::read_to_string(file).unwrap();
    let mut seen_header = false;
    let mut out = String::new();
    for line in text.lines() {
        out.push_str(line);
        if !(line.starts_with('#') || line.trim().is_empty()) {
            out.push('\t');
            out.push_str(if seen_header { value } else { name });
            seen_header = true;
        }
        out.push('\n');
    }
    fs::write(file, out).unwrap();
}

fn factorial_in(dir: &TempDir) -> (PathBuf, PathBuf) {
    copy_data(dir.path());
    (dir.path().join("gauge_factorial.tsv"), dir.path().join("gauge_factorial.toml"))
}

fn coefficient_values(dir: &Path) -> Vec<(String, String, f64)> {
    fs::read_to_string(dir.join("coefficients.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            (c[0].to_string(), c[1].to_string(), c[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn validate_passes_on_bundled_data() {
    let o = hybridreg(&["validate", "--data-dir", path(&data_dir())]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(!out.contains("FAIL"));
    assert!(out.trim_end().ends_with("checks passed"));
}

#[test]
fn validate_flags_perturbed_response() {
    let dir = TempDir::new().unwrap();
    let (table, _) = factorial_in(&dir);
    edit_cell(&table, 4, "P1", |v| format!("{:.3}", v.parse::<f64>().unwrap() + 10.0));
    let o = hybridreg(&["validate", "--data-dir", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("FAIL  mlr1 q["), "{out}");
    assert!(out.contains("FAIL  mlr1 SS_e"), "{out}");
}

#[test]
fn validate_reports_missing_directory() {
    let dir = TempDir::new().unwrap();
    let o = hybridreg(&["validate", "--data-dir", path(&dir.path().join("absent"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error:"));
}

#[test]
fn fit_outputs_are_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let data = data_dir();
    for out in [&a, &b] {
        let o = hybridreg(&[
            "fit",
            "--data",
            path(&data.join("gauge_factorial.tsv")),
            "--spec",
            path(&data.join("gauge_factorial.toml")),
            "--theory",
            "isochoric",
            "--out",
            path(out.path()),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for expected in [
        "anova_table2.txt",
        "anova_table3.txt",
        "anova_table4.txt",
        "coefficients.tsv",
        "residuals_fitted.svg",
        "residuals_normal.svg",
        "summary.txt",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?} differs between runs"
        );
    }
}

#[test]
fn fit_verdicts_follow_lack_of_fit() {
    let data = data_dir();
    let out = TempDir::new().unwrap();
    let run = |theory: &str| {
        let o = hybridreg(&[
            "fit",
            "--data",
            path(&data.join("gauge_factorial.tsv")),
            "--spec",
            path(&data.join("gauge_factorial.toml")),
            "--theory",
            theory,
            "--format",
            "text",
            "--out",
            path(out.path()),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    assert!(run("none").contains("lack-of-fit verdict: inadequate"));
    assert!(run("column:P_v").contains("lack-of-fit verdict: adequate"));
}

#[test]
fn unit_theory_column_reproduces_plain_regression() {
    let dir = TempDir::new().unwrap();
    let (table, spec) = factorial_in(&dir);
    add_column(&table, "ones", "1");
    let fit = |extra: &[&str], out: &str| {
        let out = dir.path().join(out);
        let mut args = vec!["fit", "--data", path(&table), "--spec", path(&spec), "--out", path(&out)];
        args.extend_from_slice(extra);
        let o = hybridreg(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        coefficient_values(&out)
    };
    let plain = fit(&["--model", "mlr1"], "plain");
    let hybrid = fit(&["--model", "hybrid", "--theory", "column:ones"], "hybrid");
    for (p, h) in plain.iter().zip(&hybrid) {
        assert_eq!(p.0, h.0);
        assert!((p.2 - h.2).abs() <= 1e-9 * p.2.abs().max(1.0), "{p:?} vs {h:?}");
    }
    assert!(hybrid[plain.len()..].iter().all(|c| c.2 == 0.0), "{hybrid:?}");
}

#[test]
fn constant_response_is_refused() {
    let dir = TempDir::new().unwrap();
    let (table, spec) = factorial_in(&dir);
    for row in 1..=11 {
        edit_cell(&table, row, "P1", |_| "200".into());
    }
    let o = hybridreg(&["fit", "--data", path(&table), "--spec", path(&spec), "--out", path(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("R^2"), "{}", stderr(&o));
}

#[test]
fn simulate_rejects_supply_below_outlet_and_names_row() {
    let dir = TempDir::new().unwrap();
    let (table, spec) = factorial_in(&dir);
    edit_cell(&table, 3, "Ps", |_| "0.1".into());
    let o = hybridreg(&["simulate", "--data", path(&table), "--spec", path(&spec), "--theory", "adiabatic"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("row 3") && err.contains("outlet pressure"), "{err}");
}

#[test]
fn simulate_appends_theory_column() {
    let out = TempDir::new().unwrap();
    let data = data_dir();
    let o = hybridreg(&[
        "simulate",
        "--data",
        path(&data.join("gauge_factorial.tsv")),
        "--spec",
        path(&data.join("gauge_factorial.toml")),
        "--theory",
        "adiabatic",
        "--column",
        "sim",
        "--out",
        path(out.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("gamma = 1.4"));
    let text = fs::read_to_string(out.path().join("simulated_adiabatic.tsv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let (printed, sim) = (
        header.iter().position(|h| *h == "P_lambda").unwrap(),
        header.iter().position(|h| *h == "sim").unwrap(),
    );
    let mut rows = 0;
    for line in lines {
        let c: Vec<f64> = line.split('\t').map(|v| v.parse().unwrap()).collect();
        assert!((c[printed] - c[sim]).abs() <= 0.5, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 11);
}

#[test]
fn saturated_fit_is_refused() {
    let dir = TempDir::new().unwrap();
    let (table, spec) = factorial_in(&dir);
    let text = fs::read_to_string(&table).unwrap();
    // Four corner runs determine the four first-order coefficients exactly.
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with('#') || l.starts_with("Run") || ["1\t", "2\t", "3\t", "5\t"].iter().any(|p| l.starts_with(p)))
        .collect();
    assert_eq!(kept.len(), 6);
    fs::write(&table, kept.join("\n") + "\n").unwrap();
    let o = hybridreg(&["fit", "--data", path(&table), "--spec", path(&spec), "--model", "mlr1", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("saturated"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_64() {
    let o = hybridreg(&["fit", "--model"]);
    assert_eq!(o.status.code(), Some(64));
    let o = hybridreg(&["--help"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("simulate") && stdout(&o).contains("validate"));
}
