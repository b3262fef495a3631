//! Plain-text and delimiter-separated renderings of an analysis, and the
//! output directory layout.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{anova_reports, Analysis, FTest, ModelKind, TheorySource};
use crate::error::{Error, Result};
use crate::inference::{AnovaLayout, AnovaReport};
use crate::plot::{render_svg, ScatterPlot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutputFormat {
    Text,
    Rows,
    Plots,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "rows" => Ok(OutputFormat::Rows),
            "plots" => Ok(OutputFormat::Plots),
            other => Err(Error::Config(format!("unknown format '{other}' (text, rows, plots)"))),
        }
    }
}

pub fn all_formats() -> BTreeSet<OutputFormat> {
    [OutputFormat::Text, OutputFormat::Rows, OutputFormat::Plots].into()
}

/// Four significant figures; scientific notation outside `[1e-3, 1e4)`.
pub fn sig4(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-3..4).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn p_value(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

fn squared_units(units: &str) -> String {
    if units.is_empty() {
        String::new()
    } else {
        format!(", ({units})^2")
    }
}

pub fn anova_file_stem(layout: AnovaLayout) -> &'static str {
    match layout {
        AnovaLayout::Full => "anova_table2",
        AnovaLayout::Partitioned => "anova_table3",
        AnovaLayout::Corrected => "anova_table4",
        AnovaLayout::MeanCorrected => "anova_mlr",
    }
}

pub fn render_anova_text(report: &AnovaReport) -> String {
    let su = squared_units(&report.units);
    let header = [
        "Source".to_string(),
        format!("Sum of Squares{su}"),
        "DF".to_string(),
        format!("Mean Square{su}"),
        "F".to_string(),
        "p-value".to_string(),
    ];
    let body: Vec<[String; 6]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.source.clone(),
                sig4(r.ss),
                r.df.to_string(),
                r.ms.map(sig4).unwrap_or_default(),
                r.f.map(sig4).unwrap_or_default(),
                r.p_value.map(p_value).unwrap_or_default(),
            ]
        })
        .collect();
    let mut widths = header.clone().map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String; 6]| -> String {
        let mut out = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            let pad = w - cell.chars().count();
            if i == 0 {
                out.push_str(cell);
                out.push_str(&" ".repeat(pad));
            } else {
                out.push_str("  ");
                out.push_str(&" ".repeat(pad));
                out.push_str(cell);
            }
        }
        out.trim_end().to_string()
    };
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
    let mut s = String::new();
    let _ = writeln!(s, "{}", report.layout.title());
    let _ = writeln!(s, "{rule}");
    let _ = writeln!(s, "{}", line(&header));
    let _ = writeln!(s, "{rule}");
    for row in &body {
        let _ = writeln!(s, "{}", line(row));
    }
    let _ = writeln!(s, "{rule}");
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_anova_rows(report: &AnovaReport) -> String {
    let mut s = String::from("source\tss\tdf\tms\tf\tp_value\n");
    for r in &report.rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", r.source, r.ss, r.df, opt(r.ms), opt(r.f), opt(r.p_value));
    }
    s
}

/// Coefficient rows: label, block, estimate (3 dp), standard error, full value.
fn coefficient_rows(a: &Analysis) -> Vec<(String, &'static str, f64, Option<f64>)> {
    let labels = a.coefficient_labels();
    let p1 = a.design.n_cols();
    let count = if a.options.model == ModelKind::Hybrid { 2 * p1 } else { p1 };
    (0..count)
        .map(|i| {
            let se = a.fit.var_b.as_ref().map(|v| v[(i, i)].max(0.0).sqrt());
            let block = if i < p1 { "theta1" } else { "theta2" };
            (labels[i].clone(), block, a.fit.b[i], se)
        })
        .collect()
}

pub fn render_coefficients(a: &Analysis) -> String {
    let mut s = String::from("term\tblock\testimate\tstd_error\tvalue\n");
    for (label, block, b, se) in coefficient_rows(a) {
        let _ = writeln!(
            s,
            "{label}\t{block}\t{b:.3}\t{}\t{b}",
            se.map(sig4).unwrap_or_default()
        );
    }
    s
}

pub fn render_points(header: (&str, &str), points: &[(f64, f64)]) -> String {
    let mut s = format!("{}\t{}\n", header.0, header.1);
    for (x, y) in points {
        let _ = writeln!(s, "{x}\t{y}");
    }
    s
}

fn verdict(t: &FTest) -> &'static str {
    if t.exceeds_critical() {
        "significant"
    } else {
        "not significant"
    }
}

fn test_line(s: &mut String, name: &str, t: &FTest, alpha: f64) {
    let _ = writeln!(
        s,
        "  {name:<22} F = {:<10} F_crit({alpha}; {}, {}) = {:<8} p = {:<10} {}",
        sig4(t.f),
        t.df1,
        t.df2,
        sig4(t.critical),
        p_value(t.p_value),
        verdict(t)
    );
}

pub fn render_summary(a: &Analysis) -> String {
    let o = &a.options;
    let part = &a.partition;
    let units = &a.response_units;
    let mut s = String::new();
    let _ = writeln!(s, "model: {}", o.model);
    let _ = writeln!(s, "theory: {}", o.theory);
    let _ = writeln!(s, "response: {} [{}]", a.response_name, units);
    let _ = writeln!(
        s,
        "gauge constants: gamma = {}, p_atm = {} kPa, c_orifice = {}, c_sensor = {}{}",
        o.gauge.gamma,
        o.gauge.p_atm,
        o.gauge.c_orifice,
        o.gauge.c_sensor,
        if matches!(o.theory, TheorySource::Gauge(_)) { "" } else { " (unused)" }
    );
    let _ = writeln!(s, "alpha: {}", o.alpha);
    let _ = writeln!(
        s,
        "runs: {}   rank(X) = {}   rank(Z) = {}   rank(Psi) = {}   replicate groups: {}",
        part.n,
        a.system.rank_x,
        a.system.rank_z,
        a.system.rank,
        a.groups.iter().filter(|g| g.len() > 1).count()
    );
    s.push('\n');

    let _ = writeln!(s, "coefficients:");
    for (label, _, b, se) in coefficient_rows(a) {
        match se {
            Some(se) => {
                let _ = writeln!(s, "  {label:<14} {b:>12.3}   (se {})", sig4(se));
            }
            None => {
                let _ = writeln!(s, "  {label:<14} {b:>12.3}");
            }
        }
    }
    if let Some(s2) = a.fit.sigma2_hat {
        let _ = writeln!(s, "sigma^2 estimate: {}", sig4(s2));
    }
    s.push('\n');

    let _ = writeln!(s, "sums of squares{}:", squared_units(units));
    for (name, v, df) in [
        ("SS_T", part.ss_t, part.n),
        ("SS_Rx", part.ss_rx, part.df_rx),
        ("SS_Rc", part.ss_rc, part.df_rc),
        ("SS_E", part.ss_e, part.df_e),
        ("SS_PE", a.pure_error.ss_pe, a.pure_error.df_pe),
        ("SS_LoF", a.pure_error.ss_lof, a.pure_error.df_lof),
        ("S_yy", a.mean_corrected.ss_total, a.mean_corrected.df_total),
    ] {
        let _ = writeln!(s, "  {name:<7} {:>10}   df {df}", sig4(v));
    }
    s.push('\n');

    let _ = writeln!(s, "tests:");
    if let Some(t) = &a.test_regression {
        test_line(&mut s, "regression (about mean)", t, o.alpha);
    }
    test_line(&mut s, "linear regression", &a.test_rx, o.alpha);
    if let Some(t) = &a.test_rc {
        test_line(&mut s, "corrected regression", t, o.alpha);
    }
    match &a.test_lof {
        Some(t) => {
            test_line(&mut s, "lack of fit", t, o.alpha);
            let _ = writeln!(
                s,
                "lack-of-fit verdict: {}",
                if t.exceeds_critical() { "inadequate" } else { "adequate" }
            );
        }
        None => {
            let _ = writeln!(s, "lack-of-fit verdict: unavailable (no replicated runs)");
        }
    }
    s.push('\n');

    let _ = writeln!(s, "R^2 = {:.6}   R^2_max = {:.6}", a.r2.r2, a.r2.r2_max);
    let _ = writeln!(s, "residual standard deviation: {:.3} {units}", a.residual_sd);
    if let Some(b) = &a.box_wetz_regression {
        let _ = writeln!(
            s,
            "Box-Wetz ratio, regression F over critical: {:.2} ({})",
            b.ratio,
            if b.useful_predictor { "useful predictor" } else { "not a useful predictor" }
        );
    }
    if let Some(b) = &a.box_wetz_lack_of_fit {
        let _ = writeln!(
            s,
            "Box-Wetz ratio, critical lack-of-fit F over observed: {:.2} ({})",
            b.ratio,
            if b.useful_predictor { "useful predictor" } else { "not a useful predictor" }
        );
    }
    s
}

fn write(dir: &Path, name: &str, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    written.push(path);
    Ok(())
}

/// Writes the selected report files under `dir`; returns their paths.
pub fn write_outputs(a: &Analysis, dir: &Path, formats: &BTreeSet<OutputFormat>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let reports = anova_reports(a)?;
    let units = &a.response_units;
    let with_units = |label: &str| {
        if units.is_empty() {
            label.to_string()
        } else {
            format!("{label}, {units}")
        }
    };

    if formats.contains(&OutputFormat::Text) {
        write(dir, "summary.txt", &render_summary(a), &mut written)?;
        for r in &reports {
            write(dir, &format!("{}.txt", anova_file_stem(r.layout)), &render_anova_text(r), &mut written)?;
        }
    }
    if formats.contains(&OutputFormat::Rows) {
        write(dir, "coefficients.tsv", &render_coefficients(a), &mut written)?;
        for r in &reports {
            write(dir, &format!("{}.tsv", anova_file_stem(r.layout)), &render_anova_rows(r), &mut written)?;
        }
        let normal = render_points(("normal_quantile", "residual"), &a.diagnostics.normal_plot);
        write(dir, "residuals_normal.tsv", &normal, &mut written)?;
        let scatter = render_points(("fitted", "residual"), &a.diagnostics.scatter);
        write(dir, "residuals_fitted.tsv", &scatter, &mut written)?;
    }
    if formats.contains(&OutputFormat::Plots) {
        let y_label = with_units("Residual");
        let normal = render_svg(&ScatterPlot {
            title: "Normal probability plot of residuals",
            x_label: "Standard normal quantile",
            y_label: &y_label,
            points: &a.diagnostics.normal_plot,
            zero_line: false,
        });
        write(dir, "residuals_normal.svg", &normal, &mut written)?;
        let x_label = with_units("Predicted response");
        let scatter = render_svg(&ScatterPlot {
            title: "Residuals versus predicted values",
            x_label: &x_label,
            y_label: &y_label,
            points: &a.diagnostics.scatter,
            zero_line: true,
        });
        write(dir, "residuals_fitted.svg", &scatter, &mut written)?;
    }
    Ok(written)
}
