//! Reproduces the gauge case study from the bundled tables and compares each
//! published number against the computed one.

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use crate::analysis::{analyze, Analysis, AnalysisOptions, ModelKind, TheorySource};
use crate::config::{load_spec, Spec};
use crate::dataset::{load_table, Dataset};
use crate::error::{Error, Result};
use crate::gauge::{simulate_design, GaugeModel};

pub const Q1: [f64; 4] = [208.423, -34.409, 36.616, 18.277];
pub const Q2: [f64; 10] = [212.598, -34.274, 38.221, 21.697, 0.286, -2.362, -6.333, -9.561, 13.288, 6.227];
pub const B_ADIABATIC: [f64; 8] = [27.044, 4.607, 6.614, 3.894, 0.907, -0.012, -0.010, -0.016];
pub const B_ISOCHORIC: [f64; 8] = [15.429, 5.647, 7.694, 2.555, 0.971, -0.006, -0.026, -0.013];
pub const P_LAMBDA: [f64; 11] = [
    187.986, 115.955, 280.554, 134.781, 196.727, 155.951, 293.607, 229.213, 206.223, 206.223, 206.223,
];
pub const P_LAMBDA_FIT: [f64; 11] = [
    188.345, 126.913, 283.472, 154.861, 198.295, 166.684, 294.225, 240.605, 213.083, 213.083, 213.083,
];
pub const P_V: [f64; 11] = [
    187.410, 116.513, 279.595, 136.175, 196.582, 155.431, 293.388, 226.924, 204.463, 204.463, 204.463,
];
pub const P_V_FIT: [f64; 11] = [
    188.704, 126.729, 283.427, 154.948, 198.099, 166.922, 294.322, 240.681, 212.938, 212.938, 212.938,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Abs(f64),
    Rel(f64),
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub got: f64,
    pub tolerance: Tolerance,
}

impl Check {
    pub fn passed(&self) -> bool {
        let diff = (self.got - self.expected).abs();
        match self.tolerance {
            Tolerance::Abs(t) => diff <= t,
            Tolerance::Rel(t) => diff <= t * self.expected.abs(),
            Tolerance::Exact => self.got == self.expected,
        }
    }

    fn describe_tolerance(&self) -> String {
        match self.tolerance {
            Tolerance::Abs(t) => format!("abs {t}"),
            Tolerance::Rel(t) => format!("rel {t}"),
            Tolerance::Exact => "exact".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: impl Into<String>, expected: f64, got: f64, tolerance: Tolerance) {
        self.checks.push(Check {
            name: name.into(),
            expected,
            got,
            tolerance,
        });
    }

    fn flag(&mut self, name: impl Into<String>, expected: bool, got: bool) {
        self.push(name, f64::from(u8::from(expected)), f64::from(u8::from(got)), Tolerance::Exact);
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    pub fn all_passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn render(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{}  {:<width$}  expected {:<12} got {:<22} ({})",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.got,
                c.describe_tolerance()
            );
        }
        let _ = writeln!(s, "{} of {} checks passed", self.checks.len() - self.failures(), self.checks.len());
        s
    }
}

fn load(dir: &Path, stem: &str) -> Result<(Spec, Dataset)> {
    let spec = load_spec(&dir.join(format!("{stem}.toml")))?;
    let data_path = dir.join(format!("{stem}.tsv"));
    let file = File::open(&data_path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", data_path.display())))?;
    let ds = load_table(file, &spec.schema)?;
    Ok((spec, ds))
}

fn run(spec: &Spec, ds: &Dataset, model: ModelKind, theory: TheorySource) -> Result<Analysis> {
    let mut opts = AnalysisOptions::new(model, theory);
    opts.gauge = spec.gauge;
    opts.columns = spec.columns.clone();
    analyze(ds, &opts)
}

fn vector(r: &mut ValidationReport, prefix: &str, expected: &[f64], got: &[f64], tol: Tolerance) {
    for (i, (e, g)) in expected.iter().zip(got).enumerate() {
        r.push(format!("{prefix}[{i}]"), *e, *g, tol);
    }
    if expected.len() != got.len() {
        r.push(format!("{prefix} length"), expected.len() as f64, got.len() as f64, Tolerance::Exact);
    }
}

fn hybrid_checks(r: &mut ValidationReport, tag: &str, a: &Analysis, b: &[f64], fit: &[f64]) {
    vector(r, &format!("{tag} b"), b, a.fit.b.as_slice(), Tolerance::Abs(5e-3));
    vector(r, &format!("{tag} fitted"), fit, a.fit.fitted.as_slice(), Tolerance::Abs(0.5));
}

/// Runs mlr1, mlr2, adiabatic and isochoric hybrid analyses and the gauge
/// simulators on the tables in `dir`.
pub fn validate(dir: &Path) -> Result<ValidationReport> {
    let (spec_f, fact) = load(dir, "gauge_factorial")?;
    let (spec_bb, bb) = load(dir, "gauge_box_behnken")?;
    let mut r = ValidationReport::default();
    let rel = Tolerance::Rel;

    let m1 = run(&spec_f, &fact, ModelKind::Mlr1, TheorySource::None)?;
    vector(&mut r, "mlr1 q", &Q1, m1.fit.b1.as_slice(), Tolerance::Abs(1e-3));
    r.push("mlr1 SS_r", 2.287e4, m1.mean_corrected.ss_reg, rel(5e-3));
    r.push("mlr1 SS_e", 2.99e3, m1.partition.ss_e, rel(5e-3));
    r.push("mlr1 SS_PE", 0.949, m1.pure_error.ss_pe, rel(5e-3));
    r.push("mlr1 F0", 17.85, m1.mean_corrected.f0.unwrap_or(f64::NAN), rel(5e-3));
    r.push("mlr1 F_LoF", 1260.0, m1.lack_of_fit.map_or(f64::NAN, |l| l.f_lof), rel(2e-2));
    r.push("mlr1 df regression", 3.0, m1.mean_corrected.df_reg as f64, Tolerance::Exact);
    r.push("mlr1 df error", 7.0, m1.partition.df_e as f64, Tolerance::Exact);
    r.push("mlr1 df lack of fit", 5.0, m1.pure_error.df_lof as f64, Tolerance::Exact);
    r.push("mlr1 df pure error", 2.0, m1.pure_error.df_pe as f64, Tolerance::Exact);
    r.flag("mlr1 adequate", false, m1.adequate().unwrap_or(true));

    let m2 = run(&spec_bb, &bb, ModelKind::Mlr2, TheorySource::None)?;
    vector(&mut r, "mlr2 q", &Q2, m2.fit.b1.as_slice(), Tolerance::Abs(1e-3));
    r.push("mlr2 SS_r", 2.624e4, m2.mean_corrected.ss_reg, rel(5e-3));
    r.push("mlr2 SS_e", 123.114, m2.partition.ss_e, rel(5e-3));
    r.push("mlr2 F0", 118.419, m2.mean_corrected.f0.unwrap_or(f64::NAN), rel(2e-2));
    r.push("mlr2 F_LoF", 85.831, m2.lack_of_fit.map_or(f64::NAN, |l| l.f_lof), rel(2e-2));
    r.flag("mlr2 adequate", false, m2.adequate().unwrap_or(true));

    let ad = run(&spec_f, &fact, ModelKind::Hybrid, TheorySource::Column("P_lambda".into()))?;
    hybrid_checks(&mut r, "adiabatic", &ad, &B_ADIABATIC, &P_LAMBDA_FIT);
    r.push("adiabatic SS_Rx", 5.007e5, ad.partition.ss_rx, rel(5e-3));
    r.push("adiabatic SS_Rc", 2986.0, ad.partition.ss_rc, rel(5e-3));
    r.push("adiabatic SS_E", 4.432, ad.partition.ss_e, rel(5e-3));
    r.push("adiabatic SS_LoF", 3.483, ad.pure_error.ss_lof, rel(5e-3));
    r.push("adiabatic SS_PE", 0.949, ad.pure_error.ss_pe, rel(5e-3));
    r.push("adiabatic F_Rx", 84730.0, ad.f.f_rx, rel(2e-2));
    r.push("adiabatic F_Rc", 505.0, ad.f.f_rc, rel(2e-2));
    r.push("adiabatic F_LoF", 7.342, ad.lack_of_fit.map_or(f64::NAN, |l| l.f_lof), rel(2e-2));
    r.flag("adiabatic adequate", true, ad.adequate().unwrap_or(false));

    let iso = run(&spec_f, &fact, ModelKind::Hybrid, TheorySource::Column("P_v".into()))?;
    hybrid_checks(&mut r, "isochoric", &iso, &B_ISOCHORIC, &P_V_FIT);
    r.push("isochoric SS_E", 2.586, iso.partition.ss_e, rel(5e-3));
    r.push("isochoric F_Rc", 866.0, iso.f.f_rc, rel(2e-2));
    r.push("isochoric F_LoF", 3.45, iso.lack_of_fit.map_or(f64::NAN, |l| l.f_lof), rel(2e-2));
    r.flag("isochoric adequate", true, iso.adequate().unwrap_or(false));
    r.push("SS_E ratio mlr2/isochoric", 47.6, m2.partition.ss_e / iso.partition.ss_e, rel(2e-2));
    r.push("mlr2 residual sd", 2.965, m2.residual_sd, rel(2e-2));
    r.push("isochoric residual sd", 0.509, iso.residual_sd, rel(2e-2));

    let bw_ad = ad.box_wetz_lack_of_fit.ok_or(Error::NoReplicates)?;
    let bw_iso = iso.box_wetz_lack_of_fit.ok_or(Error::NoReplicates)?;
    r.push("adiabatic Box-Wetz ratio", 2.5, bw_ad.ratio, rel(5e-2));
    r.flag("adiabatic useful predictor", false, bw_ad.useful_predictor);
    r.push("isochoric Box-Wetz ratio", 5.4, bw_iso.ratio, rel(5e-2));
    r.flag("isochoric useful predictor", true, bw_iso.useful_predictor);

    let sim_ad = simulate_design(&fact, GaugeModel::Adiabatic, &spec_f.gauge, &spec_f.columns)?;
    vector(&mut r, "gauge adiabatic", &P_LAMBDA, sim_ad.values.as_slice(), Tolerance::Abs(0.5));
    let sim_iso = simulate_design(&fact, GaugeModel::Isochoric, &spec_f.gauge, &spec_f.columns)?;
    vector(&mut r, "gauge isochoric", &P_V, sim_iso.values.as_slice(), Tolerance::Abs(0.5));

    Ok(r)
}
