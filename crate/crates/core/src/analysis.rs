//! End-to-end fit of one model to one dataset: design, theory column,
//! solution, variance partition and verdicts.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::dataset::{build_design, code, replicate_groups, Dataset, DesignMatrix, ModelOrder};
use crate::error::{Error, Result};
use crate::fdist::f_critical;
use crate::gauge::{simulate_design, GaugeColumns, GaugeConstants, GaugeModel};
use crate::hybrid::{assemble, solve, HybridFit, HybridSystem, TheoryVector};
use crate::inference::{
    self, box_wetz_ratio, f_statistics, lack_of_fit_test, mean_corrected, partition, pure_error, r_squared,
    residual_diagnostics, residual_std_dev, BoxWetz, FStatistics, LackOfFit, MeanCorrected, PureErrorDecomposition,
    RSquared, ResidualDiagnostics, SsPartition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlr1,
    Mlr2,
    Hybrid,
}

impl ModelKind {
    pub fn order(&self) -> ModelOrder {
        match self {
            ModelKind::Mlr2 => ModelOrder::Second,
            ModelKind::Mlr1 | ModelKind::Hybrid => ModelOrder::First,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlr1" => Ok(ModelKind::Mlr1),
            "mlr2" => Ok(ModelKind::Mlr2),
            "hybrid" => Ok(ModelKind::Hybrid),
            other => Err(Error::Config(format!("unknown model '{other}' (mlr1, mlr2, hybrid)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mlr1 => "mlr1",
            ModelKind::Mlr2 => "mlr2",
            ModelKind::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TheorySource {
    Gauge(GaugeModel),
    Column(String),
    None,
}

impl FromStr for TheorySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adiabatic" => Ok(TheorySource::Gauge(GaugeModel::Adiabatic)),
            "isochoric" => Ok(TheorySource::Gauge(GaugeModel::Isochoric)),
            "none" => Ok(TheorySource::None),
            other => match other.strip_prefix("column:") {
                Some(name) if !name.is_empty() => Ok(TheorySource::Column(name.to_string())),
                _ => Err(Error::Config(format!(
                    "unknown theory '{other}' (adiabatic, isochoric, column:<name>, none)"
                ))),
            },
        }
    }
}

impl fmt::Display for TheorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TheorySource::Gauge(m) => f.write_str(m.name()),
            TheorySource::Column(c) => write!(f, "column:{c}"),
            TheorySource::None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub model: ModelKind,
    pub theory: TheorySource,
    pub alpha: f64,
    pub gauge: GaugeConstants,
    pub columns: GaugeColumns,
}

impl AnalysisOptions {
    pub fn new(model: ModelKind, theory: TheorySource) -> Self {
        Self {
            model,
            theory,
            alpha: 0.05,
            gauge: GaugeConstants::default(),
            columns: GaugeColumns::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        match (self.model, &self.theory) {
            (ModelKind::Hybrid, TheorySource::None) => {
                Err(Error::Config("the hybrid model needs a theory (adiabatic, isochoric or column:<name>)".into()))
            }
            (ModelKind::Mlr1 | ModelKind::Mlr2, t) if *t != TheorySource::None => Err(Error::Config(format!(
                "model {} takes no theory column (got {t})",
                self.model
            ))),
            _ => Ok(()),
        }
    }
}

/// An F test against its upper-α critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTest {
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub critical: f64,
    pub p_value: f64,
}

impl FTest {
    fn new(f: f64, df1: usize, df2: usize, alpha: f64) -> Result<Self> {
        Ok(Self {
            f,
            df1,
            df2,
            critical: f_critical(alpha, df1, df2)?,
            p_value: crate::fdist::f_sf(f, df1, df2)?,
        })
    }

    pub fn exceeds_critical(&self) -> bool {
        self.f > self.critical
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub options: AnalysisOptions,
    pub response_name: String,
    pub response_units: String,
    pub design: DesignMatrix,
    pub system: HybridSystem,
    pub y: DVector<f64>,
    pub fit: HybridFit,
    pub groups: Vec<Vec<usize>>,
    pub partition: SsPartition,
    pub f: FStatistics,
    pub mean_corrected: MeanCorrected,
    pub pure_error: PureErrorDecomposition,
    pub lack_of_fit: Option<LackOfFit>,
    /// Regression about the mean, F₀.
    pub test_regression: Option<FTest>,
    pub test_rx: FTest,
    pub test_rc: Option<FTest>,
    pub test_lof: Option<FTest>,
    pub r2: RSquared,
    pub residual_sd: f64,
    pub diagnostics: ResidualDiagnostics,
    /// Observed F of the model-specific regression test over its critical value.
    pub box_wetz_regression: Option<BoxWetz>,
    /// Critical lack-of-fit F over the observed one.
    pub box_wetz_lack_of_fit: Option<BoxWetz>,
}

impl Analysis {
    /// `None` when no replicate runs are available.
    pub fn adequate(&self) -> Option<bool> {
        self.test_lof.map(|t| !t.exceeds_critical())
    }

    /// Labels for the stacked solution `b = [b1; b2]`.
    pub fn coefficient_labels(&self) -> Vec<String> {
        let labels = self.design.labels();
        let mut out = labels.clone();
        out.extend(labels.iter().map(|l| format!("(z-1)*{l}")));
        out
    }
}

pub fn theory_vector(ds: &Dataset, opts: &AnalysisOptions) -> Result<TheoryVector> {
    match &opts.theory {
        TheorySource::None => Ok(TheoryVector::ones(ds.n_runs())),
        TheorySource::Column(name) => TheoryVector::new(ds.column(name)?, format!("column:{name}")),
        TheorySource::Gauge(model) => simulate_design(ds, *model, &opts.gauge, &opts.columns),
    }
}

pub fn analyze(ds: &Dataset, opts: &AnalysisOptions) -> Result<Analysis> {
    opts.validate()?;
    let coded = code(ds)?;
    let design = build_design(&coded, opts.model.order());
    let theory = theory_vector(ds, opts)?;
    let system = assemble(&design, &theory)?;
    let y = DVector::from_vec(ds.response());
    let fit = solve(&system, &y)?;
    let groups = replicate_groups(ds)?;

    let part = partition(&system, &y)?;
    let pe = pure_error(&y, &groups, &fit.fitted, fit.df_e)?;
    let r2 = r_squared(&fit, &y, pe.ss_pe)?;
    let f = f_statistics(&part)?;
    let mc = mean_corrected(&part);
    let lack_of_fit = match lack_of_fit_test(&pe) {
        Ok(l) => Some(l),
        Err(Error::NoReplicates) | Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };

    let alpha = opts.alpha;
    let test_rx = FTest::new(f.f_rx, part.df_rx, part.df_e, alpha)?;
    let test_rc = if part.df_rc > 0 {
        Some(FTest::new(f.f_rc, part.df_rc, part.df_e, alpha)?)
    } else {
        None
    };
    let test_regression = match mc.f0 {
        Some(f0) => Some(FTest::new(f0, mc.df_reg, part.df_e, alpha)?),
        None => None,
    };
    let test_lof = match lack_of_fit {
        Some(l) => Some(FTest::new(l.f_lof, pe.df_lof, pe.df_pe, alpha)?),
        None => None,
    };

    let headline = match opts.model {
        ModelKind::Hybrid => test_rc,
        ModelKind::Mlr1 | ModelKind::Mlr2 => test_regression,
    };
    let box_wetz_regression = headline.map(|t| box_wetz_ratio(t.f, t.critical)).transpose()?;
    let box_wetz_lack_of_fit = test_lof
        .filter(|t| t.f > 0.0)
        .map(|t| box_wetz_ratio(t.critical, t.f))
        .transpose()?;

    let diagnostics = residual_diagnostics(&fit.fitted, &fit.residuals)?;
    let residual_sd = residual_std_dev(&fit.residuals);

    Ok(Analysis {
        options: opts.clone(),
        response_name: ds.response_name.clone(),
        response_units: ds.response_units.clone(),
        design,
        system,
        y,
        groups,
        partition: part,
        f,
        mean_corrected: mc,
        pure_error: pe,
        lack_of_fit,
        test_regression,
        test_rx,
        test_rc,
        test_lof,
        r2,
        residual_sd,
        diagnostics,
        box_wetz_regression,
        box_wetz_lack_of_fit,
        fit,
    })
}

/// ANOVA tables for an analysis in each layout.
pub fn anova_reports(a: &Analysis) -> Result<Vec<inference::AnovaReport>> {
    use inference::AnovaLayout::*;
    [Full, Partitioned, Corrected, MeanCorrected]
        .into_iter()
        .map(|layout| inference::anova_report(&a.partition, Some(&a.pure_error), layout, &a.response_units))
        .collect()
}
