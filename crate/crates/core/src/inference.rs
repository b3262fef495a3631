//! Sums of squares, F statistics, lack of fit and residual diagnostics for
//! hybrid (and, with `z ≡ 1`, ordinary) regression fits.

use nalgebra::DVector;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fdist;
use crate::hybrid::{HybridFit, HybridSystem};

/// Relative slack on sum-of-squares identities.
pub const SS_REL_TOL: f64 = 1e-6;

/// Total, regression and residual sums of squares with their degrees of
/// freedom. `rx` is the plain-regression share, `rc` what the theory terms
/// add on top of it.
#[derive(Debug, Clone, PartialEq)]
pub struct SsPartition {
    pub n: usize,
    pub ss_t: f64,
    pub ss_r: f64,
    pub ss_rx: f64,
    pub ss_rc: f64,
    pub ss_e: f64,
    pub ss_tc: f64,
    /// `nȳ²`, the correction for the mean.
    pub ss_mean: f64,
    /// m = rank(Ψ).
    pub df_r: usize,
    /// p + 1.
    pub df_rx: usize,
    pub df_rc: usize,
    /// n − m.
    pub df_e: usize,
}

impl SsPartition {
    pub fn ms_e(&self) -> Option<f64> {
        (self.df_e > 0).then(|| self.ss_e / self.df_e as f64)
    }

    /// Largest relative violation among the additivity identities.
    pub fn identity_error(&self) -> f64 {
        let scale = self.ss_t.abs().max(f64::MIN_POSITIVE);
        let e1 = (self.ss_t - self.ss_r - self.ss_e).abs();
        let e2 = (self.ss_r - self.ss_rx - self.ss_rc).abs();
        let e3 = (self.ss_tc - (self.ss_t - self.ss_rx)).abs();
        e1.max(e2).max(e3) / scale
    }

    fn check(&self) -> Result<()> {
        let tol = SS_REL_TOL * self.ss_t.abs().max(f64::MIN_POSITIVE);
        let err = self.identity_error();
        if err > SS_REL_TOL {
            return Err(Error::Inconsistent(format!("sum-of-squares identities violated ({err:e})")));
        }
        for (name, v) in [
            ("SS_R", self.ss_r),
            ("SS_Rx", self.ss_rx),
            ("SS_Rc", self.ss_rc),
            ("SS_E", self.ss_e),
            ("SS_Tc", self.ss_tc),
        ] {
            if v < -tol {
                return Err(Error::Inconsistent(format!("{name} is negative ({v:e})")));
            }
        }
        if self.df_rx + self.df_rc + self.df_e != self.n {
            return Err(Error::Inconsistent("degrees of freedom do not add up to n".into()));
        }
        Ok(())
    }
}

/// Splits `yᵀy` into plain-regression, theory-correction and residual parts.
pub fn partition(sys: &HybridSystem, y: &DVector<f64>) -> Result<SsPartition> {
    let n = sys.n();
    if y.len() != n {
        return Err(Error::Shape(format!("response has {} entries, system has {n} rows", y.len())));
    }
    let ss_t = y.norm_squared();
    let px_y = sys.proj_x.apply(y);
    let ss_rx = px_y.norm_squared();
    let b2 = &sys.q_ginv * (sys.z.transpose() * y);
    let ss_rc = b2.dot(&(sys.z.transpose() * y));
    let ss_e = (y - px_y - sys.proj_z.apply(y)).norm_squared();
    let ybar = y.mean();

    let part = SsPartition {
        n,
        ss_t,
        ss_r: ss_rx + ss_rc,
        ss_rx,
        ss_rc,
        ss_e,
        ss_tc: ss_t - ss_rx,
        ss_mean: n as f64 * ybar * ybar,
        df_r: sys.rank,
        df_rx: sys.rank_x,
        df_rc: sys.rank - sys.rank_x,
        df_e: n - sys.rank,
    };
    part.check()?;
    Ok(part)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FStatistics {
    pub f_r: f64,
    pub f_rx: f64,
    pub f_rc: f64,
}

pub fn f_statistics(part: &SsPartition) -> Result<FStatistics> {
    if part.df_e == 0 {
        return Err(Error::Saturated(part.n));
    }
    if !(part.ss_e > 0.0) {
        return Err(Error::Domain("residual sum of squares is zero; F is unbounded".into()));
    }
    let ms_e = part.ss_e / part.df_e as f64;
    let ratio = |ss: f64, df: usize| if df == 0 { 0.0 } else { ss / df as f64 / ms_e };
    Ok(FStatistics {
        f_r: ratio(part.ss_r, part.df_r),
        f_rx: ratio(part.ss_rx, part.df_rx),
        f_rc: ratio(part.ss_rc, part.df_rc),
    })
}

/// Mean-corrected regression summary of classical response-surface tables:
/// regression about the mean against the corrected total `S_yy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCorrected {
    pub ss_reg: f64,
    pub df_reg: usize,
    pub ss_total: f64,
    pub df_total: usize,
    pub f0: Option<f64>,
}

pub fn mean_corrected(part: &SsPartition) -> MeanCorrected {
    let ss_reg = part.ss_r - part.ss_mean;
    let df_reg = part.df_r.saturating_sub(1);
    let f0 = match part.ms_e() {
        Some(ms_e) if df_reg > 0 && ms_e > 0.0 => Some(ss_reg / df_reg as f64 / ms_e),
        _ => None,
    };
    MeanCorrected {
        ss_reg,
        df_reg,
        ss_total: part.ss_t - part.ss_mean,
        df_total: part.n.saturating_sub(1),
        f0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureErrorDecomposition {
    pub ss_pe: f64,
    pub df_pe: usize,
    pub ss_lof: f64,
    pub df_lof: usize,
}

/// Splits the residual sum of squares into pure error (scatter within
/// replicate groups) and lack of fit.
pub fn pure_error(
    y: &DVector<f64>,
    groups: &[Vec<usize>],
    fitted: &DVector<f64>,
    df_e: usize,
) -> Result<PureErrorDecomposition> {
    let n = y.len();
    if fitted.len() != n {
        return Err(Error::Shape(format!("{} fitted values for {n} observations", fitted.len())));
    }
    let covered: usize = groups.iter().map(Vec::len).sum();
    if covered != n || groups.iter().flatten().any(|&i| i >= n) {
        return Err(Error::Shape("replicate groups do not partition the runs".into()));
    }

    let mut ss_pe = 0.0;
    let mut df_pe = 0;
    for g in groups.iter().filter(|g| g.len() > 1) {
        let mean = g.iter().map(|&i| y[i]).sum::<f64>() / g.len() as f64;
        ss_pe += g.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>();
        df_pe += g.len() - 1;
    }
    if df_pe > df_e {
        return Err(Error::Inconsistent(format!(
            "pure-error dof {df_pe} exceed residual dof {df_e}"
        )));
    }
    let ss_e = (y - fitted).norm_squared();
    let ss_lof = ss_e - ss_pe;
    let tol = SS_REL_TOL * y.norm_squared().max(f64::MIN_POSITIVE);
    if ss_lof < -tol {
        return Err(Error::Inconsistent(format!(
            "lack-of-fit sum of squares is negative ({ss_lof:e})"
        )));
    }
    Ok(PureErrorDecomposition {
        ss_pe,
        df_pe,
        ss_lof: ss_lof.max(0.0),
        df_lof: df_e - df_pe,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LackOfFit {
    pub f_lof: f64,
    pub p_value: f64,
}

pub fn lack_of_fit_test(pe: &PureErrorDecomposition) -> Result<LackOfFit> {
    if pe.df_pe == 0 {
        return Err(Error::NoReplicates);
    }
    if !(pe.ss_pe > 0.0) {
        return Err(Error::Domain("pure-error sum of squares is zero".into()));
    }
    if pe.df_lof == 0 {
        return Err(Error::Domain("no degrees of freedom left for lack of fit".into()));
    }
    let f_lof = (pe.ss_lof / pe.df_lof as f64) / (pe.ss_pe / pe.df_pe as f64);
    Ok(LackOfFit {
        f_lof,
        p_value: fdist::f_sf(f_lof, pe.df_lof, pe.df_pe)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RSquared {
    pub r2: f64,
    pub r2_max: f64,
}

/// `R² = (bᵀΨᵀy − nȳ²)/(yᵀy − nȳ²)` and its ceiling once pure error is
/// taken out.
pub fn r_squared(fit: &HybridFit, y: &DVector<f64>, ss_pe: f64) -> Result<RSquared> {
    let n = y.len();
    if n < 2 {
        return Err(Error::Contract("R^2 needs at least two observations".into()));
    }
    let ybar = y.mean();
    let ss_mean = n as f64 * ybar * ybar;
    let syy = y.norm_squared() - ss_mean;
    let spread = y.iter().fold(0.0_f64, |a, v| a.max((v - ybar).abs()));
    if spread <= 1e-12 * ybar.abs().max(f64::MIN_POSITIVE) || !(syy > 0.0) {
        return Err(Error::ConstantResponse);
    }
    // bᵀΨᵀy = (Ψb)ᵀy
    let explained = fit.fitted.dot(y);
    Ok(RSquared {
        r2: (explained - ss_mean) / syy,
        r2_max: (syy - ss_pe) / syy,
    })
}

/// Sample standard deviation of the residuals (divisor n − 1).
pub fn residual_std_dev(residuals: &DVector<f64>) -> f64 {
    let n = residuals.len();
    if n < 2 {
        return 0.0;
    }
    let mean = residuals.mean();
    (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Blom plotting position `(i − 3/8)/(n + 1/4)` for 1-based rank `i`.
pub fn blom_position(i: usize, n: usize) -> f64 {
    (i as f64 - 0.375) / (n as f64 + 0.25)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDiagnostics {
    /// (standard-normal quantile, ordered residual).
    pub normal_plot: Vec<(f64, f64)>,
    /// (fitted value, residual) in run order.
    pub scatter: Vec<(f64, f64)>,
}

pub fn residual_diagnostics(fitted: &DVector<f64>, residuals: &DVector<f64>) -> Result<ResidualDiagnostics> {
    let n = residuals.len();
    if fitted.len() != n {
        return Err(Error::Shape(format!("{} fitted values for {n} residuals", fitted.len())));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep run order
    order.sort_by(|&a, &b| residuals[a].total_cmp(&residuals[b]));
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let normal_plot = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| (std_normal.inverse_cdf(blom_position(rank + 1, n)), residuals[i]))
        .collect();
    let scatter = fitted.iter().zip(residuals.iter()).map(|(&f, &r)| (f, r)).collect();
    Ok(ResidualDiagnostics { normal_plot, scatter })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxWetz {
    pub ratio: f64,
    pub useful_predictor: bool,
}

/// Multiple of the critical value reached by an observed F; four or more
/// counts as a useful predictor.
pub fn box_wetz_ratio(f_observed: f64, f_critical: f64) -> Result<BoxWetz> {
    if !(f_critical > 0.0) {
        return Err(Error::Contract(format!("critical F must be positive, got {f_critical}")));
    }
    let ratio = f_observed / f_critical;
    Ok(BoxWetz {
        ratio,
        useful_predictor: ratio >= 4.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnovaLayout {
    /// Regression on Ψ against the residual.
    Full,
    /// Regression split into the plain-regression and corrected parts.
    Partitioned,
    /// Plain regression removed from the body and from the total.
    Corrected,
    /// Classical table: regression about the mean against `S_yy`.
    MeanCorrected,
}

impl AnovaLayout {
    pub fn title(&self) -> &'static str {
        match self {
            AnovaLayout::Full => "Analysis of variance for fitting hybrid data regression",
            AnovaLayout::Partitioned => "Analysis of variance showing the term of multiple linear regression",
            AnovaLayout::Corrected => "Analysis of variance corrected for the term of multiple linear regression",
            AnovaLayout::MeanCorrected => "Analysis of variance for the regression model",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaRow {
    pub source: String,
    pub ss: f64,
    pub df: usize,
    pub ms: Option<f64>,
    pub f: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaReport {
    pub layout: AnovaLayout,
    pub rows: Vec<AnovaRow>,
    pub units: String,
}

impl AnovaReport {
    pub fn row(&self, source: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.source == source)
    }
}

fn plain_row(source: &str, ss: f64, df: usize) -> AnovaRow {
    AnovaRow {
        source: source.into(),
        ss,
        df,
        ms: (df > 0).then(|| ss / df as f64),
        f: None,
        p_value: None,
    }
}

fn tested_row(source: &str, ss: f64, df: usize, denom: Option<(f64, usize)>) -> Result<AnovaRow> {
    let mut row = plain_row(source, ss, df);
    if let (Some(ms), Some((ms_den, df_den))) = (row.ms, denom) {
        if ms_den > 0.0 {
            let f = ms / ms_den;
            row.f = Some(f);
            row.p_value = Some(fdist::f_sf(f, df, df_den)?);
        }
    }
    Ok(row)
}

pub fn anova_report(
    part: &SsPartition,
    pe: Option<&PureErrorDecomposition>,
    layout: AnovaLayout,
    units: &str,
) -> Result<AnovaReport> {
    let resid = part.ms_e().map(|ms| (ms, part.df_e));
    let mut rows = Vec::new();
    match layout {
        AnovaLayout::Full => {
            rows.push(tested_row("Regression", part.ss_r, part.df_r, resid)?);
        }
        AnovaLayout::Partitioned => {
            rows.push(tested_row("Linear regression", part.ss_rx, part.df_rx, resid)?);
            rows.push(tested_row("Corrected regression", part.ss_rc, part.df_rc, resid)?);
        }
        AnovaLayout::Corrected => {
            rows.push(tested_row("Corrected regression", part.ss_rc, part.df_rc, resid)?);
        }
        AnovaLayout::MeanCorrected => {
            let mc = mean_corrected(part);
            rows.push(tested_row("Regression", mc.ss_reg, mc.df_reg, resid)?);
        }
    }
    rows.push(plain_row("Residual", part.ss_e, part.df_e));
    if let Some(pe) = pe.filter(|pe| pe.df_pe > 0) {
        let pure = (pe.ss_pe / pe.df_pe as f64, pe.df_pe);
        rows.push(tested_row("Lack of fit", pe.ss_lof, pe.df_lof, Some(pure))?);
        rows.push(plain_row("Pure error", pe.ss_pe, pe.df_pe));
    }
    let mut total = match layout {
        AnovaLayout::Full | AnovaLayout::Partitioned => plain_row("Total", part.ss_t, part.n),
        AnovaLayout::Corrected => plain_row("Corrected total", part.ss_tc, part.n - part.df_rx),
        AnovaLayout::MeanCorrected => {
            let mc = mean_corrected(part);
            plain_row("Total", mc.ss_total, mc.df_total)
        }
    };
    total.ms = None;
    rows.push(total);
    Ok(AnovaReport {
        layout,
        rows,
        units: units.into(),
    })
}
