//! Central F distribution through the regularized incomplete beta function.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

fn check_dof(df1: usize, df2: usize) -> Result<()> {
    if df1 == 0 || df2 == 0 {
        return Err(Error::Contract(format!(
            "F distribution needs positive degrees of freedom, got ({df1}, {df2})"
        )));
    }
    Ok(())
}

/// `P(F ≤ x)` for `F ~ F(df1, df2)`.
pub fn f_cdf(x: f64, df1: usize, df2: usize) -> Result<f64> {
    check_dof(df1, df2)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Contract(format!("F quantile must be non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let (d1, d2) = (df1 as f64, df2 as f64);
    Ok(beta_reg(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2)))
}

/// Upper tail `P(F > x)`, evaluated without cancellation.
pub fn f_sf(x: f64, df1: usize, df2: usize) -> Result<f64> {
    check_dof(df1, df2)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Contract(format!("F quantile must be non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let (d1, d2) = (df1 as f64, df2 as f64);
    Ok(beta_reg(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * x)))
}

/// Upper-α critical value `F_{α, df1, df2}`, i.e. `P(F > c) = α`.
pub fn f_critical(alpha: f64, df1: usize, df2: usize) -> Result<f64> {
    check_dof(df1, df2)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Contract(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f_sf(hi, df1, df2)? > alpha {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Domain("F critical value out of range".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_sf(mid, df1, df2)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
