//! Steady-flow back-pressure of a pneumatic gauge: orifice and
//! nozzle-workpiece sensor in series, solved for the pressure between them.
//!
//! The common factor `sqrt(2g/RT)` cancels from both sides of each flow
//! equality, so only dimensionless flow factors appear here. Pressures are in
//! kPa, areas in mm² (only their ratio matters).

use serde::Deserialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hybrid::TheoryVector;

/// Relative bound on the flow imbalance at a returned root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;
/// Gap kept between the bracket and the outlet/supply pressures, kPa.
const BRACKET_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeConstants {
    pub gamma: f64,
    /// Outlet pressure `P_a`, kPa.
    pub p_atm: f64,
    pub c_orifice: f64,
    pub c_sensor: f64,
}

impl Default for GaugeConstants {
    fn default() -> Self {
        Self {
            gamma: 1.4,
            p_atm: 101.325,
            c_orifice: 1.0,
            c_sensor: 1.0,
        }
    }
}

impl GaugeConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.p_atm > 0.0) || !self.p_atm.is_finite() {
            return Err(Error::Config(format!("p_atm must be positive, got {}", self.p_atm)));
        }
        for (name, c) in [("c_orifice", self.c_orifice), ("c_sensor", self.c_sensor)] {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeInputs {
    /// Sensor area `A`, mm².
    pub area_sensor: f64,
    /// Absolute supply pressure `P_s`, MPa.
    pub pressure_supply: f64,
    /// Orifice area `B`, mm².
    pub area_orifice: f64,
}

impl GaugeInputs {
    pub fn supply_kpa(&self) -> f64 {
        self.pressure_supply * 1000.0
    }

    fn validate(&self, k: &GaugeConstants) -> Result<()> {
        for (name, v) in [
            ("sensor area", self.area_sensor),
            ("supply pressure", self.pressure_supply),
            ("orifice area", self.area_orifice),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.supply_kpa() <= k.p_atm {
            return Err(Error::Domain(format!(
                "supply pressure {} kPa does not exceed outlet pressure {} kPa",
                self.supply_kpa(),
                k.p_atm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeModel {
    Adiabatic,
    Isochoric,
}

impl GaugeModel {
    pub fn name(&self) -> &'static str {
        match self {
            GaugeModel::Adiabatic => "adiabatic",
            GaugeModel::Isochoric => "isochoric",
        }
    }
}

/// Pressure ratio below which adiabatic flow is choked.
pub fn critical_ratio(gamma: f64) -> f64 {
    (2.0 / (gamma + 1.0)).powf(gamma / (gamma - 1.0))
}

/// Adiabatic flow factor for downstream/upstream pressure ratio `r`.
pub fn flow_factor_adiabatic(r: f64, gamma: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("pressure ratio must lie in (0, 1], got {r}")));
    }
    if !(gamma > 1.0) {
        return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
    }
    Ok(if r >= critical_ratio(gamma) {
        let inner = r.powf(2.0 / gamma) - r.powf((gamma + 1.0) / gamma);
        (gamma / (gamma - 1.0) * inner.max(0.0)).sqrt()
    } else {
        choked_factor(gamma)
    })
}

fn choked_factor(gamma: f64) -> f64 {
    (gamma / (gamma + 1.0) * (2.0 / (gamma + 1.0)).powf(2.0 / (gamma - 1.0))).sqrt()
}

/// Isochoric flow factor, kPa.
pub fn flow_factor_isochoric(p_up: f64, p_down: f64) -> Result<f64> {
    if !(p_down > 0.0 && p_down <= p_up) {
        return Err(Error::Domain(format!(
            "need 0 < downstream ({p_down}) <= upstream ({p_up})"
        )));
    }
    Ok(if p_down / p_up >= 0.5 {
        (p_down * (p_up - p_down)).sqrt()
    } else {
        p_up / 2.0
    })
}

/// Root of a strictly decreasing imbalance on `(lo, hi)`, bisected until the
/// interval cannot shrink further.
fn bisect(mut lo: f64, mut hi: f64, imbalance: impl Fn(f64) -> Result<(f64, f64)>) -> Result<f64> {
    let (l_lo, r_lo) = imbalance(lo)?;
    let (l_hi, r_hi) = imbalance(hi)?;
    let (g_lo, g_hi) = (l_lo - r_lo, l_hi - r_hi);
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::NoRoot {
            low: lo,
            high: hi,
            low_residual: g_lo,
            high_residual: g_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (l, r) = imbalance(mid)?;
        if l - r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let (l, r) = imbalance(root)?;
    if (l - r).abs() > ROOT_RESIDUAL_TOL * l.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Inconsistent(format!(
            "flow imbalance {:e} at root {root} kPa exceeds tolerance",
            l - r
        )));
    }
    Ok(root)
}

/// Back-pressure `P_λ` (kPa) balancing adiabatic flow through orifice and
/// sensor.
pub fn solve_backpressure_adiabatic(inp: &GaugeInputs, k: &GaugeConstants) -> Result<f64> {
    k.validate()?;
    inp.validate(k)?;
    let ps = inp.supply_kpa();
    bisect(k.p_atm + BRACKET_EPS, ps - BRACKET_EPS, |p| {
        let orifice = k.c_orifice * inp.area_orifice * ps * flow_factor_adiabatic(p / ps, k.gamma)?;
        let sensor = k.c_sensor * inp.area_sensor * p * flow_factor_adiabatic(k.p_atm / p, k.gamma)?;
        Ok((orifice, sensor))
    })
}

/// Back-pressure `P_v` (kPa) balancing isochoric flow through orifice and
/// sensor.
pub fn solve_backpressure_isochoric(inp: &GaugeInputs, k: &GaugeConstants) -> Result<f64> {
    k.validate()?;
    inp.validate(k)?;
    let ps = inp.supply_kpa();
    bisect(k.p_atm + BRACKET_EPS, ps - BRACKET_EPS, |p| {
        let orifice = k.c_orifice * inp.area_orifice * flow_factor_isochoric(ps, p)?;
        let sensor = k.c_sensor * inp.area_sensor * flow_factor_isochoric(p, k.p_atm)?;
        Ok((orifice, sensor))
    })
}

pub fn solve_backpressure(model: GaugeModel, inp: &GaugeInputs, k: &GaugeConstants) -> Result<f64> {
    match model {
        GaugeModel::Adiabatic => solve_backpressure_adiabatic(inp, k),
        GaugeModel::Isochoric => solve_backpressure_isochoric(inp, k),
    }
}

/// Which table columns hold the gauge inputs, and the unit of the supply
/// pressure column.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeColumns {
    pub area_sensor: String,
    pub pressure_supply: String,
    pub area_orifice: String,
    /// "MPa" or "kPa".
    pub supply_units: String,
}

impl Default for GaugeColumns {
    fn default() -> Self {
        Self {
            area_sensor: "A".into(),
            pressure_supply: "Ps".into(),
            area_orifice: "B".into(),
            supply_units: "MPa".into(),
        }
    }
}

impl GaugeColumns {
    fn supply_to_mpa(&self) -> Result<f64> {
        match self.supply_units.as_str() {
            "MPa" => Ok(1.0),
            "kPa" => Ok(1e-3),
            other => Err(Error::Config(format!("unsupported supply pressure unit '{other}'"))),
        }
    }
}

/// Runs the gauge simulator on every row of the design.
pub fn simulate_design(
    ds: &Dataset,
    model: GaugeModel,
    k: &GaugeConstants,
    cols: &GaugeColumns,
) -> Result<TheoryVector> {
    k.validate()?;
    let scale = cols.supply_to_mpa()?;
    let a = ds.column(&cols.area_sensor)?;
    let ps = ds.column(&cols.pressure_supply)?;
    let b = ds.column(&cols.area_orifice)?;
    let values = (0..ds.n_runs())
        .map(|i| {
            let inp = GaugeInputs {
                area_sensor: a[i],
                pressure_supply: ps[i] * scale,
                area_orifice: b[i],
            };
            solve_backpressure(model, &inp, k).map_err(|e| Error::at_row(i + 1, e))
        })
        .collect::<Result<Vec<_>>>()?;
    TheoryVector::new(values, model.name())
}
