//! Spec file: factor levels, response column, gauge constants and optional
//! run defaults, in TOML.
//!
//! ```toml
//! response = "P1"
//! response_units = "kPa"
//!
//! [[factor]]
//! name = "A"
//! low = 0.251
//! high = 1.257
//! units = "mm^2"
//!
//! [gauge]
//! gamma = 1.4
//! p_atm = 101.325
//!
//! [columns]
//! pressure_supply = "Ps"
//!
//! [run]
//! model = "hybrid"
//! theory = "column:P_lambda"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{FactorSpec, Schema};
use crate::error::{Error, Result};
use crate::gauge::{GaugeColumns, GaugeConstants};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorEntry {
    name: String,
    low: f64,
    high: f64,
    center: Option<f64>,
    #[serde(default)]
    units: String,
}

/// Defaults for `fit`/`simulate`; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub model: Option<String>,
    pub theory: Option<String>,
    pub alpha: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    response: String,
    #[serde(default)]
    response_units: String,
    #[serde(default)]
    factor: Vec<FactorEntry>,
    #[serde(default)]
    gauge: GaugeConstants,
    #[serde(default)]
    columns: GaugeColumns,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Clone)]
pub struct Spec {
    pub schema: Schema,
    pub gauge: GaugeConstants,
    pub columns: GaugeColumns,
    pub run: RunSection,
}

pub fn parse_spec(text: &str) -> Result<Spec> {
    let file: SpecFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    if file.factor.is_empty() {
        return Err(Error::Config("at least one [[factor]] is required".into()));
    }
    let mut factors = Vec::with_capacity(file.factor.len());
    for f in file.factor {
        if factors.iter().any(|g: &FactorSpec| g.name == f.name) {
            return Err(Error::Config(format!("factor '{}' declared twice", f.name)));
        }
        factors.push(FactorSpec::new(f.name, f.low, f.high, f.center)?.with_units(f.units));
    }
    file.gauge.validate()?;
    Ok(Spec {
        schema: Schema {
            factors,
            response: file.response,
            response_units: file.response_units,
        },
        gauge: file.gauge,
        columns: file.columns,
        run: file.run,
    })
}

pub fn load_spec(path: &Path) -> Result<Spec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
