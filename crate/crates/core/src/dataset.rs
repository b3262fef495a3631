//! Experiment tables, coded variables and polynomial design matrices.
//!
//! A [`Dataset`] keeps every column of the source table verbatim (so that
//! auxiliary columns such as printed theory values can be pulled out later)
//! alongside the parsed factor settings and responses of each run.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Relative slack allowed between a declared center and the midpoint of
/// `low`/`high` (declared centers are usually rounded to the table's digits).
const CENTER_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub center: f64,
    pub units: String,
}

impl FactorSpec {
    /// Builds a factor; `center` defaults to the midpoint of the range.
    pub fn new(name: impl Into<String>, low: f64, high: f64, center: Option<f64>) -> Result<Self> {
        let name = name.into();
        if !(low.is_finite() && high.is_finite()) {
            return Err(Error::InvalidFactor {
                name,
                reason: "non-finite level".into(),
            });
        }
        if low == high {
            return Err(Error::DegenerateFactor(name));
        }
        if low > high {
            return Err(Error::InvalidFactor {
                name,
                reason: format!("low {low} exceeds high {high}"),
            });
        }
        let mid = 0.5 * (low + high);
        let center = match center {
            None => mid,
            Some(c) => {
                let scale = low.abs().max(high.abs());
                if (c - mid).abs() > CENTER_REL_TOL * scale {
                    return Err(Error::InvalidFactor {
                        name,
                        reason: format!("center {c} is not the midpoint {mid} of [{low}, {high}]"),
                    });
                }
                c
            }
        };
        Ok(Self {
            name,
            low,
            high,
            center,
            units: String::new(),
        })
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }

    pub fn half_range(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    /// Natural level to coded level. The three design levels map exactly.
    pub fn code(&self, natural: f64) -> f64 {
        if natural == self.low {
            -1.0
        } else if natural == self.high {
            1.0
        } else if natural == self.center {
            0.0
        } else {
            (natural - self.center) / self.half_range()
        }
    }

    /// Coded level back to natural units.
    pub fn decode(&self, coded: f64) -> f64 {
        if coded == -1.0 {
            self.low
        } else if coded == 1.0 {
            self.high
        } else if coded == 0.0 {
            self.center
        } else {
            self.center + coded * self.half_range()
        }
    }
}

/// Column-name mapping used when ingesting a table.
#[derive(Debug, Clone)]
pub struct Schema {
    pub factors: Vec<FactorSpec>,
    pub response: String,
    pub response_units: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub natural: Vec<f64>,
    pub response: f64,
}

/// The source table as read, cells untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub cells: Vec<Vec<String>>,
    pub delimiter: Delimiter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Tab,
    Comma,
}

impl Delimiter {
    /// Tab when the header has one, otherwise comma.
    fn detect(text: &str) -> Self {
        let header = text
            .lines()
            .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .unwrap_or("");
        if header.contains('\t') {
            Delimiter::Tab
        } else {
            Delimiter::Comma
        }
    }

    pub fn byte(&self) -> u8 {
        match self {
            Delimiter::Tab => b'\t',
            Delimiter::Comma => b',',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub factors: Vec<FactorSpec>,
    pub runs: Vec<Run>,
    pub response_name: String,
    pub response_units: String,
    pub table: RawTable,
}

impl Dataset {
    pub fn n_runs(&self) -> usize {
        self.runs.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn response(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.response).collect()
    }

    /// Parses any column of the source table as numbers.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .table
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))?;
        self.table
            .cells
            .iter()
            .enumerate()
            .map(|(i, row)| parse_cell(&row[idx], i + 1, idx + 1))
            .collect()
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    /// The table with one extra column appended (used to publish simulated
    /// theory values next to the observations).
    pub fn with_appended_column(&self, name: &str, values: &[f64], decimals: usize) -> Result<RawTable> {
        if values.len() != self.table.cells.len() {
            return Err(Error::Shape(format!(
                "appended column has {} entries, table has {} rows",
                values.len(),
                self.table.cells.len()
            )));
        }
        let mut table = self.table.clone();
        table.header.push(name.to_string());
        for (row, v) in table.cells.iter_mut().zip(values) {
            row.push(format!("{v:.decimals$}"));
        }
        Ok(table)
    }
}

impl RawTable {
    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .delimiter(self.delimiter.byte())
            .from_writer(Vec::new());
        for record in std::iter::once(&self.header).chain(&self.cells) {
            w.write_record(record).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("cells are UTF-8")
    }
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column,
            message: format!("'{cell}' is not finite"),
        });
    }
    Ok(v)
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.record() as usize);
    match e.into_kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            row,
            column: (len.min(expected_len) + 1) as usize,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse {
            row,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a header-row, tab- or comma-separated table. Blank lines and lines
/// starting with `#` are skipped.
pub fn load_table<R: Read>(mut source: R, schema: &Schema) -> Result<Dataset> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let delimiter = Delimiter::detect(&text);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter.byte())
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(String::from).collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::NoData);
    }
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let factor_cols = schema
        .factors
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let response_col = find(&schema.response)?;

    let mut cells = Vec::new();
    let mut runs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row_no = i + 1;
        let fields: Vec<&str> = record.iter().collect();
        let natural = factor_cols
            .iter()
            .map(|&c| parse_cell(fields[c], row_no, c + 1))
            .collect::<Result<Vec<_>>>()?;
        let response = parse_cell(fields[response_col], row_no, response_col + 1)?;
        runs.push(Run { natural, response });
        cells.push(fields.into_iter().map(String::from).collect());
    }
    if runs.is_empty() {
        return Err(Error::NoData);
    }

    Ok(Dataset {
        factors: schema.factors.clone(),
        runs,
        response_name: schema.response.clone(),
        response_units: schema.response_units.clone(),
        table: RawTable {
            header,
            cells,
            delimiter,
        },
    })
}

/// Coded factor levels, one row per run.
pub fn code(ds: &Dataset) -> Result<DMatrix<f64>> {
    for f in &ds.factors {
        if f.half_range() == 0.0 {
            return Err(Error::DegenerateFactor(f.name.clone()));
        }
    }
    Ok(DMatrix::from_fn(ds.n_runs(), ds.n_factors(), |i, j| {
        ds.factors[j].code(ds.runs[i].natural[j])
    }))
}

/// Inverse of [`code`].
pub fn decode(factors: &[FactorSpec], coded: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if coded.ncols() != factors.len() {
        return Err(Error::Shape(format!(
            "{} coded columns for {} factors",
            coded.ncols(),
            factors.len()
        )));
    }
    Ok(DMatrix::from_fn(coded.nrows(), coded.ncols(), |i, j| {
        factors[j].decode(coded[(i, j)])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelOrder {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Intercept,
    Linear(usize),
    Square(usize),
    Cross(usize, usize),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Term::Intercept => write!(f, "1"),
            Term::Linear(i) => write!(f, "x{}", i + 1),
            Term::Square(i) => write!(f, "x{}^2", i + 1),
            Term::Cross(i, j) => write!(f, "x{}*x{}", i + 1, j + 1),
        }
    }
}

impl Term {
    fn eval(&self, row: &[f64]) -> f64 {
        match *self {
            Term::Intercept => 1.0,
            Term::Linear(i) => row[i],
            Term::Square(i) => row[i] * row[i],
            Term::Cross(i, j) => row[i] * row[j],
        }
    }
}

/// Basis-expanded design matrix with an intercept column first.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub terms: Vec<Term>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// p + 1.
    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(Term::to_string).collect()
    }

    /// Full column rank with at least as many runs as columns.
    pub fn check_full_rank(&self) -> Result<()> {
        let p1 = self.n_cols();
        if self.n_rows() < p1 {
            return Err(Error::RankDeficient {
                rank: self.n_rows(),
                required: p1,
            });
        }
        let rank = linalg::rank(&self.matrix, linalg::RANK_TOL);
        if rank < p1 {
            return Err(Error::RankDeficient { rank, required: p1 });
        }
        Ok(())
    }
}

fn terms_for(k: usize, order: ModelOrder) -> Vec<Term> {
    let mut terms = vec![Term::Intercept];
    terms.extend((0..k).map(Term::Linear));
    if order == ModelOrder::Second {
        terms.extend((0..k).map(Term::Square));
        for i in 0..k {
            for j in i + 1..k {
                terms.push(Term::Cross(i, j));
            }
        }
    }
    terms
}

/// Expands coded levels into a polynomial basis: `[1, x1..xk]` for first
/// order, followed by all squares and then all cross-products for second.
pub fn build_design(coded: &DMatrix<f64>, order: ModelOrder) -> DesignMatrix {
    let terms = terms_for(coded.ncols(), order);
    let rows: Vec<Vec<f64>> = coded
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let matrix = DMatrix::from_fn(coded.nrows(), terms.len(), |i, j| terms[j].eval(&rows[i]));
    DesignMatrix { matrix, terms }
}

/// Runs with bit-identical coded settings, in order of first appearance.
/// Every run belongs to exactly one group (singletons included).
pub fn replicate_groups(ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    Ok(group_rows(&code(ds)?))
}

pub fn group_rows(coded: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, row) in coded.row_iter().enumerate() {
        // +0.0 and -0.0 must land in the same group
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        match index.get(&key) {
            Some(&g) => groups[g].push(i),
            None => {
                index.insert(key, groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}
