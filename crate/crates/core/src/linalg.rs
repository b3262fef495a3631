//! Rank-aware dense linear algebra: Moore–Penrose inverses, column-space
//! projectors and full-rank least squares.
//!
//! Every generalized inverse in the crate is the Moore–Penrose one. Fitted
//! values, residual sums of squares and projectors do not depend on which
//! generalized inverse is chosen, so the SVD-backed representative is used
//! throughout.

use nalgebra::{DMatrix, DVector};

use crate::dataset::DesignMatrix;
use crate::error::{Error, Result};

/// Singular values below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Symmetry slack for projectors and symmetric inputs (unit-scaled).
pub const TOL_SYM: f64 = 1e-8;
pub const TOL_IDEM: f64 = 1e-8;
/// Residual bound on the four Moore–Penrose conditions (unit-scaled).
pub const TOL_GINV: f64 = 1e-8;

/// A matrix together with its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedMatrix {
    pub values: DMatrix<f64>,
    pub rank: usize,
    pub rank_tolerance: f64,
}

impl RankedMatrix {
    pub fn new(values: DMatrix<f64>, rank_tolerance: f64) -> Self {
        let rank = rank(&values, rank_tolerance);
        Self {
            values,
            rank,
            rank_tolerance,
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `(U, σ, V)` with σ in decreasing order.
fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = to_faer(m).thin_svd().expect("SVD of a finite matrix converges");
    let s = svd.S().column_vector();
    (
        from_faer(svd.U()),
        DVector::from_fn(s.nrows(), |k, _| s[k]),
        from_faer(svd.V()),
    )
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    thin_svd(m).1
}

/// Number of singular values above `tol` times the largest one.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Thin SVD with singular values at or below an absolute cutoff discarded.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Kept left singular vectors, `rows × rank`.
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    /// Kept right singular vectors, `cols × rank`.
    pub v: DMatrix<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl TruncatedSvd {
    pub fn new(m: &DMatrix<f64>, cutoff: f64) -> Self {
        let (rows, cols) = m.shape();
        if m.is_empty() || max_abs(m) == 0.0 {
            return Self {
                u: DMatrix::zeros(rows, 0),
                sigma: DVector::zeros(0),
                v: DMatrix::zeros(cols, 0),
                rows,
                cols,
            };
        }
        let (u, sv, v) = thin_svd(m);
        let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > cutoff).collect();
        Self {
            u: u.select_columns(&keep),
            sigma: DVector::from_iterator(keep.len(), keep.iter().map(|&k| sv[k])),
            v: v.select_columns(&keep),
            rows,
            cols,
        }
    }

    /// Cutoff relative to the largest singular value.
    pub fn relative(m: &DMatrix<f64>, tol: f64) -> Self {
        let smax = singular_values(m).iter().fold(0.0_f64, |a, &s| a.max(s));
        Self::new(m, tol * smax)
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `M⁺`.
    pub fn pinv(&self) -> DMatrix<f64> {
        let inv = DVector::from_iterator(self.rank(), self.sigma.iter().map(|s| 1.0 / s));
        &self.v * DMatrix::from_diagonal(&inv) * self.u.transpose()
    }

    /// `(MᵀM)⁺ = V Σ⁻² Vᵀ`, without forming `MᵀM`.
    pub fn gram_pinv(&self) -> DMatrix<f64> {
        let inv = DVector::from_iterator(self.rank(), self.sigma.iter().map(|s| 1.0 / (s * s)));
        let g = &self.v * DMatrix::from_diagonal(&inv) * self.v.transpose();
        (&g + g.transpose()) * 0.5
    }

    /// `M(MᵀM)⁻Mᵀ = U Uᵀ`.
    pub fn projector(&self) -> Projector {
        let p = &self.u * self.u.transpose();
        Projector {
            matrix: (&p + p.transpose()) * 0.5,
            rank: self.rank(),
        }
    }
}

/// Moore–Penrose pseudoinverse of any rectangular matrix, with its rank.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let svd = TruncatedSvd::relative(m, RANK_TOL);
    (svd.pinv(), svd.rank())
}

/// Moore–Penrose inverse of a square symmetric matrix such as `MᵀM`.
pub fn generalized_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "generalized inverse needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m).max(1.0);
    let asym = max_abs(&(m - m.transpose()));
    if asym > TOL_SYM * scale {
        return Err(Error::Contract(format!(
            "generalized inverse needs a symmetric matrix (asymmetry {asym:e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let (g, _) = pseudo_inverse(&sym);
    Ok((&g + g.transpose()) * 0.5)
}

/// Largest violation of the four Moore–Penrose conditions, relative to the
/// scale of the inputs.
pub fn moore_penrose_residual(m: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let mg = m * g;
    let gm = g * m;
    let sm = max_abs(m).max(1.0);
    let sg = max_abs(g).max(1.0);
    let r1 = max_abs(&(&mg * m - m)) / sm;
    let r2 = max_abs(&(&gm * g - g)) / sg;
    let r3 = max_abs(&(&mg - mg.transpose())) / (sm * sg);
    let r4 = max_abs(&(&gm - gm.transpose())) / (sm * sg);
    r1.max(r2).max(r3).max(r4)
}

/// Orthogonal projector onto a column space.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
}

impl Projector {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn symmetry_error(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.transpose()))
    }

    pub fn idempotency_error(&self) -> f64 {
        max_abs(&(&self.matrix * &self.matrix - &self.matrix))
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    /// Quadratic form `vᵀPv`, evaluated as `‖Pv‖²`.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        self.apply(v).norm_squared()
    }
}

/// `P = M(MᵀM)⁻Mᵀ`, built from the left singular vectors of `M`.
pub fn projector_onto_columns(m: &DMatrix<f64>) -> Result<Projector> {
    if m.ncols() == 0 {
        return Err(Error::Shape("projector needs at least one column".into()));
    }
    Ok(TruncatedSvd::relative(m, RANK_TOL).projector())
}

/// `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ` from a thin QR, for a full-column-rank design.
pub fn gram_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p1 = x.ncols();
    let deficient = || Error::RankDeficient {
        rank: rank(x, RANK_TOL),
        required: p1,
    };
    if x.nrows() < p1 || rank(x, RANK_TOL) < p1 {
        return Err(deficient());
    }
    let r_inv = x.clone().qr().r().try_inverse().ok_or_else(deficient)?;
    let inv = &r_inv * r_inv.transpose();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// `R⁻¹Qᵀ` from a thin QR of a full-column-rank `x`; maps a response to its
/// least squares coefficients without forming `XᵀX`.
pub fn least_squares_operator(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = x.clone().qr();
    qr.r()
        .solve_upper_triangular(&qr.q().transpose())
        .ok_or(Error::RankDeficient {
            rank: rank(x, RANK_TOL),
            required: x.ncols(),
        })
}

/// Least squares coefficients `q = (XᵀX)⁻¹Xᵀy` via Householder QR.
pub fn ols_solve(x: &DesignMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    let xm = &x.matrix;
    if xm.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "design has {} rows, response has {}",
            xm.nrows(),
            y.len()
        )));
    }
    x.check_full_rank()?;
    let qr = xm.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r()
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient {
            rank: rank(xm, RANK_TOL),
            required: xm.ncols(),
        })
}
