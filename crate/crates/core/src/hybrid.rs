//! Hybrid-data regression `y = Xθ₁ + Yθ₂ + e` with `Y = (D − I)X` and
//! `D = diag(z)`, `z` being the computer-simulation output at each run.
//!
//! The augmented matrix `Ψ = [X Y]` is generally rank deficient, so the
//! normal equations are solved through a generalized inverse. Two routes are
//! implemented:
//!
//! * the partitioned route: `Z = (I − P_X)Y`, `b₂ = (ZᵀZ)⁻Zᵀy`,
//!   `b₁ = (XᵀX)⁻¹Xᵀ(y − Yb₂)`; this is the reported solution;
//! * the direct route `b = (ΨᵀΨ)⁻Ψᵀy`, run on every solve as a cross-check.
//!
//! The two solutions may differ when `Ψ` is rank deficient, but `Ψb` must not.

use nalgebra::{DMatrix, DVector};

use crate::dataset::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, Projector, TruncatedSvd, RANK_TOL};

/// Relative gate on `‖Ψb − Ψb_direct‖∞` checked by every solve.
pub const ROUTE_AGREEMENT_TOL: f64 = 1e-8;

/// Computer-experiment output at each run, in response units.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryVector {
    pub values: DVector<f64>,
    pub source_label: String,
}

impl TheoryVector {
    pub fn new(values: Vec<f64>, source_label: impl Into<String>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("theory value at run {} is not finite", i + 1)));
        }
        Ok(Self {
            values: DVector::from_vec(values),
            source_label: source_label.into(),
        })
    }

    /// `z ≡ 1`, which collapses the hybrid model to plain multiple regression.
    pub fn ones(n: usize) -> Self {
        Self {
            values: DVector::from_element(n, 1.0),
            source_label: "ones".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct HybridSystem {
    pub x: DesignMatrix,
    pub theory: TheoryVector,
    /// `Y = (D − I)X`.
    pub y_block: DMatrix<f64>,
    /// `Ψ = [X Y]`.
    pub psi: DMatrix<f64>,
    /// `Z = (I − P_X)Y`, deviations of `Y` from its projection on `X`.
    pub z: DMatrix<f64>,
    /// rank(Ψ).
    pub rank: usize,
    pub rank_x: usize,
    pub rank_z: usize,
    /// `(XᵀX)⁻¹`.
    pub gram_x_inv: DMatrix<f64>,
    /// `(XᵀX)⁻¹Xᵀ`, from QR.
    pub x_ls: DMatrix<f64>,
    /// `(ΨᵀΨ)⁺`, from the SVD of `Ψ`.
    pub psi_gram_pinv: DMatrix<f64>,
    /// `Q⁻ = (ZᵀZ)⁻`.
    pub q_ginv: DMatrix<f64>,
    pub proj_x: Projector,
    pub proj_z: Projector,
}

/// Builds `D`, `Y`, `Ψ` and `Z` for a design and a theory vector.
pub fn assemble(x: &DesignMatrix, theory: &TheoryVector) -> Result<HybridSystem> {
    let n = x.n_rows();
    let p1 = x.n_cols();
    if theory.len() != n {
        return Err(Error::Shape(format!(
            "theory vector has {} entries, design has {n} rows",
            theory.len()
        )));
    }
    if n < p1 {
        return Err(Error::Underdetermined {
            rows: n,
            rank: linalg::rank(&x.matrix, RANK_TOL),
        });
    }
    x.check_full_rank()?;

    let xm = &x.matrix;
    let y_block = DMatrix::from_fn(n, p1, |i, j| (theory.values[i] - 1.0) * xm[(i, j)]);
    let mut psi = DMatrix::zeros(n, 2 * p1);
    psi.columns_mut(0, p1).copy_from(xm);
    psi.columns_mut(p1, p1).copy_from(&y_block);

    let gram_x_inv = linalg::gram_inverse(xm)?;
    let x_ls = linalg::least_squares_operator(xm)?;
    let proj_x = linalg::projector_onto_columns(xm)?;
    let z = &y_block - &proj_x.matrix * &y_block;

    // Z is judged against the scale of Ψ: when Y lies in col(X) its
    // deviations are rounding noise, not signal.
    let psi_svd = TruncatedSvd::relative(&psi, RANK_TOL);
    let cutoff = RANK_TOL * psi_svd.sigma.iter().fold(0.0_f64, |a, &s| a.max(s));
    let z_svd = TruncatedSvd::new(&z, cutoff);

    let rank = psi_svd.rank();
    let rank_x = proj_x.rank;
    let rank_z = z_svd.rank();
    if rank != rank_x + rank_z {
        return Err(Error::Inconsistent(format!(
            "rank(Psi) = {rank} but rank(X) + rank(Z) = {rank_x} + {rank_z}"
        )));
    }

    Ok(HybridSystem {
        x: x.clone(),
        theory: theory.clone(),
        y_block,
        psi,
        rank,
        rank_x,
        rank_z,
        gram_x_inv,
        x_ls,
        psi_gram_pinv: psi_svd.gram_pinv(),
        q_ginv: z_svd.gram_pinv(),
        proj_x,
        proj_z: z_svd.projector(),
        z,
    })
}

impl HybridSystem {
    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    /// p + 1.
    pub fn p1(&self) -> usize {
        self.x.n_cols()
    }

    /// `D = diag(z)`.
    pub fn d(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.theory.values)
    }

    /// Hat matrix through the direct route, `Ψ(ΨᵀΨ)⁻Ψᵀ`.
    pub fn hat_direct(&self) -> Result<DMatrix<f64>> {
        Ok(&self.psi * &self.psi_gram_pinv * self.psi.transpose())
    }

    /// Hat matrix through the partitioned route, `P_X + P_Z`.
    pub fn hat_partitioned(&self) -> DMatrix<f64> {
        &self.proj_x.matrix + &self.proj_z.matrix
    }

    /// Partitioned generalized inverse of `ΨᵀΨ` built from `(XᵀX)⁻¹` and
    /// `Q⁻`:
    ///
    /// ```text
    /// | G⁻¹ + G⁻¹BQ⁻BᵀG⁻¹   −G⁻¹BQ⁻ |
    /// | −Q⁻BᵀG⁻¹              Q⁻     |      B = XᵀY
    /// ```
    pub fn partitioned_ginverse(&self) -> DMatrix<f64> {
        let p1 = self.p1();
        let g = &self.gram_x_inv;
        let b = self.x.matrix.transpose() * &self.y_block;
        let gbq = g * &b * &self.q_ginv;
        let mut out = DMatrix::zeros(2 * p1, 2 * p1);
        out.view_mut((0, 0), (p1, p1)).copy_from(&(g + &gbq * b.transpose() * g));
        out.view_mut((0, p1), (p1, p1)).copy_from(&(-&gbq));
        out.view_mut((p1, 0), (p1, p1)).copy_from(&(-gbq.transpose()));
        out.view_mut((p1, p1), (p1, p1)).copy_from(&self.q_ginv);
        out
    }

    /// `J = (ΨᵀΨ)⁻ΨᵀΨ`; `b` is unbiased for `Jβ`.
    pub fn estimability_matrix(&self) -> Result<DMatrix<f64>> {
        let gram = self.psi.transpose() * &self.psi;
        Ok(&self.psi_gram_pinv * gram)
    }
}

#[derive(Debug, Clone)]
pub struct HybridFit {
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    /// `[b₁; b₂]`.
    pub b: DVector<f64>,
    /// Solution of the direct route, kept for inspection.
    pub b_direct: DVector<f64>,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    pub ss_e: f64,
    /// n − rank(Ψ).
    pub df_e: usize,
    /// `SS_E/(n − m)`; `None` for a saturated model.
    pub sigma2_hat: Option<f64>,
    pub var_b: Option<DMatrix<f64>>,
    pub var_yhat: Option<DMatrix<f64>>,
}

impl HybridFit {
    pub fn sigma2_available(&self) -> bool {
        self.sigma2_hat.is_some()
    }
}

fn partitioned_solution(sys: &HybridSystem, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let b2 = &sys.q_ginv * (sys.z.transpose() * y);
    let b1 = &sys.x_ls * (y - &sys.y_block * &b2);
    (b1, b2)
}

/// Fits the hybrid model to observations `y`.
pub fn solve(sys: &HybridSystem, y: &DVector<f64>) -> Result<HybridFit> {
    let n = sys.n();
    if y.len() != n {
        return Err(Error::Shape(format!("response has {} entries, system has {n} rows", y.len())));
    }
    if n < sys.rank_x {
        return Err(Error::Underdetermined {
            rows: n,
            rank: sys.rank_x,
        });
    }

    let (b1, b2) = partitioned_solution(sys, y);
    let p1 = sys.p1();
    let mut b = DVector::zeros(2 * p1);
    b.rows_mut(0, p1).copy_from(&b1);
    b.rows_mut(p1, p1).copy_from(&b2);
    let fitted = &sys.psi * &b;

    let b_direct = &sys.psi_gram_pinv * (sys.psi.transpose() * y);
    let gap = (&sys.psi * &b_direct - &fitted).amax();
    let scale = y.amax().max(1.0);
    if gap > ROUTE_AGREEMENT_TOL * scale {
        return Err(Error::Inconsistent(format!(
            "partitioned and direct solutions give different fitted values (gap {gap:e})"
        )));
    }

    let residuals = y - &fitted;
    let ss_e = residuals.norm_squared();
    let df_e = n - sys.rank;
    let sigma2_hat = (df_e > 0).then(|| ss_e / df_e as f64);
    let (var_b, var_yhat) = match sigma2_hat {
        Some(s2) => (
            Some(covariance_of_solution(sys, s2)?.var_b),
            Some(variance_of_fit(sys, s2)?),
        ),
        None => (None, None),
    };

    Ok(HybridFit {
        b1,
        b2,
        b,
        b_direct,
        fitted,
        residuals,
        ss_e,
        df_e,
        sigma2_hat,
        var_b,
        var_yhat,
    })
}

/// `ŷ = Ψ(ΨᵀΨ)⁻Ψᵀy`.
pub fn fitted_values(sys: &HybridSystem, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != sys.n() {
        return Err(Error::Shape(format!(
            "response has {} entries, system has {} rows",
            y.len(),
            sys.n()
        )));
    }
    Ok(sys.hat_direct()? * y)
}

/// `A = (XᵀX)⁻¹XᵀΔX`, `Δ = D − I`: the bias `E(q) = θ + Aθ` picked up by
/// plain least squares when the response really carries the theory factor.
pub fn alias_matrix(sys: &HybridSystem) -> DMatrix<f64> {
    &sys.gram_x_inv * sys.x.matrix.transpose() * &sys.y_block
}

#[derive(Debug, Clone)]
pub struct SolutionCovariance {
    /// Full `2(p+1)` square covariance of `[b₁; b₂]`.
    pub var_b: DMatrix<f64>,
    pub cov_b1_b2: DMatrix<f64>,
}

impl SolutionCovariance {
    pub fn var_b1(&self) -> DMatrix<f64> {
        let p1 = self.cov_b1_b2.nrows();
        self.var_b.view((0, 0), (p1, p1)).into_owned()
    }

    pub fn var_b2(&self) -> DMatrix<f64> {
        let p1 = self.cov_b1_b2.nrows();
        self.var_b.view((p1, p1), (p1, p1)).into_owned()
    }
}

/// Block covariance of the partitioned solution, `var(b₂) = Q⁻ZᵀYQ⁻σ²`.
pub fn covariance_of_solution(sys: &HybridSystem, sigma2: f64) -> Result<SolutionCovariance> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Contract(format!("variance must be non-negative, got {sigma2}")));
    }
    let p1 = sys.p1();
    let g = &sys.gram_x_inv;
    let q = &sys.q_ginv;
    let b = sys.x.matrix.transpose() * &sys.y_block;
    let gbq = g * &b * q;

    let v11 = g + &gbq * b.transpose() * g;
    let v12 = -&gbq;
    let v22 = q * sys.z.transpose() * &sys.y_block * q;

    let mut var_b = DMatrix::zeros(2 * p1, 2 * p1);
    var_b.view_mut((0, 0), (p1, p1)).copy_from(&v11);
    var_b.view_mut((0, p1), (p1, p1)).copy_from(&v12);
    var_b.view_mut((p1, 0), (p1, p1)).copy_from(&v12.transpose());
    var_b.view_mut((p1, p1), (p1, p1)).copy_from(&v22);
    let var_b = (&var_b + var_b.transpose()) * (0.5 * sigma2);

    Ok(SolutionCovariance {
        cov_b1_b2: v12 * sigma2,
        var_b,
    })
}

/// `var(ŷ) = (P_X + P_Z)σ²`.
pub fn variance_of_fit(sys: &HybridSystem, sigma2: f64) -> Result<DMatrix<f64>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Contract(format!("variance must be non-negative, got {sigma2}")));
    }
    Ok(sys.hat_partitioned() * sigma2)
}
