//! Random hybrid systems and independent reference computations shared by the
//! acceptance and property suites.

#![allow(dead_code)]

use std::path::PathBuf;

use hybridreg::dataset::{build_design, group_rows, DesignMatrix, ModelOrder};
use hybridreg::hybrid::{assemble, HybridSystem, TheoryVector};
use hybridreg::linalg::{rank, singular_values};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// How the theory column relates to the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryShape {
    /// Unrelated positive values, usually giving rank(Z) = p + 1.
    Generic,
    /// A constant, so Y lies in col(X) and Z vanishes.
    Constant,
    /// An affine function of the first factor, so Z has partial rank.
    Affine,
    Ones,
}

#[derive(Debug, Clone)]
pub struct RandomCase {
    pub seed: u64,
    pub coded: DMatrix<f64>,
    pub design: DesignMatrix,
    pub theory: TheoryVector,
    pub sys: HybridSystem,
    pub y: DVector<f64>,
    pub groups: Vec<Vec<usize>>,
    pub shape: TheoryShape,
}

/// `d` distinct settings of `k` coded factors.
fn draw_points(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(d);
    while points.len() < d {
        let p: Vec<f64> = (0..k)
            .map(|_| {
                // Half the levels sit on the cube corners, as in two-level designs.
                if rng.gen_bool(0.5) {
                    if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        if !points.contains(&p) {
            points.push(p);
        }
    }
    points
}

/// Largest condition number accepted for X, and smallest singular value of Z
/// (relative to Ψ) that is not exactly zero.
pub const MAX_COND_X: f64 = 1e3;
pub const MIN_REL_SIGMA_Z: f64 = 1e-3;

/// Condition number of X and whether Z has a singular value stranded between
/// rounding noise and signal.
pub fn conditioning(sys: &HybridSystem) -> (f64, bool) {
    let sx = singular_values(&sys.x.matrix);
    let cond_x = sx.max() / sx.min();
    let scale = singular_values(&sys.psi).max();
    let borderline = singular_values(&sys.z)
        .iter()
        .any(|&s| s > 1e-9 * scale && s < MIN_REL_SIGMA_Z * scale);
    (cond_x, borderline)
}

/// A random system with n ≤ 20 runs and p ≤ 5 regressors, some of them
/// replicated, and a response drawn around a random hybrid mean. Draws with
/// cond(X) above [`MAX_COND_X`] or a borderline rank for Z are redrawn.
pub fn random_case(seed: u64) -> RandomCase {
    random_case_with(seed, true)
}

pub fn random_case_with(seed: u64, well_conditioned: bool) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (order, k) = if rng.gen_bool(0.3) {
            (ModelOrder::Second, rng.gen_range(1..=2))
        } else {
            (ModelOrder::First, rng.gen_range(1..=5))
        };
        let p1 = build_design(&DMatrix::zeros(1, k), order).n_cols();
        let d = p1 + rng.gen_range(0..=4);
        let extra = rng.gen_range(0..=(20 - d).min(5));
        let points = draw_points(&mut rng, d, k);

        let shape = match rng.gen_range(0..10) {
            0 => TheoryShape::Constant,
            1 => TheoryShape::Ones,
            2 | 3 => TheoryShape::Affine,
            _ => TheoryShape::Generic,
        };
        let (c0, c1) = (rng.gen_range(0.5..2.0), rng.gen_range(-0.4..0.4));
        let z_at: Vec<f64> = points
            .iter()
            .map(|x| match shape {
                TheoryShape::Generic => rng.gen_range(0.5..2.0),
                TheoryShape::Constant => c0,
                TheoryShape::Affine => c0 + c1 * x[0],
                TheoryShape::Ones => 1.0,
            })
            .collect();

        let mut rows: Vec<usize> = (0..d).collect();
        rows.extend((0..extra).map(|_| rng.gen_range(0..d)));
        let n = rows.len();
        let coded = DMatrix::from_fn(n, k, |i, j| points[rows[i]][j]);
        let design = build_design(&coded, order);
        if rank(&design.matrix, 1e-8) < p1 {
            continue;
        }
        let theory = TheoryVector::new(rows.iter().map(|&r| z_at[r]).collect(), "random").unwrap();
        let sys = assemble(&design, &theory).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        if well_conditioned {
            let (cond_x, borderline) = conditioning(&sys);
            if cond_x > MAX_COND_X || borderline {
                continue;
            }
        }

        let beta = DVector::from_fn(2 * p1, |_, _| rng.gen_range(-5.0..5.0));
        let mean = &sys.psi * beta;
        let y = DVector::from_fn(n, |i, _| mean[i] + rng.gen_range(-1.0..1.0));
        let groups = group_rows(&coded);
        return RandomCase {
            seed,
            coded,
            design,
            theory,
            sys,
            y,
            groups,
            shape,
        };
    }
}

/// Least squares through the normal equations with an LU solve, sharing no
/// code with the library's QR path.
pub fn normal_equations_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = x.transpose() * x;
    xtx.lu().solve(&(x.transpose() * y)).expect("design is full rank")
}

/// Lack of fit from group means: Σ n_g (ȳ_g − ŷ_g)².
pub fn lack_of_fit_from_means(y: &DVector<f64>, fitted: &DVector<f64>, groups: &[Vec<usize>]) -> f64 {
    groups
        .iter()
        .map(|g| {
            let mean = g.iter().map(|&i| y[i]).sum::<f64>() / g.len() as f64;
            g.len() as f64 * (mean - fitted[g[0]]).powi(2)
        })
        .sum()
}

/// A generalized inverse of `ΨᵀΨ` that is neither the Moore–Penrose nor the
/// partitioned one: invert the Gram matrix of a maximal independent subset of
/// columns and pad with zeros. Columns are picked by pivoted Gram–Schmidt.
pub fn column_subset_ginverse(psi: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = singular_values(psi).max();
    let mut w = psi.clone();
    let mut keep: Vec<usize> = Vec::new();
    loop {
        let best = (0..w.ncols())
            .filter(|j| !keep.contains(j))
            .map(|j| (j, w.column(j).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((j, norm)) = best.filter(|&(_, norm)| norm > 1e-7 * scale) else {
            break;
        };
        keep.push(j);
        let q = w.column(j) / norm;
        for _ in 0..2 {
            let proj = q.transpose() * &w;
            w -= &q * proj;
        }
    }
    let sub = psi.select_columns(&keep);
    let qr = sub.qr();
    let r_inv = qr.r().try_inverse().expect("independent columns");
    let inv = &r_inv * r_inv.transpose();
    let mut g = DMatrix::zeros(psi.ncols(), psi.ncols());
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            g[(i, j)] = inv[(a, b)];
        }
    }
    g
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub mod checks {
    use super::*;
    use hybridreg::gauge::{
        critical_ratio, flow_factor_adiabatic, flow_factor_isochoric, solve_backpressure, GaugeConstants,
        GaugeInputs, GaugeModel,
    };
    use hybridreg::hybrid::{covariance_of_solution, solve};
    use hybridreg::inference::{mean_corrected, partition, pure_error};
    use hybridreg::linalg::ols_solve;

    pub type Check = Result<(), String>;

    fn within(what: &str, got: f64, want: f64, tol: f64) -> Check {
        if (got - want).abs() <= tol {
            Ok(())
        } else {
            Err(format!("{what}: got {got:e}, want {want:e} (tol {tol:e})"))
        }
    }

    pub fn projector_identity(c: &RandomCase) -> Check {
        let direct = c.sys.hat_direct().map_err(|e| e.to_string())?;
        let gap = max_abs_diff(&direct, &c.sys.hat_partitioned());
        within("hat matrix gap", gap, 0.0, 1e-8)
    }

    pub fn ss_chains(c: &RandomCase) -> Check {
        let fit = solve(&c.sys, &c.y).map_err(|e| e.to_string())?;
        let part = partition(&c.sys, &c.y).map_err(|e| e.to_string())?;
        let ss_t = c.y.norm_squared();
        let tol = 1e-6 * ss_t;

        let q = normal_equations_ols(&c.design.matrix, &c.y);
        let ss_rx = (&c.design.matrix * q).norm_squared();
        within("SS_T", part.ss_t, ss_t, tol)?;
        within("SS_Rx", part.ss_rx, ss_rx, tol)?;
        within("SS_R", part.ss_r, fit.fitted.norm_squared(), tol)?;
        within("SS_Rx + SS_Rc + SS_E", part.ss_rx + part.ss_rc + part.ss_e, ss_t, tol)?;
        within("SS_E", part.ss_e, (&c.y - &fit.fitted).norm_squared(), tol)?;

        let pe = pure_error(&c.y, &c.groups, &fit.fitted, fit.df_e).map_err(|e| e.to_string())?;
        let lof = lack_of_fit_from_means(&c.y, &fit.fitted, &c.groups);
        within("SS_LoF", pe.ss_lof, lof, tol)?;
        within("SS_PE + SS_LoF", pe.ss_pe + lof, part.ss_e, tol)?;

        let mc = mean_corrected(&part);
        let ybar = c.y.mean();
        let s_yy: f64 = c.y.iter().map(|v| (v - ybar).powi(2)).sum();
        within("S_yy", mc.ss_total, s_yy, tol)?;
        within("SS_reg + SS_E", mc.ss_reg + part.ss_e, s_yy, tol)?;
        if part.df_rx + part.df_rc + part.df_e != c.y.len() {
            return Err("degrees of freedom do not add to n".into());
        }
        Ok(())
    }

    pub fn route_invariance(c: &RandomCase) -> Check {
        let fit = solve(&c.sys, &c.y).map_err(|e| e.to_string())?;
        let m = c.sys.psi.transpose() * &c.sys.psi;
        let scale = c.y.amax().max(1.0);
        // Applying the assembled partitioned inverse to Ψᵀy cancels large
        // terms, so it is only checked as a g-inverse.
        let part = c.sys.partitioned_ginverse();
        let gap = max_abs_diff(&(&m * &part * &m), &m);
        within("partitioned M G M = M", gap, 0.0, 1e-12 * m.amax().powi(2) * part.amax())?;
        for (name, g) in [
            ("column subset", column_subset_ginverse(&c.sys.psi)),
            ("Moore-Penrose", c.sys.psi_gram_pinv.clone()),
        ] {
            let mgm_gap = max_abs_diff(&(&m * &g * &m), &m) / m.amax();
            within(&format!("{name} M G M = M"), mgm_gap, 0.0, 1e-8)?;
            let yhat = &c.sys.psi * (&g * (c.sys.psi.transpose() * &c.y));
            within(&format!("{name} fitted gap"), (&yhat - &fit.fitted).amax(), 0.0, 1e-8 * scale)?;
            let ss_e = (&c.y - &yhat).norm_squared();
            within(&format!("{name} SS_E"), ss_e, fit.ss_e, 1e-8 * c.y.norm_squared().max(1.0))?;
        }
        Ok(())
    }

    pub fn reduces_to_ols(c: &RandomCase) -> Check {
        let ones = TheoryVector::ones(c.y.len());
        let sys = assemble(&c.design, &ones).map_err(|e| e.to_string())?;
        let fit = solve(&sys, &c.y).map_err(|e| e.to_string())?;
        let q = ols_solve(&c.design, &c.y).map_err(|e| e.to_string())?;
        let scale = q.amax().max(1.0);
        within("b1 vs OLS", (&fit.b1 - &q).amax(), 0.0, 1e-9 * scale)?;
        within("b2", fit.b2.amax(), 0.0, 1e-9 * scale)?;
        if sys.rank_z != 0 {
            return Err(format!("rank(Z) = {} with z = 1", sys.rank_z));
        }
        Ok(())
    }

    pub fn covariance_sandwich(c: &RandomCase) -> Check {
        let sigma2 = 1.7;
        let var_b = covariance_of_solution(&c.sys, sigma2).map_err(|e| e.to_string())?.var_b;

        let n = c.y.len();
        let k = c.sys.psi.ncols();
        let mut l = DMatrix::zeros(k, n);
        for i in 0..n {
            let e = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
            let fit = solve(&c.sys, &e).map_err(|e| e.to_string())?;
            l.set_column(i, &fit.b);
        }
        let by_map = &l * l.transpose() * sigma2;

        let g = c.sys.partitioned_ginverse();
        let m = c.sys.psi.transpose() * &c.sys.psi;
        let sandwich = &g * m * g.transpose() * sigma2;

        let scale = sandwich.amax().max(1.0);
        within("covariance vs sandwich", max_abs_diff(&var_b, &sandwich), 0.0, 1e-8 * scale)?;
        within("covariance vs linear map", max_abs_diff(&var_b, &by_map), 0.0, 1e-8 * scale)
    }

    pub fn all(c: &RandomCase) -> Vec<(&'static str, Check)> {
        vec![
            ("projector identity", projector_identity(c)),
            ("sum of squares chains", ss_chains(c)),
            ("g-inverse route invariance", route_invariance(c)),
            ("z = 1 reduces to OLS", reduces_to_ols(c)),
            ("covariance sandwich", covariance_sandwich(c)),
        ]
    }

    /// Both flow-factor branches meet at their switch points.
    pub fn gauge_continuity() -> Check {
        for gamma in [1.1, 1.3, 1.4, 1.67] {
            let rc = critical_ratio(gamma);
            let choked = (gamma / (gamma + 1.0) * (2.0 / (gamma + 1.0)).powf(2.0 / (gamma - 1.0))).sqrt();
            let at = flow_factor_adiabatic(rc, gamma).map_err(|e| e.to_string())?;
            within(&format!("adiabatic at critical ratio, gamma {gamma}"), at, choked, 1e-9)?;
            let below = flow_factor_adiabatic(rc * (1.0 - 1e-12), gamma).map_err(|e| e.to_string())?;
            within(&format!("adiabatic across critical ratio, gamma {gamma}"), below, at, 1e-9)?;
        }
        for p_up in [150.0, 200.0, 300.0] {
            let at = flow_factor_isochoric(p_up, 0.5 * p_up).map_err(|e| e.to_string())?;
            within("isochoric at half ratio", at, p_up / 2.0, 1e-9 * p_up)?;
            let below = flow_factor_isochoric(p_up, 0.5 * p_up * (1.0 - 1e-13)).map_err(|e| e.to_string())?;
            let above = flow_factor_isochoric(p_up, 0.5 * p_up * (1.0 + 1e-13)).map_err(|e| e.to_string())?;
            within("isochoric across half ratio", below, above, 1e-9 * p_up)?;
        }
        Ok(())
    }

    /// Back-pressure falls with sensor area and rises with supply pressure on
    /// a 10×10 grid, for both models and a few orifice sizes.
    pub fn gauge_monotone_grid() -> Check {
        let k = GaugeConstants::default();
        let areas: Vec<f64> = (0..10).map(|i| 0.2 + 0.12 * i as f64).collect();
        let supplies: Vec<f64> = (0..10).map(|i| 0.15 + 0.02 * i as f64).collect();
        for model in [GaugeModel::Adiabatic, GaugeModel::Isochoric] {
            for b in [0.5, 0.8, 1.2] {
                let mut grid = [[0.0; 10]; 10];
                for (i, &a) in areas.iter().enumerate() {
                    for (j, &ps) in supplies.iter().enumerate() {
                        let inp = GaugeInputs {
                            area_sensor: a,
                            pressure_supply: ps,
                            area_orifice: b,
                        };
                        grid[i][j] = solve_backpressure(model, &inp, &k).map_err(|e| e.to_string())?;
                    }
                }
                for i in 0..10 {
                    for j in 0..10 {
                        if i > 0 && !(grid[i][j] < grid[i - 1][j]) {
                            return Err(format!("{} not decreasing in A at B {b}, row {i}, col {j}", model.name()));
                        }
                        if j > 0 && !(grid[i][j] > grid[i][j - 1]) {
                            return Err(format!("{} not increasing in P_s at B {b}, row {i}, col {j}", model.name()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
