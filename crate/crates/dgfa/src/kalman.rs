//! Steady-state Kalman synthesis for truncated models: the one-step predictor
//! (Riccati solution, innovation covariance, gain) and the pure filter
//! (information-form error covariance, filter gain, filtered innovation
//! covariance), plus the sweep tables that track both as the output dimension
//! grows. The predictor innovation covariance picks up an unbounded rank-n
//! component along the sweep while the filter error covariance vanishes; the
//! tables expose exactly the quantities that certify this contrast.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_or_err, lambda_max_sym, numerical_rank, psd_geq, solve_dare_with, solve_stein_with,
    spectral_norm_sym, spectral_radius, sym_eigenvalues, symmetrize, Tolerances,
};
use crate::model::{truncate, FactorDynamics, LoadingGenerator, NoiseModel, TruncatedModel};
use crate::scalar::{to_f64, tol_floor, Scalar};

/// Steady-state one-step predictor quantities.
///
/// Invariants checked at synthesis: the Riccati residual is within tolerance,
/// `P >= Q` in PSD order, `K Lambda K^T = A P A^T - P + Q` to `1e-9` relative,
/// and the closed loop `A - K C` is stable.
#[derive(Debug, Clone)]
pub struct PredictorSolution<T: Scalar> {
    p: DMatrix<T>,
    lambda: DMatrix<T>,
    gain: DMatrix<T>,
    q_tilde: DMatrix<T>,
}

impl<T: Scalar> PredictorSolution<T> {
    /// One-step prediction error covariance `P`.
    pub fn p(&self) -> &DMatrix<T> {
        &self.p
    }

    /// Innovation covariance `Lambda = C P C^T + R`.
    pub fn lambda(&self) -> &DMatrix<T> {
        &self.lambda
    }

    /// Kalman gain `K = A P C^T Lambda^-1`.
    pub fn gain(&self) -> &DMatrix<T> {
        &self.gain
    }

    /// Model-noise covariance of the innovation representation,
    /// `K Lambda K^T = A P A^T - P + Q`.
    pub fn q_tilde(&self) -> &DMatrix<T> {
        &self.q_tilde
    }
}

/// Steady-state pure-filter quantities.
///
/// Invariants checked at synthesis: `Pi = (P^-1 + C^T R^-1 C)^-1`,
/// `Lambda_hat = R Lambda^-1 R = (I - C L) Lambda (I - C L)^T`, `Pi <= P`,
/// and `Lambda_hat <= R` in PSD order.
#[derive(Debug, Clone)]
pub struct FilterSolution<T: Scalar> {
    pi: DMatrix<T>,
    gain: DMatrix<T>,
    lambda_hat: DMatrix<T>,
}

impl<T: Scalar> FilterSolution<T> {
    /// Filtered-state error covariance `Pi`.
    pub fn pi(&self) -> &DMatrix<T> {
        &self.pi
    }

    /// Filter gain `L = P C^T Lambda^-1`.
    pub fn gain(&self) -> &DMatrix<T> {
        &self.gain
    }

    /// Filtered innovation covariance `Lambda_hat`.
    pub fn lambda_hat(&self) -> &DMatrix<T> {
        &self.lambda_hat
    }
}

fn rel_sym_gap<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> f64 {
    let gap = to_f64(spectral_norm_sym(&symmetrize(&(x - y))));
    gap / (1.0 + to_f64(spectral_norm_sym(x)))
}

/// Cheap structural admission check for estimation: stability and PD of `R`
/// are enforced by the model type; here the loading matrix must have full
/// column rank so every factor is actually observed.
fn check_model_for_estimation<T: Scalar>(tm: &TruncatedModel<T>) -> Result<()> {
    let rank = numerical_rank(tm.c(), 1e-8);
    if rank < tm.n_factors() {
        return Err(Error::InvalidModel(format!(
            "loading matrix has numerical rank {rank} < {} factors",
            tm.n_factors()
        )));
    }
    Ok(())
}

/// Synthesize the steady-state predictor with default tolerances for the
/// working scalar.
pub fn predictor_solution<T: Scalar>(tm: &TruncatedModel<T>) -> Result<PredictorSolution<T>> {
    predictor_solution_with(tm, &Tolerances::for_scalar::<T>())
}

pub fn predictor_solution_with<T: Scalar>(
    tm: &TruncatedModel<T>,
    tol: &Tolerances,
) -> Result<PredictorSolution<T>> {
    check_model_for_estimation(tm)?;
    let a = tm.dynamics().a();
    let q = tm.dynamics().q();
    let c = tm.c();
    let r = tm.r();

    let p = solve_dare_with(a, c, q, r, tol)?;
    let lambda = symmetrize(&(c * &p * c.transpose() + r));
    let lam_chol = Cholesky::new(lambda.clone())
        .ok_or_else(|| Error::SingularInnovation("C P C^T + R failed Cholesky".into()))?;
    // K = A P C^T Lambda^-1, built from the triangular solve of Lambda.
    let gain = lam_chol.solve(&(c * &p * a.transpose())).transpose();
    let q_tilde = symmetrize(&(&gain * &lambda * gain.transpose()));

    if !psd_geq(&p, q, tol_floor::<T>(1e-8, 1e2)) {
        return Err(Error::NonConvergence(
            "predictor covariance fails P >= Q".into(),
        ));
    }
    let ident = symmetrize(&(a * &p * a.transpose() - &p + q));
    let gap = rel_sym_gap(&q_tilde, &ident);
    if gap > tol_floor::<T>(1e-9, 1e2) {
        return Err(Error::NonConvergence(format!(
            "model-noise identity K Lambda K^T = A P A^T - P + Q off by {gap:.3e}"
        )));
    }
    let rho_cl = to_f64(spectral_radius(&(a - &gain * c))?);
    if rho_cl >= 1.0 {
        return Err(Error::NonConvergence(format!(
            "closed loop not stable (spectral radius {rho_cl})"
        )));
    }
    Ok(PredictorSolution {
        p,
        lambda,
        gain,
        q_tilde,
    })
}

/// Synthesize the steady-state pure filter from a predictor solution.
pub fn filter_solution<T: Scalar>(
    tm: &TruncatedModel<T>,
    pred: &PredictorSolution<T>,
) -> Result<FilterSolution<T>> {
    let c = tm.c();
    let r = tm.r();
    let n_out = tm.n_outputs();
    if pred.p().nrows() != tm.n_factors() || pred.lambda().nrows() != n_out {
        return Err(Error::InvalidDimension(
            "predictor solution does not match the model dimensions".into(),
        ));
    }

    // Information form: Pi = (P^-1 + C^T R^-1 C)^-1, all n-by-n after the
    // Cholesky of R.
    let p_chol = Cholesky::new(pred.p().clone())
        .ok_or_else(|| Error::NotPd("prediction covariance P is singular".into()))?;
    let r_chol = cholesky_or_err(r.clone(), "R")?;
    let info = symmetrize(&(p_chol.inverse() + c.transpose() * r_chol.solve(c)));
    let pi = symmetrize(&cholesky_or_err(info, "Pi information matrix")?.inverse());

    let lam_chol = Cholesky::new(pred.lambda().clone())
        .ok_or_else(|| Error::SingularInnovation("Lambda failed Cholesky".into()))?;
    // L = P C^T Lambda^-1
    let gain = lam_chol.solve(&(c * pred.p())).transpose();
    // Lambda_hat = R Lambda^-1 R
    let lambda_hat = symmetrize(&(r * lam_chol.solve(r)));

    if !psd_geq(pred.p(), &pi, tol_floor::<T>(1e-8, 1e2)) {
        return Err(Error::NonConvergence(
            "filter covariance fails Pi <= P".into(),
        ));
    }
    if !psd_geq(r, &lambda_hat, tol_floor::<T>(1e-8, 1e2)) {
        return Err(Error::NonConvergence(
            "filtered innovation fails Lambda_hat <= R".into(),
        ));
    }
    // I - C L = R Lambda^-1, the transform between the two innovations.
    let i_cl = DMatrix::identity(n_out, n_out) - c * &gain;
    let r_lam_inv = lam_chol.solve(r).transpose();
    let gap = to_f64((&i_cl - &r_lam_inv).norm()) / (1.0 + to_f64(i_cl.norm()));
    if gap > tol_floor::<T>(1e-9, 1e2) {
        return Err(Error::NonConvergence(format!(
            "transform identity I - C L = R Lambda^-1 off by {gap:.3e}"
        )));
    }
    let alt = symmetrize(&(&i_cl * pred.lambda() * i_cl.transpose()));
    let gap_alt = rel_sym_gap(&lambda_hat, &alt);
    if gap_alt > tol_floor::<T>(1e-9, 1e2) {
        return Err(Error::NonConvergence(format!(
            "filtered innovation identity off by {gap_alt:.3e}"
        )));
    }
    Ok(FilterSolution {
        pi,
        gain,
        lambda_hat,
    })
}

/// Direction of the innovation transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformDirection {
    /// `e = (I - C L)^-1 e_hat`.
    FilterToPredictor,
    /// `e_hat = (I - C L) e`.
    PredictorToFilter,
}

/// Map between predictor and filter innovations through `I - C L`.
pub fn innovation_transform<T: Scalar>(
    c: &DMatrix<T>,
    l: &DMatrix<T>,
    vec: &DVector<T>,
    direction: TransformDirection,
) -> Result<DVector<T>> {
    let n_out = c.nrows();
    if l.nrows() != c.ncols() || l.ncols() != n_out || vec.len() != n_out {
        return Err(Error::InvalidDimension(format!(
            "transform shapes: C {}x{}, L {}x{}, vec {}",
            c.nrows(),
            c.ncols(),
            l.nrows(),
            l.ncols(),
            vec.len()
        )));
    }
    let i_cl = DMatrix::identity(n_out, n_out) - c * l;
    match direction {
        TransformDirection::PredictorToFilter => Ok(&i_cl * vec),
        TransformDirection::FilterToPredictor => i_cl
            .lu()
            .solve(vec)
            .ok_or_else(|| Error::SingularTransform("I - C L is not invertible".into())),
    }
}

/// One row of the predictor sweep.
#[derive(Debug, Clone)]
pub struct PredictorSweepRow<T: Scalar> {
    pub n_outputs: usize,
    /// `||P_N - Q||_2`: vanishes along the sweep.
    pub p_minus_q_norm: T,
    /// `lambda_max(C_N P_N C_N^T)`: grows without bound.
    pub lambda_max_cpct: T,
    /// Top `n` eigenvalues of `C_N P_N C_N^T`, largest first, so the number of
    /// diverging directions can be inspected.
    pub cpct_top_eigenvalues: Vec<T>,
    /// `||K Lambda K^T - A Q A^T||_2`: the model-noise covariance limit.
    pub q_tilde_gap_norm: T,
    /// Gap between the predictor state covariance and its limit,
    /// both as Stein solutions.
    pub state_cov_gap_norm: T,
}

/// One row of the filter sweep.
#[derive(Debug, Clone, Copy)]
pub struct FilterSweepRow<T: Scalar> {
    pub n_outputs: usize,
    /// `||Pi_N||_2`: vanishes along the sweep.
    pub pi_norm: T,
    /// `tr(Pi_N)`.
    pub pi_trace: T,
    /// `||Lambda_hat_N||_2`: stays bounded by `||R_N||_2`.
    pub lambda_hat_norm: T,
    /// `sqrt(tr(C Pi C^T))`: mean-square size of the filtered residual gap.
    pub delta_hat_euclid: T,
    /// `max_i sqrt([C Pi C^T]_ii)`: its worst single component.
    pub delta_hat_inf: T,
}

fn check_sweep_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::InvalidDimension(
            "sweep dimension list must be non-empty".into(),
        ));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidDimension(
            "sweep dimension list must be strictly increasing and positive".into(),
        ));
    }
    Ok(())
}

/// Largest eigenvalue of `C P C^T`, the certificate that the predictor
/// innovation covariance grows without bound along a sweep.
pub fn lambda_max_cpct<T: Scalar>(c: &DMatrix<T>, p: &DMatrix<T>) -> T {
    cpct_spectrum(c, p).0
}

/// `lambda_max` and the top-n eigenvalues of `C P C^T` without forming the
/// N-by-N product: the nonzero spectrum equals that of `F^T C^T C F` where
/// `P = F F^T`.
fn cpct_spectrum<T: Scalar>(c: &DMatrix<T>, p: &DMatrix<T>) -> (T, Vec<T>) {
    let eig = SymmetricEigen::new(symmetrize(p));
    let n = p.nrows();
    let mut f = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        let s = eig.eigenvalues[i].max(T::zero()).sqrt();
        f.set_column(i, &(eig.eigenvectors.column(i) * s));
    }
    let cf = c * f;
    let small = cf.transpose() * &cf;
    let ev = sym_eigenvalues(&small);
    let mut top: Vec<T> = ev.iter().copied().collect();
    top.reverse();
    let lam_max = top.first().copied().unwrap_or_else(T::zero).max(T::zero());
    (lam_max, top)
}

/// Sweep the predictor over a nested family: per dimension, the distance of
/// `P_N` to its limit `Q`, the growing innovation component, and the
/// convergence of the model-noise covariance and predictor state covariance.
pub fn predictor_asymptotics<T: Scalar>(
    dynamics: &FactorDynamics<T>,
    loadings: &LoadingGenerator,
    noise: &NoiseModel,
    n_list: &[usize],
    tol: &Tolerances,
) -> Result<Vec<PredictorSweepRow<T>>> {
    check_sweep_list(n_list)?;
    let a = dynamics.a();
    let q = dynamics.q();
    let aqat = symmetrize(&(a * q * a.transpose()));
    let sigma_limit = solve_stein_with(a, &aqat, tol)?;

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let tm = truncate(dynamics, loadings, noise, n)?;
        let pred = predictor_solution_with(&tm, tol)?;
        let (lam_max, top) = cpct_spectrum(tm.c(), pred.p());
        let sigma_pred = solve_stein_with(a, pred.q_tilde(), tol)?;
        rows.push(PredictorSweepRow {
            n_outputs: n,
            p_minus_q_norm: spectral_norm_sym(&(pred.p() - q)),
            lambda_max_cpct: lam_max,
            cpct_top_eigenvalues: top.into_iter().take(dynamics.n_factors()).collect(),
            q_tilde_gap_norm: spectral_norm_sym(&(pred.q_tilde() - &aqat)),
            state_cov_gap_norm: spectral_norm_sym(&(&sigma_pred - &sigma_limit)),
        });
    }
    Ok(rows)
}

/// Sweep the pure filter over a nested family: per dimension, the vanishing
/// error covariance, the bounded filtered innovation covariance, and both
/// norms of the filtered residual gap.
pub fn filter_asymptotics<T: Scalar>(
    dynamics: &FactorDynamics<T>,
    loadings: &LoadingGenerator,
    noise: &NoiseModel,
    n_list: &[usize],
    tol: &Tolerances,
) -> Result<Vec<FilterSweepRow<T>>> {
    check_sweep_list(n_list)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let tm = truncate(dynamics, loadings, noise, n)?;
        let pred = predictor_solution_with(&tm, tol)?;
        let filt = filter_solution(&tm, &pred)?;
        rows.push(filter_sweep_row(&tm, &filt));
    }
    Ok(rows)
}

/// Assemble the filter sweep quantities for one solved model.
pub fn filter_sweep_row<T: Scalar>(
    tm: &TruncatedModel<T>,
    filt: &FilterSolution<T>,
) -> FilterSweepRow<T> {
    let c = tm.c();
    let pi = filt.pi();
    // Diagonal of C Pi C^T without the N-by-N product.
    let cpi = c * pi;
    let mut trace = T::zero();
    let mut max_diag = T::zero();
    for i in 0..c.nrows() {
        let d = cpi.row(i).dot(&c.row(i));
        trace += d;
        max_diag = max_diag.max(d);
    }
    FilterSweepRow {
        n_outputs: tm.n_outputs(),
        pi_norm: spectral_norm_sym(pi),
        pi_trace: pi.trace(),
        lambda_hat_norm: lambda_max_sym(filt.lambda_hat()),
        delta_hat_euclid: trace.max(T::zero()).sqrt(),
        delta_hat_inf: max_diag.max(T::zero()).sqrt(),
    }
}
