//! Static latent-variable estimation: Bayes estimate of the factor from one
//! cross-sectional observation, its error covariance, and the rank-n residual
//! phenomenon that survives even when the per-entry residual vanishes.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{lambda_max_sym, psd_geq, spectral_norm_sym, sym_eigenvalues, symmetrize};
use crate::model::{LoadingGenerator, NoiseModel};
use crate::scalar::{to_f64, tol_floor, Scalar};

/// Static model `y = C x + w` with `Cov(x) = I` (normalized factors) and
/// positive definite noise covariance.
#[derive(Debug, Clone)]
pub struct StaticModel<T: Scalar> {
    c: DMatrix<T>,
    noise_cov: DMatrix<T>,
}

impl<T: Scalar> StaticModel<T> {
    /// `n_outputs = 0` is allowed: with no data the Bayes answer is the prior.
    pub fn new(c: DMatrix<T>, noise_cov: DMatrix<T>) -> Result<Self> {
        if noise_cov.nrows() != c.nrows() || noise_cov.ncols() != c.nrows() {
            return Err(Error::InvalidDimension(format!(
                "noise covariance must be {n}x{n}, got {}x{}",
                noise_cov.nrows(),
                noise_cov.ncols(),
                n = c.nrows()
            )));
        }
        let noise_cov = symmetrize(&noise_cov);
        if c.nrows() > 0 && Cholesky::new(noise_cov.clone()).is_none() {
            return Err(Error::NotPd(
                "static noise covariance failed Cholesky".into(),
            ));
        }
        Ok(StaticModel { c, noise_cov })
    }

    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn noise_cov(&self) -> &DMatrix<T> {
        &self.noise_cov
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.c.ncols()
    }

    /// Covariance of the observation vector: `C C^T + noise`.
    pub fn output_covariance(&self) -> DMatrix<T> {
        symmetrize(&(&self.c * self.c.transpose() + &self.noise_cov))
    }

    /// Covariance of the innovation `e = y - C xhat`, equal to
    /// `noise - C err_cov C^T`.
    pub fn innovation_covariance(&self) -> Result<DMatrix<T>> {
        let delta = static_delta_covariance(self)?;
        Ok(symmetrize(&(&self.noise_cov - delta)))
    }
}

/// Bayes estimate of the factor plus the derived covariances.
#[derive(Debug, Clone)]
pub struct StaticEstimate<T: Scalar> {
    /// Posterior mean of the factor.
    pub estimate: DVector<T>,
    /// Estimation-error covariance `(I + C^T S^-1 C)^-1`.
    pub error_covariance: DMatrix<T>,
    /// Covariance of `e - w = C (x - xhat)`; rank at most `n`.
    pub delta_covariance: DMatrix<T>,
    /// Innovation `y - C xhat`.
    pub innovation: DVector<T>,
}

/// Error covariance in information form, `(I + C^T S^-1 C)^-1`.
fn information_error_covariance<T: Scalar>(model: &StaticModel<T>) -> Result<DMatrix<T>> {
    let n = model.n_factors();
    if model.n_outputs() == 0 {
        // no data: prior covariance
        return Ok(DMatrix::identity(n, n));
    }
    let chol = Cholesky::new(model.noise_cov.clone())
        .ok_or_else(|| Error::NotPd("static noise covariance failed Cholesky".into()))?;
    let sinv_c = chol.solve(&model.c);
    let info = symmetrize(&(DMatrix::identity(n, n) + model.c.transpose() * sinv_c));
    let info_chol = Cholesky::new(info)
        .ok_or_else(|| Error::NotPd("information matrix failed Cholesky".into()))?;
    Ok(symmetrize(&info_chol.inverse()))
}

/// Linear Bayes estimate of the factor from one observation.
///
/// Computed in information form; for `N <= 512` the covariance form
/// `C^T (C C^T + S)^-1 y` is recomputed and the two are asserted to agree to
/// `1e-8` relative, a per-call check of the projection algebra.
pub fn bayes_estimate<T: Scalar>(
    model: &StaticModel<T>,
    y: &DVector<T>,
) -> Result<StaticEstimate<T>> {
    if y.len() != model.n_outputs() {
        return Err(Error::InvalidDimension(format!(
            "observation has length {}, model expects {}",
            y.len(),
            model.n_outputs()
        )));
    }
    let err_cov = information_error_covariance(model)?;
    let estimate = if model.n_outputs() == 0 {
        DVector::zeros(model.n_factors())
    } else {
        let chol = Cholesky::new(model.noise_cov.clone())
            .ok_or_else(|| Error::NotPd("static noise covariance failed Cholesky".into()))?;
        let sinv_y = chol.solve(y);
        let xhat = &err_cov * (model.c.transpose() * sinv_y);

        if model.n_outputs() <= 512 {
            let big = model.output_covariance();
            let big_chol = Cholesky::new(big)
                .ok_or_else(|| Error::NotPd("output covariance failed Cholesky".into()))?;
            let xhat_cov_form = model.c.transpose() * big_chol.solve(y);
            let diff = to_f64((&xhat - &xhat_cov_form).norm());
            let scale = 1.0 + to_f64(xhat.norm());
            assert!(
                diff <= tol_floor::<T>(1e-8, 1e3) * scale,
                "information and covariance forms disagree: {diff:.3e} vs scale {scale:.3e}"
            );
        }
        xhat
    };
    let innovation = y - &model.c * &estimate;
    let delta_covariance = symmetrize(&(&model.c * &err_cov * model.c.transpose()));
    Ok(StaticEstimate {
        estimate,
        error_covariance: err_cov,
        delta_covariance,
        innovation,
    })
}

/// `(I + C^T S^-1 C)^-1`, additionally verifying the PSD-order bound
/// `err_cov <= lambda_max(S) * (C^T C)^-1` whenever `C^T C` is invertible.
pub fn static_error_covariance<T: Scalar>(model: &StaticModel<T>) -> Result<DMatrix<T>> {
    let err_cov = information_error_covariance(model)?;
    if model.n_outputs() > 0 {
        let gram = symmetrize(&(model.c.transpose() * &model.c));
        if let Some(gram_chol) = Cholesky::new(gram) {
            let alpha = lambda_max_sym(&model.noise_cov);
            let bound = gram_chol.inverse().scale(alpha);
            assert!(
                psd_geq(&bound, &err_cov, tol_floor::<T>(1e-8, 1e2)),
                "error covariance exceeds the alpha (C^T C)^-1 bound"
            );
        }
    }
    Ok(err_cov)
}

/// Covariance of `e - w`: `C err_cov C^T`, a matrix of rank at most `n`.
pub fn static_delta_covariance<T: Scalar>(model: &StaticModel<T>) -> Result<DMatrix<T>> {
    let err_cov = information_error_covariance(model)?;
    Ok(symmetrize(&(&model.c * err_cov * model.c.transpose())))
}

/// One row of a static sweep over growing output dimension.
#[derive(Debug, Clone, Copy)]
pub struct StaticSweepRow<T: Scalar> {
    pub n_outputs: usize,
    /// `||err_cov||_2`.
    pub err_cov_norm: T,
    /// Largest diagonal entry of the delta covariance.
    pub delta_max_diag: T,
    /// Largest eigenvalue of the delta covariance.
    pub delta_lambda_max: T,
}

/// Sweep the static estimator over a nested family of models.
pub fn static_sweep<T: Scalar>(
    loadings: &LoadingGenerator,
    noise: &NoiseModel,
    n_list: &[usize],
) -> Result<Vec<StaticSweepRow<T>>> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let model = StaticModel::new(loadings.matrix::<T>(n), noise.covariance::<T>(n))?;
        let err_cov = static_error_covariance(&model)?;
        let delta = static_delta_covariance(&model)?;
        let max_diag = (0..delta.nrows())
            .map(|i| delta[(i, i)])
            .fold(T::zero(), |a, b| a.max(b));
        let ev = sym_eigenvalues(&delta);
        rows.push(StaticSweepRow {
            n_outputs: n,
            err_cov_norm: spectral_norm_sym(&err_cov),
            delta_max_diag: max_diag,
            delta_lambda_max: if ev.is_empty() {
                T::zero()
            } else {
                ev[ev.len() - 1]
            },
        });
    }
    Ok(rows)
}
