//! Seeded Monte Carlo simulation of truncated models and time-domain
//! execution of the predictor/filter recursions.
//!
//! Reproducibility: the generator is ChaCha8 seeded with the 64-bit seed, and
//! Gaussians come from a Box-Muller transform of 53-bit uniforms drawn in
//! `f64`, so identical `(model, length, seed, init)` inputs give bit-identical
//! trajectories for a given scalar type.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kalman::{FilterSolution, PredictorSolution};
use crate::linalg::symmetrize;
use crate::model::TruncatedModel;
use crate::scalar::{real, to_f64, Scalar};

/// Simulated sample path of a truncated model.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Scalar> {
    /// States `x(t)`, length `T`.
    pub states: Vec<DVector<T>>,
    /// Outputs `y(t) = C x(t) + w(t)`.
    pub outputs: Vec<DVector<T>>,
    /// State noise `v(t)` driving `x(t+1) = A x(t) + v(t)`.
    pub state_noise: Vec<DVector<T>>,
    /// Output noise `w(t)`.
    pub output_noise: Vec<DVector<T>>,
    /// Common component `C x(t)`.
    pub common_component: Vec<DVector<T>>,
    pub seed: u64,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Estimator outputs along a trajectory.
#[derive(Debug, Clone)]
pub struct EstimateSeries<T: Scalar> {
    /// Per step: `xhat(t|t-1)` in predictor mode, `xhat(t|t)` in filter mode.
    pub estimates: Vec<DVector<T>>,
    /// Per step: `y(t) - C * estimate(t)` for the mode's estimate.
    pub innovations: Vec<DVector<T>>,
    /// Filter mode only: `innovation(t) - w(t)`.
    pub residual_delta: Option<Vec<DVector<T>>>,
    pub mode: EstimateMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    Predictor,
    Filter,
}

/// Initial-state convention for simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// Draw `x(0)` from the stationary law with covariance `Sigma`.
    Stationary,
    /// Start at `x(0) = 0`; pair with a burn-in when estimating steady-state
    /// statistics.
    Zero,
}

/// One uniform draw in `(0, 1]` and one in `[0, 1)`, both with 53 bits.
fn box_muller(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let scale = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * scale;
    let u2 = (rng.next_u64() >> 11) as f64 * scale;
    let radius = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (radius * theta.cos(), radius * theta.sin())
}

/// Standard normal vector; odd lengths discard the trailing pair member.
fn standard_normal_vector<T: Scalar>(rng: &mut ChaCha8Rng, len: usize) -> DVector<T> {
    let mut out = DVector::zeros(len);
    let mut i = 0;
    while i < len {
        let (z0, z1) = box_muller(rng);
        out[i] = real(z0);
        i += 1;
        if i < len {
            out[i] = real(z1);
            i += 1;
        }
    }
    out
}

/// Factor a covariance for sampling: Cholesky first, escalating diagonal
/// jitter up to `1e-10` for near-singular positive definite inputs, then an
/// eigenvalue factor for genuinely PSD-singular covariances (e.g. `Q = 0`).
pub(crate) fn covariance_factor<T: Scalar>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let sym = symmetrize(m);
    if sym.iter().all(|x| x.is_zero()) {
        return Ok(sym);
    }
    if let Some(chol) = Cholesky::new(sym.clone()) {
        return Ok(chol.l());
    }
    for jitter in [1e-14, 1e-12, 1e-10] {
        let jittered = &sym + DMatrix::identity(sym.nrows(), sym.ncols()).scale(real(jitter));
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(chol.l());
        }
    }
    let eig = SymmetricEigen::new(sym);
    let lam_max = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &l| m.max(to_f64(l)));
    let lam_min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &l| m.min(to_f64(l)));
    if lam_min < -1e-8 * (1.0 + lam_max) {
        return Err(Error::NotPd(format!(
            "covariance has eigenvalue {lam_min:.3e}, cannot factor for sampling"
        )));
    }
    let n = eig.eigenvalues.len();
    let mut f = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        let s = eig.eigenvalues[i].max(T::zero()).sqrt();
        f.set_column(i, &(eig.eigenvectors.column(i) * s));
    }
    Ok(f)
}

/// Simulate `steps` time points with a stationary initial state.
pub fn simulate<T: Scalar>(
    tm: &TruncatedModel<T>,
    steps: usize,
    seed: u64,
) -> Result<Trajectory<T>> {
    simulate_with(tm, steps, seed, InitialState::Stationary)
}

/// Simulate with an explicit initial-state convention.
///
/// Draw order per step: output noise `w(t)`, then state noise `v(t)`; a
/// stationary start draws `x(0)` first.
pub fn simulate_with<T: Scalar>(
    tm: &TruncatedModel<T>,
    steps: usize,
    seed: u64,
    init: InitialState,
) -> Result<Trajectory<T>> {
    if steps == 0 {
        return Err(Error::InvalidDimension(
            "simulation length must be at least 1".into(),
        ));
    }
    let a = tm.dynamics().a();
    let c = tm.c();
    let n = tm.n_factors();
    let n_out = tm.n_outputs();

    let sigma_factor = covariance_factor(tm.dynamics().sigma())?;
    let q_factor = covariance_factor(tm.dynamics().q())?;
    let r_factor = covariance_factor(tm.r())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = match init {
        InitialState::Stationary => &sigma_factor * standard_normal_vector::<T>(&mut rng, n),
        InitialState::Zero => DVector::zeros(n),
    };

    let mut states = Vec::with_capacity(steps);
    let mut outputs = Vec::with_capacity(steps);
    let mut state_noise = Vec::with_capacity(steps);
    let mut output_noise = Vec::with_capacity(steps);
    let mut common_component = Vec::with_capacity(steps);

    for _ in 0..steps {
        let w = &r_factor * standard_normal_vector::<T>(&mut rng, n_out);
        let chi = c * &x;
        let y = &chi + &w;
        let v = &q_factor * standard_normal_vector::<T>(&mut rng, n);
        states.push(x.clone());
        outputs.push(y);
        output_noise.push(w);
        common_component.push(chi);
        state_noise.push(v.clone());
        x = a * &x + v;
    }

    Ok(Trajectory {
        states,
        outputs,
        state_noise,
        output_noise,
        common_component,
        seed,
    })
}

/// Run the steady-state one-step predictor over a trajectory from
/// `xhat(0|-1) = 0`; estimates are the one-step predictions.
pub fn run_predictor<T: Scalar>(
    tm: &TruncatedModel<T>,
    pred: &PredictorSolution<T>,
    traj: &Trajectory<T>,
) -> Result<EstimateSeries<T>> {
    let c = tm.c();
    let a = tm.dynamics().a();
    let k = pred.gain();
    if k.nrows() != tm.n_factors() || k.ncols() != tm.n_outputs() {
        return Err(Error::InvalidDimension(
            "gain does not match model dimensions".into(),
        ));
    }
    if traj.outputs.first().map(|y| y.len()) != Some(tm.n_outputs()) {
        return Err(Error::InvalidDimension(
            "trajectory does not match model dimensions".into(),
        ));
    }

    let mut xhat = DVector::<T>::zeros(tm.n_factors());
    let mut estimates = Vec::with_capacity(traj.len());
    let mut innovations = Vec::with_capacity(traj.len());
    for y in &traj.outputs {
        let innovation = y - c * &xhat;
        estimates.push(xhat.clone());
        xhat = a * &xhat + k * &innovation;
        innovations.push(innovation);
    }
    Ok(EstimateSeries {
        estimates,
        innovations,
        residual_delta: None,
        mode: EstimateMode::Predictor,
    })
}

/// Run the steady-state pure filter over a trajectory; estimates are the
/// filtered states `xhat(t|t)` and `residual_delta` records
/// `innovation(t) - w(t)`.
pub fn run_filter<T: Scalar>(
    tm: &TruncatedModel<T>,
    pred: &PredictorSolution<T>,
    filt: &FilterSolution<T>,
    traj: &Trajectory<T>,
) -> Result<EstimateSeries<T>> {
    let c = tm.c();
    let a = tm.dynamics().a();
    let l = filt.gain();
    if pred.gain().shape() != l.shape() {
        return Err(Error::InvalidDimension(
            "filter gain does not match predictor gain".into(),
        ));
    }
    if l.nrows() != tm.n_factors() || l.ncols() != tm.n_outputs() {
        return Err(Error::InvalidDimension(
            "gain does not match model dimensions".into(),
        ));
    }
    if traj.outputs.first().map(|y| y.len()) != Some(tm.n_outputs()) {
        return Err(Error::InvalidDimension(
            "trajectory does not match model dimensions".into(),
        ));
    }

    let mut x_pred = DVector::<T>::zeros(tm.n_factors());
    let mut estimates = Vec::with_capacity(traj.len());
    let mut innovations = Vec::with_capacity(traj.len());
    let mut deltas = Vec::with_capacity(traj.len());
    for (y, w) in traj.outputs.iter().zip(&traj.output_noise) {
        let pred_innovation = y - c * &x_pred;
        let x_filt = &x_pred + l * &pred_innovation;
        let innovation = y - c * &x_filt;
        deltas.push(&innovation - w);
        innovations.push(innovation);
        x_pred = a * &x_filt;
        estimates.push(x_filt);
    }
    Ok(EstimateSeries {
        estimates,
        innovations,
        residual_delta: Some(deltas),
        mode: EstimateMode::Filter,
    })
}

fn post_burn_in<T: Scalar>(
    samples: &[DVector<T>],
    burn_in: usize,
    need: usize,
) -> Result<&[DVector<T>]> {
    if samples.len() < burn_in + need {
        return Err(Error::InsufficientSamples(format!(
            "{} samples with burn-in {burn_in}, need at least {need} after burn-in",
            samples.len()
        )));
    }
    Ok(&samples[burn_in..])
}

fn mean<T: Scalar>(samples: &[DVector<T>]) -> DVector<T> {
    let mut acc = DVector::zeros(samples[0].len());
    for s in samples {
        acc += s;
    }
    acc.unscale(real(samples.len() as f64))
}

/// Sample covariance over the post-burn-in rows (divisor `M - 1`).
pub fn empirical_covariance<T: Scalar>(
    samples: &[DVector<T>],
    burn_in: usize,
) -> Result<DMatrix<T>> {
    let rows = post_burn_in(samples, burn_in, 2)?;
    let mu = mean(rows);
    let dim = mu.len();
    let mut acc = DMatrix::<T>::zeros(dim, dim);
    for s in rows {
        let d = s - &mu;
        acc.ger(T::one(), &d, &d, T::one());
    }
    Ok(acc.unscale(real((rows.len() - 1) as f64)))
}

/// Sample cross-covariance `E[(a - mean_a)(b - mean_b)^T]` (divisor `M - 1`).
pub fn empirical_cross_covariance<T: Scalar>(
    a: &[DVector<T>],
    b: &[DVector<T>],
    burn_in: usize,
) -> Result<DMatrix<T>> {
    if a.len() != b.len() {
        return Err(Error::InvalidDimension(
            "sample series must have equal length".into(),
        ));
    }
    let ra = post_burn_in(a, burn_in, 2)?;
    let rb = post_burn_in(b, burn_in, 2)?;
    let mu_a = mean(ra);
    let mu_b = mean(rb);
    let mut acc = DMatrix::<T>::zeros(mu_a.len(), mu_b.len());
    for (x, y) in ra.iter().zip(rb) {
        acc.ger(T::one(), &(x - &mu_a), &(y - &mu_b), T::one());
    }
    Ok(acc.unscale(real((ra.len() - 1) as f64)))
}

/// Lag-1 sample autocovariance `E[(x(t+1) - mean)(x(t) - mean)^T]`.
pub fn empirical_lag1_autocovariance<T: Scalar>(
    samples: &[DVector<T>],
    burn_in: usize,
) -> Result<DMatrix<T>> {
    let rows = post_burn_in(samples, burn_in, 3)?;
    let mu = mean(rows);
    let dim = mu.len();
    let mut acc = DMatrix::<T>::zeros(dim, dim);
    for w in rows.windows(2) {
        acc.ger(T::one(), &(&w[1] - &mu), &(&w[0] - &mu), T::one());
    }
    Ok(acc.unscale(real((rows.len() - 2) as f64)))
}

/// A statistic with per-entry standard errors from batch means.
#[derive(Debug, Clone)]
pub struct BatchBands<T: Scalar> {
    /// Mean of the per-batch estimates.
    pub estimate: DMatrix<T>,
    /// Per-entry standard error of that mean.
    pub standard_error: DMatrix<T>,
    pub batches: usize,
}

impl<T: Scalar> BatchBands<T> {
    /// Largest entrywise deviation of `target` from the estimate, measured in
    /// standard errors (entries with zero standard error compare absolutely
    /// against `abs_floor`).
    pub fn max_deviation_sigmas(&self, target: &DMatrix<T>, abs_floor: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.estimate.nrows() {
            for j in 0..self.estimate.ncols() {
                let diff = (to_f64(self.estimate[(i, j)]) - to_f64(target[(i, j)])).abs();
                let se = to_f64(self.standard_error[(i, j)]);
                let sigmas = if se > 0.0 {
                    diff / se
                } else if diff <= abs_floor {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(sigmas);
            }
        }
        worst
    }
}

fn batch_bands<T: Scalar, F>(
    samples: &[DVector<T>],
    burn_in: usize,
    batches: usize,
    stat: F,
) -> Result<BatchBands<T>>
where
    F: Fn(&[DVector<T>]) -> Result<DMatrix<T>>,
{
    if batches < 2 {
        return Err(Error::InsufficientSamples("need at least 2 batches".into()));
    }
    let rows = post_burn_in(samples, burn_in, batches * 3)?;
    let batch_len = rows.len() / batches;
    let dim = rows[0].len();
    let mut estimates = Vec::with_capacity(batches);
    for b in 0..batches {
        estimates.push(stat(&rows[b * batch_len..(b + 1) * batch_len])?);
    }
    let mut mean_est = DMatrix::<T>::zeros(dim, dim);
    for e in &estimates {
        mean_est += e;
    }
    mean_est = mean_est.unscale(real(batches as f64));
    let mut var = DMatrix::<T>::zeros(dim, dim);
    for e in &estimates {
        let d = e - &mean_est;
        var += d.component_mul(&d);
    }
    // standard error of the batch mean: sd / sqrt(batches)
    let denom = real::<T>(((batches - 1) * batches) as f64);
    let se = var.unscale(denom).map(|x| x.max(T::zero()).sqrt());
    Ok(BatchBands {
        estimate: mean_est,
        standard_error: se,
        batches,
    })
}

/// Sample covariance with batch-means standard errors.
pub fn batch_means_covariance<T: Scalar>(
    samples: &[DVector<T>],
    burn_in: usize,
    batches: usize,
) -> Result<BatchBands<T>> {
    batch_bands(samples, burn_in, batches, |rows| {
        empirical_covariance(rows, 0)
    })
}

/// Lag-1 autocovariance with batch-means standard errors.
pub fn batch_means_lag1<T: Scalar>(
    samples: &[DVector<T>],
    burn_in: usize,
    batches: usize,
) -> Result<BatchBands<T>> {
    batch_bands(samples, burn_in, batches, |rows| {
        empirical_lag1_autocovariance(rows, 0)
    })
}
