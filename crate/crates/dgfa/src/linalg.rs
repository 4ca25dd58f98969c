//! Dense symmetric/PSD linear-algebra kernels: Stein (discrete Lyapunov) and
//! discrete algebraic Riccati solvers, spectral summaries, and least-squares
//! projection residuals.
//!
//! All operations are pure functions of their inputs. Inversions of positive
//! definite blocks go through Cholesky factorizations, never a generic inverse.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::scalar::{real, to_f64, Scalar};

/// Solver tolerances.
///
/// Defaults target double precision at cross-sectional dimensions up to a few
/// thousand. Override per call through the `*_with` solver variants.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Absolute residual floor.
    pub abs: f64,
    /// Relative residual scale.
    pub rel: f64,
    /// Relative-change stopping rule for fixed-point iterations.
    pub fixed_point_rel_change: f64,
    /// Iteration cap for fixed-point solvers.
    pub max_iterations: usize,
    /// Spectral radius must stay below `1 - stability_margin`.
    pub stability_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            abs: 1e-10,
            rel: 1e-9,
            fixed_point_rel_change: 1e-12,
            max_iterations: 100_000,
            stability_margin: 1e-9,
        }
    }
}

impl Tolerances {
    /// Defaults adjusted to the working scalar: identical to [`Default`] for
    /// `f64`, relaxed to achievable levels for lower precision.
    pub fn for_scalar<T: Scalar>() -> Self {
        let base = Tolerances::default();
        Tolerances {
            abs: crate::scalar::tol_floor::<T>(base.abs, 1e2),
            rel: crate::scalar::tol_floor::<T>(base.rel, 1e2),
            fixed_point_rel_change: crate::scalar::tol_floor::<T>(base.fixed_point_rel_change, 1e1),
            ..base
        }
    }
}

/// Eigen-quantities of a square matrix.
///
/// `lambda_min`/`lambda_max` are eigenvalues of the symmetric part; for a
/// symmetric input that is the matrix itself. `spectral_radius` is the largest
/// eigenvalue modulus of the matrix as given.
#[derive(Debug, Clone, Copy)]
pub struct SpectralSummary<T: Scalar> {
    pub lambda_min: T,
    pub lambda_max: T,
    pub spectral_radius: T,
    pub is_psd: bool,
}

fn ensure_finite<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().any(|&x| !to_f64(x).is_finite()) {
        return Err(Error::NonFinite(format!(
            "{what} contains NaN or infinite entries"
        )));
    }
    Ok(())
}

fn ensure_square<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `(M + M^T) / 2`.
pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()).scale(real(0.5))
}

/// Eigenvalues of the symmetrized input, sorted ascending; empty for a 0x0
/// matrix.
pub fn sym_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> DVector<T> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    let mut ev: Vec<T> = symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    DVector::from_vec(ev)
}

/// Smallest eigenvalue of a symmetric matrix (zero for a 0x0 matrix).
pub fn lambda_min_sym<T: Scalar>(m: &DMatrix<T>) -> T {
    let ev = sym_eigenvalues(m);
    if ev.is_empty() {
        return T::zero();
    }
    ev[0]
}

/// Largest eigenvalue of a symmetric matrix (zero for a 0x0 matrix).
pub fn lambda_max_sym<T: Scalar>(m: &DMatrix<T>) -> T {
    let ev = sym_eigenvalues(m);
    if ev.is_empty() {
        return T::zero();
    }
    ev[ev.len() - 1]
}

/// Spectral norm of a symmetric matrix (largest eigenvalue modulus).
pub fn spectral_norm_sym<T: Scalar>(m: &DMatrix<T>) -> T {
    let ev = sym_eigenvalues(m);
    if ev.is_empty() {
        return T::zero();
    }
    ev[0].abs().max(ev[ev.len() - 1].abs())
}

/// Spectral norm of a general (possibly rectangular) matrix via `M^T M`.
pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    let gram = m.transpose() * m;
    lambda_max_sym(&gram).max(T::zero()).sqrt()
}

/// PSD test with the round-off tolerance `lambda_min >= -1e-9 (1 + lambda_max)`.
pub fn is_psd_sym<T: Scalar>(m: &DMatrix<T>) -> bool {
    let ev = sym_eigenvalues(m);
    if ev.is_empty() {
        return true;
    }
    let lo = to_f64(ev[0]);
    let hi = to_f64(ev[ev.len() - 1]);
    lo >= -1e-9 * (1.0 + hi)
}

/// PSD-order comparison `x >= y` up to `tol * (1 + ||x||_2)`.
pub fn psd_geq<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>, tol: f64) -> bool {
    let diff = symmetrize(&(x - y));
    let lo = to_f64(lambda_min_sym(&diff));
    lo >= -tol * (1.0 + to_f64(spectral_norm_sym(x)))
}

/// Numerical rank: count of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank<T: Scalar>(m: &DMatrix<T>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0f64, |acc, &s| acc.max(to_f64(s)));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| to_f64(s) > rel_tol * smax).count()
}

/// Cholesky factorization that reports failure as `NotPd`.
pub fn cholesky_or_err<T: Scalar>(m: DMatrix<T>, what: &str) -> Result<Cholesky<T, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::NotPd(format!("{what} failed Cholesky factorization")))
}

/// Largest eigenvalue modulus of a general square matrix.
///
/// Computed by normalized repeated squaring: the estimates
/// `||M^(2^k)||_F^(1/2^k)` converge to the spectral radius, and each squaring
/// step renormalizes so no overflow occurs. 64 doublings probe the norm of
/// `M^(2^64)`, which pins the limit to well below the stopping threshold.
pub fn spectral_radius<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    ensure_square(m, "spectral_radius input")?;
    if m.nrows() == 0 {
        return Err(Error::InvalidDimension(
            "spectral_radius of empty matrix".into(),
        ));
    }
    ensure_finite(m, "spectral_radius input")?;

    let mut b = m.clone();
    let mut acc = 0.0f64; // sum of 2^-i * ln s_i over completed steps
    let mut weight = 1.0f64;
    let mut prev = f64::INFINITY;
    for _ in 0..=64 {
        let s = to_f64(b.norm());
        if !s.is_finite() {
            return Err(Error::NonFinite(
                "norm overflow during spectral radius iteration".into(),
            ));
        }
        if s == 0.0 {
            return Ok(T::zero());
        }
        let est = (acc + weight * s.ln()).exp();
        if (est - prev).abs() <= 1e-12 * est.max(1.0) {
            return Ok(real(est));
        }
        prev = est;
        acc += weight * s.ln();
        weight *= 0.5;
        let bn = b.unscale(real(s));
        b = &bn * &bn;
    }
    Ok(real(prev))
}

/// Eigen summary of a square matrix; `symmetric` selects the ordering
/// semantics (symmetric inputs get their exact min/max eigenvalues and the
/// radius `max(|lambda_min|, |lambda_max|)`).
pub fn spectral_summary<T: Scalar>(m: &DMatrix<T>, symmetric: bool) -> Result<SpectralSummary<T>> {
    ensure_square(m, "spectral_summary input")?;
    if m.nrows() == 0 {
        return Err(Error::InvalidDimension(
            "spectral_summary of empty matrix".into(),
        ));
    }
    ensure_finite(m, "spectral_summary input")?;

    let ev = sym_eigenvalues(m);
    let lambda_min = ev[0];
    let lambda_max = ev[ev.len() - 1];
    let rho = if symmetric {
        lambda_min.abs().max(lambda_max.abs())
    } else {
        spectral_radius(m)?
    };
    let is_psd = to_f64(lambda_min) >= -1e-9 * (1.0 + to_f64(lambda_max));
    Ok(SpectralSummary {
        lambda_min,
        lambda_max,
        spectral_radius: rho,
        is_psd,
    })
}

/// Solve the Stein (discrete Lyapunov) equation `S = A S A^T + Q` with
/// default tolerances for the working scalar.
pub fn solve_stein<T: Scalar>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    solve_stein_with(a, q, &Tolerances::for_scalar::<T>())
}

/// Solve `S = A S A^T + Q` by doubling: partial sums of `sum_j A^j Q A^jT`.
///
/// Requires `spectral_radius(A) < 1 - stability_margin` and symmetric PSD `Q`.
/// Stops once the spectral residual `||S - A S A^T - Q||_2` falls below
/// `abs + rel * ||Q||_2`, verified on the produced iterate.
pub fn solve_stein_with<T: Scalar>(
    a: &DMatrix<T>,
    q: &DMatrix<T>,
    tol: &Tolerances,
) -> Result<DMatrix<T>> {
    ensure_square(a, "A")?;
    ensure_square(q, "Q")?;
    if a.nrows() != q.nrows() {
        return Err(Error::InvalidDimension(format!(
            "A is {}x{} but Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    ensure_finite(a, "A")?;
    ensure_finite(q, "Q")?;
    if a.nrows() == 0 {
        return Ok(q.clone());
    }

    let rho = to_f64(spectral_radius(a)?);
    if rho >= 1.0 - tol.stability_margin {
        return Err(Error::NotStable { rho });
    }

    let q = symmetrize(q);
    let target = tol.abs + tol.rel * to_f64(spectral_norm_sym(&q));

    let mut s = q.clone();
    let mut m = a.clone();
    let mut converged = false;
    for _ in 0..tol.max_iterations {
        let increment = &m * &s * m.transpose();
        let delta = to_f64(increment.norm());
        s = symmetrize(&(&s + increment));
        if delta <= tol.fixed_point_rel_change * to_f64(s.norm()).max(1.0) {
            converged = true;
            break;
        }
        m = &m * &m;
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "Stein doubling exhausted {} iterations (spectral radius {rho})",
            tol.max_iterations
        )));
    }
    // Frobenius bounds the spectral norm, so this check is conservative.
    let residual = &s - &(a * &s * a.transpose()) - &q;
    if to_f64(residual.norm()) > target {
        return Err(Error::NonConvergence(format!(
            "Stein residual {:.3e} above tolerance {target:.3e}",
            to_f64(residual.norm())
        )));
    }
    Ok(s)
}

/// Solve the discrete algebraic Riccati equation with default tolerances for
/// the working scalar.
pub fn solve_dare<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    solve_dare_with(a, c, q, r, &Tolerances::for_scalar::<T>())
}

/// Stabilizing solution of
/// `P = A [P - P C^T (C P C^T + R)^{-1} C P] A^T + Q`
/// by fixed-point iteration of the measurement/time-update recursion from
/// `P_0 = Q`, with the relative-change stopping rule
/// `||P_{k+1} - P_k||_F <= fixed_point_rel_change * max(1, ||P_k||_F)`.
///
/// With positive definite `Q` each step uses the equivalent information form
/// `P <- A (P^{-1} + C^T R^{-1} C)^{-1} A^T + Q` (all n-by-n work after one
/// Cholesky of `R`); singular `Q` falls back to the covariance form with a
/// Cholesky of the innovation covariance per step.
pub fn solve_dare_with<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    tol: &Tolerances,
) -> Result<DMatrix<T>> {
    ensure_square(a, "A")?;
    ensure_square(q, "Q")?;
    ensure_square(r, "R")?;
    let n = a.nrows();
    let n_out = c.nrows();
    if q.nrows() != n || c.ncols() != n || r.nrows() != n_out {
        return Err(Error::InvalidDimension(format!(
            "inconsistent shapes: A {n}x{n}, C {}x{}, Q {}x{}, R {}x{}",
            c.nrows(),
            c.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    ensure_finite(a, "A")?;
    ensure_finite(c, "C")?;
    ensure_finite(q, "Q")?;
    ensure_finite(r, "R")?;

    // No measurements: the Riccati equation reduces to the Stein equation.
    if n_out == 0 || c.iter().all(|x| x.is_zero()) {
        return solve_stein_with(a, q, tol);
    }

    let rho = to_f64(spectral_radius(a)?);
    if rho >= 1.0 - tol.stability_margin {
        return Err(Error::NotStable { rho });
    }

    let q = symmetrize(q);
    let r = symmetrize(r);
    let r_chol = cholesky_or_err(r.clone(), "R")?;
    // Information contribution of the measurements, n-by-n.
    let gram = symmetrize(&(c.transpose() * r_chol.solve(c)));

    let q_pd = Cholesky::new(q.clone()).is_some();
    let mut p = q.clone();
    let mut converged = false;
    for _ in 0..tol.max_iterations {
        let p_next = if q_pd {
            let p_inv = Cholesky::new(p.clone())
                .ok_or_else(|| Error::NotPd("Riccati iterate lost positive definiteness".into()))?
                .inverse();
            let info = cholesky_or_err(symmetrize(&(p_inv + &gram)), "P^-1 + C^T R^-1 C")?;
            symmetrize(&(a * info.inverse() * a.transpose() + &q))
        } else {
            let lambda = symmetrize(&(c * &p * c.transpose() + &r));
            let lam_chol = Cholesky::new(lambda).ok_or_else(|| {
                Error::SingularInnovation("C P C^T + R failed Cholesky during iteration".into())
            })?;
            let s = c * &p * a.transpose();
            let x = lam_chol.solve(&s);
            symmetrize(&(a * &p * a.transpose() - s.transpose() * x + &q))
        };
        let delta = to_f64((&p_next - &p).norm());
        let scale = to_f64(p.norm()).max(1.0);
        p = p_next;
        if delta <= tol.fixed_point_rel_change * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "Riccati fixed point exhausted {} iterations",
            tol.max_iterations
        )));
    }

    // Verify the ARE residual and that the solution is stabilizing.
    let lambda = symmetrize(&(c * &p * c.transpose() + &r));
    let lam_chol = Cholesky::new(lambda)
        .ok_or_else(|| Error::SingularInnovation("C P C^T + R failed Cholesky".into()))?;
    let s = c * &p * a.transpose();
    let gain_t = lam_chol.solve(&s); // N x n, equals (A P C^T Lambda^-1)^T
    let residual = symmetrize(&(a * &p * a.transpose() - s.transpose() * &gain_t + &q)) - &p;
    let rel = to_f64(spectral_norm_sym(&residual)) / (1.0 + to_f64(spectral_norm_sym(&p)));
    if rel > tol.rel {
        return Err(Error::NonConvergence(format!(
            "Riccati residual {rel:.3e} above tolerance {:.3e}",
            tol.rel
        )));
    }
    let closed_loop = a - gain_t.transpose() * c;
    let rho_cl = to_f64(spectral_radius(&closed_loop)?);
    if rho_cl >= 1.0 {
        return Err(Error::NonConvergence(format!(
            "fixed point is not stabilizing (closed-loop spectral radius {rho_cl})"
        )));
    }
    Ok(p)
}

/// Least-squares projection residual of `v` against `span(basis)`.
///
/// Returns the residual vector and its Euclidean norm. A rank-deficient basis
/// is handled by dropping directions that are numerically dependent; the
/// orthonormalization runs two passes so the residual is orthogonal to every
/// basis vector to machine precision.
pub fn projection_residual<T: Scalar>(
    v: &DVector<T>,
    basis: &[DVector<T>],
) -> Result<(DVector<T>, T)> {
    for (i, b) in basis.iter().enumerate() {
        if b.len() != v.len() {
            return Err(Error::InvalidDimension(format!(
                "basis vector {i} has length {} but target has length {}",
                b.len(),
                v.len()
            )));
        }
    }

    let mut ortho: Vec<DVector<T>> = Vec::with_capacity(basis.len());
    for b in basis {
        let mut u = b.clone();
        for _ in 0..2 {
            for q in &ortho {
                let coeff = q.dot(&u);
                u.axpy(-coeff, q, T::one());
            }
        }
        let norm = u.norm();
        if to_f64(norm) > 1e-12 * to_f64(b.norm()).max(1.0) {
            ortho.push(u.unscale(norm));
        }
    }

    let mut residual = v.clone();
    for _ in 0..2 {
        for q in &ortho {
            let coeff = q.dot(&residual);
            residual.axpy(-coeff, q, T::one());
        }
    }
    let norm = residual.norm();
    Ok((residual, norm))
}
