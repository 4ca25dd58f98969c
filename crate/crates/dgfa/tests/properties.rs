//! Property tests for the numerical kernels and the nested model family.

use dgfa::kalman::{filter_solution, innovation_transform, predictor_solution, TransformDirection};
use dgfa::linalg::{
    is_psd_sym, projection_residual, psd_geq, solve_dare, solve_stein, spectral_norm_sym,
    spectral_radius, symmetrize,
};
use dgfa::model::{truncate, FactorDynamics, LoadingGenerator, NoiseModel};
use dgfa::simulate::{empirical_covariance, simulate};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Random square matrix rescaled to a target spectral radius below one.
fn stable_matrix(n: usize, entries: Vec<f64>, target_rho: f64) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(n, n, &entries);
    let rho = spectral_radius(&a).unwrap();
    if rho < 1e-6 {
        // nilpotent-ish draw: already stable
        a
    } else {
        a.scale(target_rho / rho)
    }
}

fn psd_matrix(n: usize, entries: Vec<f64>) -> DMatrix<f64> {
    let g = DMatrix::from_row_slice(n, n, &entries);
    symmetrize(&(&g * g.transpose()))
}

fn pd_matrix(n: usize, entries: Vec<f64>) -> DMatrix<f64> {
    psd_matrix(n, entries) + DMatrix::identity(n, n).scale(0.5)
}

/// Independent eigenvalue oracle: cyclic Jacobi rotations on a symmetric
/// matrix, no shared code with the library's eigensolver path.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / a[(p, q)];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

prop_compose! {
    fn stein_inputs()(n in 1usize..4)(
        n in Just(n),
        a_entries in prop::collection::vec(-1.0f64..1.0, n * n),
        q_entries in prop::collection::vec(-2.0f64..2.0, n * n),
        rho in 0.1f64..0.9,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        (stable_matrix(n, a_entries, rho), psd_matrix(n, q_entries))
    }
}

prop_compose! {
    fn dare_inputs()(n in 1usize..4, m in 1usize..6)(
        n in Just(n),
        m in Just(m),
        a_entries in prop::collection::vec(-1.0f64..1.0, n * n),
        c_entries in prop::collection::vec(-2.0f64..2.0, m * n),
        q_entries in prop::collection::vec(-2.0f64..2.0, n * n),
        r_entries in prop::collection::vec(-1.0f64..1.0, m * m),
        rho in 0.1f64..0.9,
    ) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (
            stable_matrix(n, a_entries, rho),
            DMatrix::from_row_slice(m, n, &c_entries),
            psd_matrix(n, q_entries),
            pd_matrix(m, r_entries),
        )
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stein_solution_residual_and_psd((a, q) in stein_inputs()) {
        let s = solve_stein(&a, &q).unwrap();
        let residual = &s - &a * &s * a.transpose() - symmetrize(&q);
        let rel = spectral_norm_sym(&residual) / (spectral_norm_sym(&q) + 1.0);
        prop_assert!(rel <= 1e-9, "relative residual {rel}");
        prop_assert!(is_psd_sym(&s));
    }

    #[test]
    fn dare_residual_psd_order_and_recursion_match((a, c, q, r) in dare_inputs()) {
        let p = solve_dare(&a, &c, &q, &r).unwrap();
        // residual of the stated equation
        let lambda = &c * &p * c.transpose() + &r;
        let lam_inv = lambda.clone().try_inverse().unwrap();
        let ricc = &a * (&p - &p * c.transpose() * &lam_inv * &c * &p) * a.transpose() + &q;
        let rel = spectral_norm_sym(&symmetrize(&(&ricc - &p))) / (1.0 + spectral_norm_sym(&p));
        prop_assert!(rel <= 1e-9, "relative residual {rel}");
        prop_assert!(psd_geq(&p, &symmetrize(&q), 1e-8), "P >= Q violated");

        // independent oracle: covariance-form recursion from P0 = Q with a
        // generic inverse; iterates must increase in PSD order
        let mut p_ref = symmetrize(&q);
        let mut iterations = 0usize;
        loop {
            let lam = &c * &p_ref * c.transpose() + &r;
            let inv = lam.try_inverse().unwrap();
            let next = symmetrize(
                &(&a * (&p_ref - &p_ref * c.transpose() * inv * &c * &p_ref) * a.transpose() + &q),
            );
            if iterations < 25 {
                prop_assert!(psd_geq(&next, &p_ref, 1e-8), "iterates not monotone");
            }
            let delta = (&next - &p_ref).norm();
            let scale = p_ref.norm().max(1.0);
            p_ref = next;
            iterations += 1;
            if delta <= 1e-13 * scale || iterations > 200_000 {
                break;
            }
        }
        let gap = (&p - &p_ref).norm() / (1.0 + p_ref.norm());
        prop_assert!(gap <= 1e-9, "fixed point differs from recursion oracle by {gap}");

        // stabilizing: closed loop inside the unit circle
        let k = &a * &p * c.transpose() * lam_inv;
        let rho_cl = spectral_radius(&(&a - &k * &c)).unwrap();
        prop_assert!(rho_cl < 1.0, "closed-loop radius {rho_cl}");
    }

    #[test]
    fn projection_residual_is_orthogonal(
        len in 2usize..12,
        seedv in prop::collection::vec(-5.0f64..5.0, 12),
        seedb in prop::collection::vec(-5.0f64..5.0, 36),
        nb in 1usize..4,
        duplicate in proptest::bool::ANY,
    ) {
        let v = DVector::from_vec(seedv[..len].to_vec());
        let mut basis: Vec<DVector<f64>> =
            (0..nb).map(|i| DVector::from_vec(seedb[i * len..(i + 1) * len].to_vec())).collect();
        if duplicate {
            // force rank deficiency
            let dup = basis[0].scale(-1.5);
            basis.push(dup);
        }
        let (residual, norm) = projection_residual(&v, &basis).unwrap();
        prop_assert!((residual.norm() - norm).abs() <= 1e-12 * (1.0 + norm));
        for b in &basis {
            let ip = residual.dot(b).abs();
            prop_assert!(ip <= 1e-10 * (residual.norm() * b.norm()).max(1.0), "inner product {ip}");
        }
        // idempotence: projecting the residual changes nothing
        let (residual2, _) = projection_residual(&residual, &basis).unwrap();
        prop_assert!((&residual2 - &residual).norm() <= 1e-9 * (1.0 + residual.norm()));
    }

    #[test]
    fn spectral_radius_matches_symmetric_eigenvalues(
        n in 1usize..5,
        entries in prop::collection::vec(-3.0f64..3.0, 25),
    ) {
        let m = psd_matrix(n, entries[..n * n].to_vec());
        let rho = spectral_radius(&m).unwrap();
        let lam = spectral_norm_sym(&m);
        prop_assert!((rho - lam).abs() <= 1e-8 * (1.0 + lam), "rho {rho} vs lambda {lam}");
    }

    #[test]
    fn spectral_summary_matches_jacobi_oracle(
        n in 1usize..6,
        entries in prop::collection::vec(-3.0f64..3.0, 36),
    ) {
        let g = DMatrix::from_row_slice(n, n, &entries[..n * n]);
        let m = symmetrize(&g);
        let summary = dgfa::linalg::spectral_summary(&m, true).unwrap();
        let oracle = jacobi_eigenvalues(&m);
        let scale = 1.0 + oracle.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        prop_assert!((summary.lambda_min - oracle[0]).abs() <= 1e-9 * scale);
        prop_assert!((summary.lambda_max - oracle[n - 1]).abs() <= 1e-9 * scale);
        let rho_oracle = oracle.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        prop_assert!((summary.spectral_radius - rho_oracle).abs() <= 1e-9 * scale);
        prop_assert_eq!(summary.is_psd, oracle[0] >= -1e-9 * (1.0 + oracle[n - 1]));
    }

    #[test]
    fn generator_nesting_blocks_agree(
        small in 1usize..12,
        extra in 1usize..12,
        rule_id in 0usize..4,
        noise_id in 0usize..4,
    ) {
        let loadings = match rule_id {
            0 => LoadingGenerator::cyclic_identity(2),
            1 => LoadingGenerator::constant(vec![1.0, -0.5]),
            2 => LoadingGenerator::ramp(),
            _ => LoadingGenerator::geometric(1.5),
        };
        let noise = match noise_id {
            0 => NoiseModel::identity(),
            1 => NoiseModel::scaled_identity(2.5),
            2 => NoiseModel::diag_ramp(),
            _ => NoiseModel::square_cascade(0.5, 4),
        };
        let big = small + extra;
        let c_small = loadings.matrix::<f64>(small);
        let c_big = loadings.matrix::<f64>(big);
        prop_assert_eq!(c_big.view((0, 0), (small, loadings.n_factors())).clone_owned(), c_small);
        let r_small = noise.covariance::<f64>(small);
        let r_big = noise.covariance::<f64>(big);
        prop_assert_eq!(r_big.view((0, 0), (small, small)).clone_owned(), r_small);
    }

    #[test]
    fn innovation_transform_round_trips(
        m in 1usize..5,
        n in 1usize..3,
        c_entries in prop::collection::vec(-2.0f64..2.0, 10),
        l_entries in prop::collection::vec(-2.0f64..2.0, 10),
        v_entries in prop::collection::vec(-5.0f64..5.0, 5),
    ) {
        let c = DMatrix::from_row_slice(m, n, &c_entries[..m * n]);
        // scale L so that ||C L|| < 1 and I - C L is safely invertible
        let mut l = DMatrix::from_row_slice(n, m, &l_entries[..m * n]);
        let prod_norm = (&c * &l).norm();
        if prod_norm > 0.5 {
            l = l.scale(0.5 / prod_norm);
        }
        let v = DVector::from_vec(v_entries[..m].to_vec());
        let fwd = innovation_transform(&c, &l, &v, TransformDirection::PredictorToFilter).unwrap();
        let back = innovation_transform(&c, &l, &fwd, TransformDirection::FilterToPredictor).unwrap();
        prop_assert!((&back - &v).norm() <= 1e-10 * (1.0 + v.norm()));
    }

    #[test]
    fn simulation_is_deterministic_per_seed(seed in proptest::num::u64::ANY) {
        let dynamics = FactorDynamics::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let tm = truncate(&dynamics, &LoadingGenerator::constant(vec![1.0]), &NoiseModel::identity(), 2)
            .unwrap();
        let t1 = simulate(&tm, 32, seed).unwrap();
        let t2 = simulate(&tm, 32, seed).unwrap();
        prop_assert_eq!(t1.outputs, t2.outputs);
        prop_assert_eq!(t1.states, t2.states);
    }

    #[test]
    fn empirical_covariance_of_constant_series_is_zero(
        dim in 1usize..4,
        value in -10.0f64..10.0,
        count in 2usize..50,
    ) {
        let samples = vec![DVector::from_element(dim, value); count];
        let cov = empirical_covariance(&samples, 0).unwrap();
        // zero up to the round-off of the mean
        prop_assert!(cov.norm() <= 1e-28 * (1.0 + value * value) * dim as f64);
    }
}

/// Solved predictor/filter pairs satisfy the PSD sandwich `Pi <= P`, the gain
/// identities, and the transform round-trip on an actual solution.
#[test]
fn solution_transform_round_trip_on_benchmark() {
    let tm = dgfa::pollution::model::<f64>(12).unwrap();
    let pred = predictor_solution(&tm).unwrap();
    let filt = filter_solution(&tm, &pred).unwrap();
    let v = DVector::from_fn(12, |i, _| (i as f64 * 0.77).sin());
    let e = innovation_transform(
        tm.c(),
        filt.gain(),
        &v,
        TransformDirection::FilterToPredictor,
    )
    .unwrap();
    let back = innovation_transform(
        tm.c(),
        filt.gain(),
        &e,
        TransformDirection::PredictorToFilter,
    )
    .unwrap();
    assert!((&back - &v).norm() <= 1e-10 * (1.0 + v.norm()));
    assert!(psd_geq(pred.p(), filt.pi(), 1e-8));
}
