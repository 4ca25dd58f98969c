//! Acceptance suite: every release criterion as a standalone test printing
//! one `ACCEPTANCE <id>: PASS/FAIL` line (visible with `--nocapture`).
//!
//! All thresholds are pinned here, not tuned at run time. Criteria whose
//! stated thresholds conflict with the benchmark model's actual behavior are
//! asserted as stated and fail honestly; the failure text carries the
//! measured value.

// negated comparisons are deliberate: a NaN measurement must count as failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use dgfa::kalman::{
    filter_asymptotics, filter_solution, predictor_asymptotics, predictor_solution,
};
use dgfa::linalg::{
    lambda_max_sym, lambda_min_sym, spectral_norm, spectral_norm_sym, spectral_radius, symmetrize,
    Tolerances,
};
use dgfa::model::LoadingGenerator;
use dgfa::nalgebra::{DMatrix, DVector};
use dgfa::pollution;
use dgfa::simulate::{
    batch_means_covariance, batch_means_lag1, run_filter, run_predictor, simulate,
};
use dgfa::static_gfa::{static_delta_covariance, static_error_covariance, StaticModel};

const SWEEP: [usize; 6] = [4, 8, 16, 32, 64, 128];
const MC_SEED: u64 = 4;

fn report(id: &str, failures: &[String], detail: &str) {
    if failures.is_empty() {
        println!("ACCEPTANCE {id}: PASS - {detail}");
    } else {
        println!("ACCEPTANCE {id}: FAIL - {}", failures.join("; "));
    }
    assert!(
        failures.is_empty(),
        "criterion {id} failed: {}",
        failures.join("; ")
    );
}

fn solved_sweep() -> Vec<(
    usize,
    dgfa::TruncatedModel64,
    dgfa::PredictorSolution64,
    dgfa::FilterSolution64,
)> {
    SWEEP
        .iter()
        .map(|&n| {
            let tm = pollution::model::<f64>(n).unwrap();
            let pred = predictor_solution(&tm).unwrap();
            let filt = filter_solution(&tm, &pred).unwrap();
            (n, tm, pred, filt)
        })
        .collect()
}

#[test]
fn criterion_01_riccati_stein_residuals() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let dynamics = pollution::dynamics::<f64>();
    let (a, q) = (dynamics.a().clone(), dynamics.q().clone());
    let sigma = dgfa::linalg::solve_stein(&a, &q).unwrap();
    let stein_rel = spectral_norm_sym(&(&sigma - &a * &sigma * a.transpose() - &q))
        / (spectral_norm_sym(&q) + 1.0);
    if stein_rel > 1e-9 {
        failures.push(format!("Stein relative residual {stein_rel:.3e} > 1e-9"));
    }

    for (n, tm, pred, _) in solved_sweep() {
        // independent residual route: generic inverse, not the solver's Cholesky
        let p = pred.p();
        let lambda = tm.c() * p * tm.c().transpose() + tm.r();
        let lam_inv = lambda
            .try_inverse()
            .expect("innovation covariance invertible");
        let ricc = &a * (p - p * tm.c().transpose() * &lam_inv * tm.c() * p) * a.transpose() + &q;
        let rel = spectral_norm_sym(&symmetrize(&(&ricc - p))) / (1.0 + spectral_norm_sym(p));
        if rel > 1e-9 {
            failures.push(format!("N={n}: ARE relative residual {rel:.3e} > 1e-9"));
        }
        let rho = spectral_radius(&(&a - pred.gain() * tm.c())).unwrap();
        if rho >= 1.0 {
            failures.push(format!("N={n}: closed-loop spectral radius {rho} >= 1"));
        }
    }

    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() > 30.0 {
        failures.push(format!("runtime {:.1}s > 30s", elapsed.as_secs_f64()));
    }
    report(
        "1",
        &failures,
        &format!(
            "Stein/ARE residuals <= 1e-9, closed loop stable, {} ms",
            elapsed.as_millis()
        ),
    );
}

#[test]
fn criterion_02_predictor_convergence_bound() {
    let mut failures = Vec::new();
    let dynamics = pollution::dynamics::<f64>();
    let q = dynamics.q();
    let a_norm_sq = {
        let n = spectral_norm(dynamics.a());
        n * n
    };
    let q_norm = spectral_norm_sym(q);

    let mut p128_gap = f64::NAN;
    for (n, tm, pred, _) in solved_sweep() {
        let gap = spectral_norm_sym(&(pred.p() - q));
        let alpha = lambda_max_sym(tm.r());
        let lam_min_gram = lambda_min_sym(&(tm.c().transpose() * tm.c()));
        let bound = a_norm_sq * alpha / lam_min_gram;
        if gap > bound {
            failures.push(format!(
                "N={n}: ||P-Q|| = {gap:.6} exceeds bound {bound:.6}"
            ));
        }
        if n == 128 {
            p128_gap = gap;
        }
    }
    let threshold = 0.05 * q_norm;
    if !(p128_gap <= threshold) {
        failures.push(format!(
            "||P_128 - Q|| = {p128_gap:.6} > 0.05 * ||Q|| = {threshold:.6}"
        ));
    }
    report(
        "2",
        &failures,
        &format!("||P_N - Q|| within proof bound for all N; ||P_128 - Q|| = {p128_gap:.6}"),
    );
}

#[test]
fn criterion_03_non_idiosyncrasy_certificate() {
    let mut failures = Vec::new();
    let rows = predictor_asymptotics(
        &pollution::dynamics::<f64>(),
        &pollution::loading(),
        &pollution::noise(),
        &SWEEP,
        &Tolerances::default(),
    )
    .unwrap();
    for w in rows.windows(2) {
        if !(w[1].lambda_max_cpct > w[0].lambda_max_cpct) {
            failures.push(format!(
                "lambda_max(CPC^T) not increasing at N={}",
                w[1].n_outputs
            ));
        }
    }
    let at_16 = rows
        .iter()
        .find(|r| r.n_outputs == 16)
        .unwrap()
        .lambda_max_cpct;
    let at_128 = rows
        .iter()
        .find(|r| r.n_outputs == 128)
        .unwrap()
        .lambda_max_cpct;
    if !(at_128 >= 4.0 * at_16) {
        failures.push(format!(
            "lambda_max grew only {:.2}x from N=16 to N=128",
            at_128 / at_16
        ));
    }
    report(
        "3",
        &failures,
        &format!(
            "lambda_max(CPC^T) monotone, {at_16:.3} -> {at_128:.3} ({:.2}x)",
            at_128 / at_16
        ),
    );
}

#[test]
fn criterion_04_filter_consistency() {
    let mut failures = Vec::new();
    let solved = solved_sweep();
    let traces: Vec<(usize, f64)> = solved
        .iter()
        .map(|(n, _, _, f)| (*n, f.pi().trace()))
        .collect();
    for w in traces.windows(2) {
        if !(w[1].1 < w[0].1) {
            failures.push(format!("tr(Pi) not decreasing at N={}", w[1].0));
        }
    }
    let tr_4 = traces[0].1;
    let tr_128 = traces.last().unwrap().1;
    let alpha_128 = lambda_max_sym(solved.last().unwrap().1.r());
    let bound = alpha_128 * 2.0 / 64.0;
    if !(tr_128 <= bound) {
        failures.push(format!(
            "tr(Pi_128) = {tr_128:.6} > alpha*2/64 = {bound:.6}"
        ));
    }
    if !(tr_128 < 0.1 * tr_4) {
        failures.push(format!(
            "tr(Pi_128) = {tr_128:.6} not below 0.1 * tr(Pi_4) = {:.6}",
            0.1 * tr_4
        ));
    }
    report(
        "4",
        &failures,
        &format!("tr(Pi) monotone, {tr_4:.4} -> {tr_128:.4}"),
    );
}

#[test]
fn criterion_05_filtered_innovation_boundedness() {
    let mut failures = Vec::new();
    let solved = solved_sweep();
    let norms: Vec<(usize, f64)> = solved
        .iter()
        .map(|(n, tm, _, filt)| {
            let lam_hat = lambda_max_sym(filt.lambda_hat());
            let r_norm = lambda_max_sym(tm.r());
            if !(lam_hat <= r_norm + 1e-12) {
                failures.push(format!(
                    "N={n}: ||Lambda_hat|| = {lam_hat:.6} exceeds ||R|| = {r_norm:.6}"
                ));
            }
            (*n, lam_hat)
        })
        .collect();
    let last_increment = norms[norms.len() - 1].1 - norms[norms.len() - 2].1;
    if !(last_increment.abs() < 1e-3) {
        failures.push(format!(
            "||Lambda_hat|| increment {last_increment:.4} at N=128 not below 1e-3"
        ));
    }
    report(
        "5",
        &failures,
        &format!("||Lambda_hat_N|| <= ||R_N|| for all N, last increment {last_increment:.2e}"),
    );
}

#[test]
fn criterion_06_residual_gap_shape() {
    let mut failures = Vec::new();
    let rows = filter_asymptotics(
        &pollution::dynamics::<f64>(),
        &pollution::loading(),
        &pollution::noise(),
        &SWEEP,
        &Tolerances::default(),
    )
    .unwrap();
    for w in rows.windows(2) {
        if !(w[1].delta_hat_inf < w[0].delta_hat_inf) {
            failures.push(format!(
                "delta_hat_inf not strictly decreasing at N={}",
                w[1].n_outputs
            ));
        }
    }
    let inf_4 = rows[0].delta_hat_inf;
    let inf_128 = rows.last().unwrap().delta_hat_inf;
    if !(inf_128 < 0.5 * inf_4) {
        failures.push(format!(
            "delta_hat_inf(128) = {inf_128:.4} not below half of {inf_4:.4}"
        ));
    }
    let eucl_4 = rows[0].delta_hat_euclid;
    for row in &rows {
        if !(row.delta_hat_euclid >= 0.25 * eucl_4) {
            failures.push(format!(
                "delta_hat_euclid(N={}) = {:.4} below 0.25 * {:.4}",
                row.n_outputs, row.delta_hat_euclid, eucl_4
            ));
        }
    }
    report(
        "6",
        &failures,
        &format!(
            "delta_hat_inf {inf_4:.4} -> {inf_128:.4} decreasing; euclid floor held ({eucl_4:.4} at N=4)"
        ),
    );
}

#[test]
fn criterion_07_static_suite() {
    let mut failures = Vec::new();

    // averaging family: error covariance exactly 1/(N+1)
    for n in [1usize, 2, 5, 10, 50, 100] {
        let model =
            StaticModel::new(DMatrix::from_element(n, 1, 1.0), DMatrix::identity(n, n)).unwrap();
        let err = static_error_covariance(&model).unwrap()[(0, 0)];
        let expected = 1.0 / (n as f64 + 1.0);
        if (err - expected).abs() > 1e-12 {
            failures.push(format!("averaging N={n}: err_cov {err} vs {expected}"));
        }
    }

    // ramp loadings: the worst per-entry residual variance at N = 200
    let n = 200usize;
    let ramp = StaticModel::new(
        LoadingGenerator::ramp().matrix::<f64>(n),
        DMatrix::identity(n, n),
    )
    .unwrap();
    let delta = static_delta_covariance(&ramp).unwrap();
    let ramp_max_diag = (0..n).map(|i| delta[(i, i)]).fold(0.0f64, f64::max);
    if !(ramp_max_diag < 0.01) {
        failures.push(format!(
            "ramp loadings at N=200: max diag of delta covariance {ramp_max_diag:.6} not below 0.01"
        ));
    }

    // geometric loadings: bounded below at N = 30
    let n = 30usize;
    let geo = StaticModel::new(
        LoadingGenerator::geometric(2.0).matrix::<f64>(n),
        DMatrix::identity(n, n),
    )
    .unwrap();
    let delta = static_delta_covariance(&geo).unwrap();
    let geo_max_diag = (0..n).map(|i| delta[(i, i)]).fold(0.0f64, f64::max);
    if !(geo_max_diag >= 0.3) {
        failures.push(format!(
            "geometric loadings at N=30: max diag {geo_max_diag:.6} below 0.3"
        ));
    }

    report(
        "7",
        &failures,
        &format!("averaging exact; ramp max-diag {ramp_max_diag:.4}; geometric max-diag {geo_max_diag:.4}"),
    );
}

#[test]
fn criterion_08_monte_carlo_agreement() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let tm = pollution::model::<f64>(16).unwrap();
    let pred = predictor_solution(&tm).unwrap();
    let filt = filter_solution(&tm, &pred).unwrap();
    let t = 100_000usize;
    let burn_in = 10_000usize;
    let traj = simulate(&tm, t, MC_SEED).unwrap();
    let ps = run_predictor(&tm, &pred, &traj).unwrap();
    let fs = run_filter(&tm, &pred, &filt, &traj).unwrap();

    let filt_err: Vec<DVector<f64>> = traj
        .states
        .iter()
        .zip(&fs.estimates)
        .map(|(x, xh)| x - xh)
        .collect();
    let bands = batch_means_covariance(&filt_err, burn_in, 20).unwrap();
    let sig_filt = bands.max_deviation_sigmas(filt.pi(), 1e-12);
    if sig_filt > 3.0 {
        failures.push(format!(
            "filter error covariance off by {sig_filt:.2} sigmas"
        ));
    }

    let pred_err: Vec<DVector<f64>> = traj
        .states
        .iter()
        .zip(&ps.estimates)
        .map(|(x, xh)| x - xh)
        .collect();
    let bands = batch_means_covariance(&pred_err, burn_in, 20).unwrap();
    let sig_pred = bands.max_deviation_sigmas(pred.p(), 1e-12);
    if sig_pred > 3.0 {
        failures.push(format!(
            "predictor error covariance off by {sig_pred:.2} sigmas"
        ));
    }

    let bands = batch_means_lag1(&ps.innovations, burn_in, 20).unwrap();
    let sig_lag = bands.max_deviation_sigmas(&DMatrix::zeros(16, 16), 1e-12);
    if sig_lag > 3.0 {
        failures.push(format!(
            "innovation lag-1 autocovariance off by {sig_lag:.2} sigmas"
        ));
    }

    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() > 60.0 {
        failures.push(format!("runtime {:.1}s > 60s", elapsed.as_secs_f64()));
    }
    report(
        "8",
        &failures,
        &format!(
            "N=16, T=1e5, seed {MC_SEED}: filter {sig_filt:.2}, predictor {sig_pred:.2}, lag-1 {sig_lag:.2} sigmas, {} ms",
            elapsed.as_millis()
        ),
    );
}

#[test]
fn criterion_09_algebraic_identities() {
    let mut failures = Vec::new();
    for (n, tm, pred, filt) in solved_sweep() {
        let ident = DMatrix::<f64>::identity(n, n);
        let i_cl = &ident - tm.c() * filt.gain();
        // independent route: generic inverse of Lambda
        let lam_inv = pred
            .lambda()
            .clone()
            .try_inverse()
            .expect("Lambda invertible");
        let r_lam_inv = tm.r() * &lam_inv;
        let gap = (&i_cl - &r_lam_inv).norm() / (1.0 + i_cl.norm());
        if gap > 1e-9 {
            failures.push(format!("N={n}: I - CL vs R Lambda^-1 off by {gap:.3e}"));
        }

        let lam_hat_a = tm.r() * &lam_inv * tm.r();
        let lam_hat_b = &i_cl * pred.lambda() * i_cl.transpose();
        let scale = 1.0 + spectral_norm_sym(filt.lambda_hat());
        let gap_a = spectral_norm_sym(&symmetrize(&(filt.lambda_hat() - lam_hat_a))) / scale;
        let gap_b = spectral_norm_sym(&symmetrize(&(filt.lambda_hat() - lam_hat_b))) / scale;
        if gap_a > 1e-9 || gap_b > 1e-9 {
            failures.push(format!(
                "N={n}: Lambda_hat identities off by {gap_a:.3e}/{gap_b:.3e}"
            ));
        }

        let a = tm.dynamics().a();
        let q = tm.dynamics().q();
        let q_tilde_alt = a * pred.p() * a.transpose() - pred.p() + q;
        let gap_q = spectral_norm_sym(&symmetrize(&(pred.q_tilde() - q_tilde_alt)))
            / (1.0 + spectral_norm_sym(pred.q_tilde()));
        if gap_q > 1e-9 {
            failures.push(format!("N={n}: Q_tilde identity off by {gap_q:.3e}"));
        }
    }
    report(
        "9",
        &failures,
        "I-CL = R Lambda^-1, Lambda_hat forms, Q_tilde identity all <= 1e-9",
    );
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dgfa"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_10_csv_determinism() {
    let mut failures = Vec::new();
    let dir = std::env::temp_dir().join(format!("dgfa-acc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("config.json");
    std::fs::write(
        &config_path,
        r#"{ "model": "pollution", "N_list": [4, 8, 16], "T": 5000, "seed": 11 }"#,
    )
    .unwrap();
    let cfg = config_path.to_str().unwrap();

    let path_of = |name: &str| -> PathBuf { dir.join(name) };
    let read = |p: &PathBuf| std::fs::read(p).unwrap();

    for (cmd, file_a, file_b) in [
        ("sweep", "s1.csv", "s2.csv"),
        ("simulate", "m1.csv", "m2.csv"),
    ] {
        let a = path_of(file_a);
        let b = path_of(file_b);
        let out_a = run_cli(&[
            cmd,
            "--config",
            cfg,
            "--out",
            a.to_str().unwrap(),
            "--quiet",
        ]);
        let out_b = run_cli(&[
            cmd,
            "--config",
            cfg,
            "--out",
            b.to_str().unwrap(),
            "--quiet",
        ]);
        if !out_a.status.success() || !out_b.status.success() {
            failures.push(format!("{cmd} run failed: {:?}", out_a.status));
            continue;
        }
        if read(&a) != read(&b) {
            failures.push(format!("{cmd}: repeated runs differ byte-wise"));
        }
    }

    // theory columns are seed-independent
    let s3 = path_of("s3.csv");
    run_cli(&[
        "sweep",
        "--config",
        cfg,
        "--out",
        s3.to_str().unwrap(),
        "--seed",
        "999",
        "--quiet",
    ]);
    if read(&path_of("s1.csv")) != read(&s3) {
        failures.push("sweep CSV depends on the seed".into());
    }

    std::fs::remove_dir_all(&dir).ok();
    report(
        "10",
        &failures,
        "sweep and simulate CSVs byte-identical across reruns",
    );
}
