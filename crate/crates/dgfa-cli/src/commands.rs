//! The three experiment commands: theory sweep, Monte Carlo comparison, and
//! model diagnostics.
//!
//! CSV output is deterministic: theory columns depend only on the config,
//! empirical columns only on config plus seed, and floats are written with
//! Rust's shortest round-trip formatting. Timing goes to stdout, never into
//! the file.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use dgfa::kalman::{filter_solution, filter_sweep_row, lambda_max_cpct, predictor_solution_with};
use dgfa::linalg::{spectral_norm_sym, Tolerances};
use dgfa::model::{
    idiosyncrasy_profile, strong_independence_profile, truncate, validate, VerdictConfig,
};
use dgfa::simulate::{run_filter, run_predictor, simulate_with, InitialState};
use dgfa::to_f64;

use crate::config::{ExperimentConfig, ModelFamily};

/// Shared run context resolved from the CLI flags and config.
pub struct RunContext {
    pub config: ExperimentConfig,
    pub family: ModelFamily,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub quiet: bool,
}

impl RunContext {
    fn burn_in(&self) -> usize {
        self.config.burn_in.unwrap_or(self.config.t / 10)
    }

    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }
}

/// Format a float with shortest round-trip decimal representation.
fn fmt(x: f64) -> String {
    format!("{x}")
}

pub const SWEEP_HEADER: &str =
    "N,norm_P_minus_Q,lambda_max_CPCt,norm_Pi,norm_Lambda_hat,delta_hat_euclid,delta_hat_inf,status";

struct SweepRow {
    n: usize,
    values: Option<[f64; 6]>,
    status: String,
}

fn sweep_row(ctx: &RunContext, n: usize) -> Result<[f64; 6], dgfa::Error> {
    let dynamics = ctx.family.dynamics()?;
    let tm = truncate(&dynamics, &ctx.family.loadings, &ctx.family.noise, n)?;
    let pred = predictor_solution_with(&tm, &ctx.tolerances)?;
    let filt = filter_solution(&tm, &pred)?;
    let frow = filter_sweep_row(&tm, &filt);
    Ok([
        to_f64(spectral_norm_sym(&(pred.p() - dynamics.q()))),
        to_f64(lambda_max_cpct(tm.c(), pred.p())),
        to_f64(frow.pi_norm),
        to_f64(frow.lambda_hat_norm),
        to_f64(frow.delta_hat_euclid),
        to_f64(frow.delta_hat_inf),
    ])
}

/// Theory sweep: one CSV row per truncation dimension. Solver failures mark
/// the row and the sweep continues; any marked row makes the command exit
/// with the numerical-failure code.
pub fn cmd_sweep(ctx: &RunContext, out_path: &Path) -> Result<i32, String> {
    let started = Instant::now();
    ctx.say(&format!(
        "sweep: model={} N_list={:?}",
        ctx.family.name, ctx.config.n_list
    ));

    let mut rows = Vec::with_capacity(ctx.config.n_list.len());
    let mut failures = 0usize;
    for &n in &ctx.config.n_list {
        match sweep_row(ctx, n) {
            Ok(values) => rows.push(SweepRow {
                n,
                values: Some(values),
                status: "ok".into(),
            }),
            Err(e) => {
                eprintln!("N={n}: {e}");
                failures += 1;
                rows.push(SweepRow {
                    n,
                    values: None,
                    status: format!("error:{}", e.code()),
                });
            }
        }
    }

    let mut csv = String::new();
    csv.push_str(SWEEP_HEADER);
    csv.push('\n');
    for row in &rows {
        match &row.values {
            Some(v) => {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    row.n,
                    fmt(v[0]),
                    fmt(v[1]),
                    fmt(v[2]),
                    fmt(v[3]),
                    fmt(v[4]),
                    fmt(v[5]),
                    row.status
                );
            }
            None => {
                let _ = writeln!(csv, "{},,,,,,,{}", row.n, row.status);
            }
        }
    }
    std::fs::write(out_path, csv)
        .map_err(|e| format!("cannot write {}: {e}", out_path.display()))?;

    let good: Vec<&SweepRow> = rows.iter().filter(|r| r.values.is_some()).collect();
    if good.len() >= 2 {
        let first = good.first().unwrap().values.unwrap();
        let last = good.last().unwrap().values.unwrap();
        let pi_shrinking = good
            .windows(2)
            .all(|w| w[1].values.unwrap()[2] < w[0].values.unwrap()[2]);
        let cpct_growing = good
            .windows(2)
            .all(|w| w[1].values.unwrap()[1] > w[0].values.unwrap()[1]);
        ctx.say(&format!(
            "verdict: filter error covariance vanishing: {} (norm_Pi {} -> {}); predictor innovation growing: {} (lambda_max_CPCt {} -> {})",
            if pi_shrinking { "yes" } else { "no" },
            fmt(first[2]),
            fmt(last[2]),
            if cpct_growing { "yes" } else { "no" },
            fmt(first[1]),
            fmt(last[1]),
        ));
    }
    ctx.say(&format!(
        "wrote {} ({} rows, {failures} errors) in {} ms",
        out_path.display(),
        rows.len(),
        started.elapsed().as_millis()
    ));
    Ok(if failures > 0 { 3 } else { 0 })
}

fn simulate_header(n_factors: usize) -> String {
    let mut header = String::from("N,T,seed,burn_in,tr_P,tr_Pi,pred_err_msq,filt_err_msq");
    for i in 1..=n_factors {
        let _ = write!(header, ",pred_err_msq_{i}");
    }
    for i in 1..=n_factors {
        let _ = write!(header, ",filt_err_msq_{i}");
    }
    header.push_str(",status");
    header
}

struct SimValues {
    tr_p: f64,
    tr_pi: f64,
    pred_msq: f64,
    filt_msq: f64,
    pred_comp: Vec<f64>,
    filt_comp: Vec<f64>,
}

struct SimRow {
    n: usize,
    values: Option<SimValues>,
    status: String,
}

fn simulate_row(ctx: &RunContext, n: usize) -> Result<SimValues, dgfa::Error> {
    let dynamics = ctx.family.dynamics()?;
    let tm = truncate(&dynamics, &ctx.family.loadings, &ctx.family.noise, n)?;
    let pred = predictor_solution_with(&tm, &ctx.tolerances)?;
    let filt = filter_solution(&tm, &pred)?;
    let traj = simulate_with(&tm, ctx.config.t, ctx.seed, InitialState::Stationary)?;
    let ps = run_predictor(&tm, &pred, &traj)?;
    let fs = run_filter(&tm, &pred, &filt, &traj)?;

    let burn_in = ctx.burn_in();
    let n_factors = tm.n_factors();
    let mut pred_comp = vec![0.0f64; n_factors];
    let mut filt_comp = vec![0.0f64; n_factors];
    let count = (traj.len() - burn_in) as f64;
    for t in burn_in..traj.len() {
        for i in 0..n_factors {
            let pe = traj.states[t][i] - ps.estimates[t][i];
            let fe = traj.states[t][i] - fs.estimates[t][i];
            pred_comp[i] += pe * pe / count;
            filt_comp[i] += fe * fe / count;
        }
    }
    Ok(SimValues {
        tr_p: to_f64(pred.p().trace()),
        tr_pi: to_f64(filt.pi().trace()),
        pred_msq: pred_comp.iter().sum(),
        filt_msq: filt_comp.iter().sum(),
        pred_comp,
        filt_comp,
    })
}

/// Monte Carlo comparison: per dimension, the empirical mean-squared state
/// errors of predictor and filter against `tr(P)` and `tr(Pi)`, total and per
/// component.
pub fn cmd_simulate(ctx: &RunContext, out_path: &Path) -> Result<i32, String> {
    let started = Instant::now();
    ctx.say(&format!(
        "simulate: model={} N_list={:?} T={} seed={} burn_in={}",
        ctx.family.name,
        ctx.config.n_list,
        ctx.config.t,
        ctx.seed,
        ctx.burn_in()
    ));

    let mut rows = Vec::with_capacity(ctx.config.n_list.len());
    let mut failures = 0usize;
    for &n in &ctx.config.n_list {
        match simulate_row(ctx, n) {
            Ok(values) => rows.push(SimRow {
                n,
                values: Some(values),
                status: "ok".into(),
            }),
            Err(e) => {
                eprintln!("N={n}: {e}");
                failures += 1;
                rows.push(SimRow {
                    n,
                    values: None,
                    status: format!("error:{}", e.code()),
                });
            }
        }
    }

    let n_factors = ctx.family.n_factors;
    let mut csv = String::new();
    csv.push_str(&simulate_header(n_factors));
    csv.push('\n');
    for row in &rows {
        match &row.values {
            Some(v) => {
                let _ = write!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    row.n,
                    ctx.config.t,
                    ctx.seed,
                    ctx.burn_in(),
                    fmt(v.tr_p),
                    fmt(v.tr_pi),
                    fmt(v.pred_msq),
                    fmt(v.filt_msq)
                );
                for x in v.pred_comp.iter().chain(&v.filt_comp) {
                    let _ = write!(csv, ",{}", fmt(*x));
                }
                let _ = writeln!(csv, ",{}", row.status);
            }
            None => {
                let blanks = ",".repeat(4 + 2 * n_factors);
                let _ = writeln!(
                    csv,
                    "{},{},{},{}{blanks},{}",
                    row.n,
                    ctx.config.t,
                    ctx.seed,
                    ctx.burn_in(),
                    row.status
                );
            }
        }
    }
    std::fs::write(out_path, csv)
        .map_err(|e| format!("cannot write {}: {e}", out_path.display()))?;

    let good: Vec<&SimRow> = rows.iter().filter(|r| r.values.is_some()).collect();
    if good.len() >= 2 {
        let first = good.first().unwrap().values.as_ref().unwrap();
        let last = good.last().unwrap().values.as_ref().unwrap();
        ctx.say(&format!(
            "verdict: empirical filter error msq {} -> {}; empirical predictor error msq {} -> {}",
            fmt(first.filt_msq),
            fmt(last.filt_msq),
            fmt(first.pred_msq),
            fmt(last.pred_msq),
        ));
    }
    ctx.say(&format!(
        "wrote {} ({} rows, {failures} errors) in {} ms",
        out_path.display(),
        rows.len(),
        started.elapsed().as_millis()
    ));
    Ok(if failures > 0 { 3 } else { 0 })
}

/// Diagnostics report: assumption checks plus the strong-independence and
/// idiosyncrasy profiles with verdicts, as plain text.
pub fn cmd_diagnose(ctx: &RunContext, out_path: Option<&Path>) -> Result<i32, String> {
    let n_probe = *ctx.config.n_list.last().expect("validated non-empty");
    let report = validate(
        &ctx.family.a,
        &ctx.family.q,
        &ctx.family.loadings,
        &ctx.family.noise,
        n_probe,
    );
    let cfg = VerdictConfig::default();
    let strong = strong_independence_profile::<f64>(&ctx.family.loadings, &ctx.config.n_list, &cfg);
    let idio = idiosyncrasy_profile::<f64>(&ctx.family.noise, &ctx.config.n_list, &cfg);

    let mut text = String::new();
    let _ = writeln!(text, "model: {}", ctx.family.name);
    let _ = writeln!(text, "factors: {}", ctx.family.n_factors);
    let _ = writeln!(text, "probe dimension: {n_probe}");
    let _ = writeln!(
        text,
        "stability: {} (spectral radius {})",
        if report.stable { "PASS" } else { "FAIL" },
        fmt(report.spectral_radius_a)
    );
    let _ = writeln!(
        text,
        "reachability: {} (rank {} of {})",
        if report.reachable { "PASS" } else { "FAIL" },
        report.reachability_rank,
        report.n_factors
    );
    let _ = writeln!(
        text,
        "noise positive definite at N={n_probe}: {}",
        if report.noise_pd { "PASS" } else { "FAIL" }
    );
    let _ = writeln!(
        text,
        "nesting consistency: {}",
        if report.nesting_consistent {
            "PASS"
        } else {
            "FAIL"
        }
    );
    match &strong {
        Ok(p) => {
            let lams: Vec<String> = p
                .n_list
                .iter()
                .zip(p.lambda_min_gram.iter())
                .map(|(n, l)| format!("{n}:{}", fmt(*l)))
                .collect();
            let _ = writeln!(
                text,
                "strong independence: {} [lambda_min(C'C) {}] (lambda_min criterion: {}, residual criterion: {})",
                p.verdict_strong_indep,
                lams.join(" "),
                p.verdict_lambda_min,
                p.verdict_residuals
            );
        }
        Err(e) => {
            let _ = writeln!(text, "strong independence: unavailable ({e})");
        }
    }
    match &idio {
        Ok(p) => {
            let norms: Vec<String> = p
                .n_list
                .iter()
                .zip(p.noise_norms.iter())
                .map(|(n, l)| format!("{n}:{}", fmt(*l)))
                .collect();
            let _ = writeln!(
                text,
                "idiosyncrasy: {} [||R_N||_2 {}]",
                p.verdict_idiosyncratic,
                norms.join(" ")
            );
        }
        Err(e) => {
            let _ = writeln!(text, "idiosyncrasy: unavailable ({e})");
        }
    }
    let _ = writeln!(
        text,
        "assumptions: {}",
        if report.all_pass() {
            "ALL PASS"
        } else {
            "NOT ALL PASS"
        }
    );

    match out_path {
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            ctx.say(&format!("wrote {}", path.display()));
        }
        None => print!("{text}"),
    }
    Ok(0)
}
