//! Bisection on the averaging weight `beta`, with `lambda(beta) = A beta^2 / (1 - beta)`,
//! to find a prox parameter satisfying the large-step condition
//! `alpha_lo <= lambda |y - x_tilde|^{d-1} <= alpha_hi`.

use serde::{Deserialize, Serialize};

use crate::ahpe::{RunTrace, SolverConfig};
use crate::ats::{self, ApproxSolution};
use crate::error::Result;
use crate::multilinear::DenseVector;
use crate::oracle::Problem;
use crate::taylor::{factorial, TaylorModel};

/// Smallest prox parameter tried on the first iteration.
pub const LAMBDA_MIN: f64 = 1e-12;

/// `A beta^2 / (1 - beta)`; `+inf` for `beta >= 1`.
pub fn lambda_of_beta(a_k: f64, beta: f64) -> f64 {
    if beta >= 1.0 {
        f64::INFINITY
    } else {
        a_k * beta * beta / (1.0 - beta)
    }
}

/// Inverse of [`lambda_of_beta`], `2 lambda / (sqrt(lambda^2 + 4 lambda A) + lambda)`.
pub fn beta_of_lambda(a_k: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda.is_infinite() {
        return 1.0;
    }
    2.0 * lambda / ((lambda * lambda + 4.0 * lambda * a_k).sqrt() + lambda)
}

/// `(1 - beta) y_k + beta x_k`.
pub fn x_of_beta(beta: f64, x_k: &DenseVector, y_k: &DenseVector) -> DenseVector {
    y_k * (1.0 - beta) + x_k * beta
}

/// Interval and window of a bisection in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionState {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub a_k: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub steps: usize,
}

/// Everything computed at one trial point.
#[derive(Debug, Clone)]
pub struct Probe {
    pub beta: f64,
    pub lambda: f64,
    pub x_tilde: DenseVector,
    pub sol: ApproxSolution,
    /// `grad f(y) + u - grad f_{x_tilde}(y)`.
    pub v: DenseVector,
    /// `lambda |y - x_tilde|^{d-1}`.
    pub product: f64,
}

#[derive(Debug, Clone)]
pub enum BisectionOutcome {
    LargeStep(Probe),
    NearOptimal(Probe),
    Failed {
        steps: usize,
        last_state: BisectionState,
        /// Last subproblem failure, if any.
        error: Option<String>,
    },
}

/// Work done by one search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub steps: usize,
    /// Derivative queries up to order d (one per Taylor model).
    pub oracle_calls: usize,
    pub gradient_calls: usize,
    pub ats_inner: usize,
}

/// Large-step window `(d! sigma_l / (L_d + M), d! sigma_u / (L_d + M))`.
pub fn window(p: &Problem, c: &SolverConfig) -> (f64, f64) {
    let scale = factorial(c.d) / (p.lipschitz(c.d) + c.reg);
    (scale * c.sigma_l, scale * c.sigma_u)
}

/// Builds the model at `x_tilde`, solves the subproblem and forms `v`.
pub fn probe(
    p: &Problem,
    c: &SolverConfig,
    x_tilde: DenseVector,
    lambda: f64,
    beta: f64,
    stats: &mut SearchStats,
) -> Result<Probe> {
    let m = TaylorModel::at(p, &x_tilde, c.reg, c.d)?;
    stats.oracle_calls += 1;
    let sol = ats::solve(&m, &p.h, lambda, &c.ats_config());
    let sol = sol?;
    stats.ats_inner += sol.inner_iterations;
    let grad_y = p.gradient(&sol.y);
    stats.gradient_calls += 1;
    let v = grad_y + &sol.u - m.gradient(&sol.y)?;
    let product = lambda * (&sol.y - &x_tilde).norm().powi(c.d as i32 - 1);
    Ok(Probe {
        beta,
        lambda,
        x_tilde,
        sol,
        v,
        product,
    })
}

fn near_optimal(pr: &Probe, c: &SolverConfig) -> bool {
    pr.v.norm() <= c.rho_bar && pr.sol.eps <= c.eps_bar
}

enum Verdict {
    Accept(BisectionOutcome),
    TooSmall,
    TooLarge,
}

fn classify(pr: Probe, c: &SolverConfig, lo: f64, hi: f64) -> Verdict {
    if near_optimal(&pr, c) {
        Verdict::Accept(BisectionOutcome::NearOptimal(pr))
    } else if pr.product >= lo && pr.product <= hi {
        Verdict::Accept(BisectionOutcome::LargeStep(pr))
    } else if pr.product > hi {
        Verdict::TooLarge
    } else {
        Verdict::TooSmall
    }
}

/// One outer iteration's search for `lambda`.
///
/// A subproblem failure at a trial point is treated like an oversized `lambda`
/// (the interval shrinks from above); `Failed` is reported only once the step
/// budget is spent.
pub fn search(
    p: &Problem,
    x_k: &DenseVector,
    y_k: &DenseVector,
    a_k: f64,
    c: &SolverConfig,
) -> (BisectionOutcome, SearchStats) {
    let (alpha_lo, alpha_hi) = window(p, c);
    let mut stats = SearchStats::default();
    let mut state = BisectionState {
        beta_lo: 0.0,
        beta_hi: 1.0,
        a_k,
        alpha_lo,
        alpha_hi,
        steps: 0,
    };
    if a_k <= 0.0 {
        return search_first(p, x_k, c, state, stats);
    }
    let mut last_error = None;
    while state.steps < c.max_bisect {
        state.steps += 1;
        stats.steps = state.steps;
        let beta = 0.5 * (state.beta_lo + state.beta_hi);
        let lambda = lambda_of_beta(a_k, beta);
        let x_tilde = x_of_beta(beta, x_k, y_k);
        match probe(p, c, x_tilde, lambda, beta, &mut stats) {
            Ok(pr) => match classify(pr, c, alpha_lo, alpha_hi) {
                Verdict::Accept(out) => return (out, stats),
                Verdict::TooLarge => state.beta_hi = beta,
                Verdict::TooSmall => state.beta_lo = beta,
            },
            Err(e) => {
                last_error = Some(e.to_string());
                state.beta_hi = beta;
            }
        }
    }
    let steps = state.steps;
    (
        BisectionOutcome::Failed {
            steps,
            last_state: state,
            error: last_error,
        },
        stats,
    )
}

/// `A = 0`: `x_tilde = x_0` for every `lambda`; bisect geometrically on `lambda`,
/// doubling the upper end from 1 until it overshoots the window.
fn search_first(
    p: &Problem,
    x0: &DenseVector,
    c: &SolverConfig,
    mut state: BisectionState,
    mut stats: SearchStats,
) -> (BisectionOutcome, SearchStats) {
    let (alpha_lo, alpha_hi) = (state.alpha_lo, state.alpha_hi);
    let mut lo = LAMBDA_MIN;
    let mut hi: Option<f64> = None;
    let mut lambda = 1.0;
    let mut last_error = None;
    while state.steps < c.max_bisect {
        state.steps += 1;
        stats.steps = state.steps;
        let verdict = match probe(p, c, x0.clone(), lambda, 1.0, &mut stats) {
            Ok(pr) => classify(pr, c, alpha_lo, alpha_hi),
            Err(e) => {
                last_error = Some(e.to_string());
                Verdict::TooLarge
            }
        };
        match verdict {
            Verdict::Accept(out) => return (out, stats),
            Verdict::TooLarge => hi = Some(lambda),
            Verdict::TooSmall => lo = lambda,
        }
        lambda = match hi {
            Some(h) => (lo * h).sqrt(),
            None => 2.0 * lambda,
        };
        if !lambda.is_finite() {
            break;
        }
    }
    let steps = state.steps;
    (
        BisectionOutcome::Failed {
            steps,
            last_state: state,
            error: last_error,
        },
        stats,
    )
}

/// Threshold above which every trial point either stops the method or clears
/// the lower end of the window; undefined for `d = 1`.
pub fn lambda_bar(p: &Problem, c: &SolverConfig) -> Option<f64> {
    if c.d < 2 {
        return None;
    }
    let (alpha, _) = window(p, c);
    let d = c.d as f64;
    let sigma = c.sigma_hat + c.sigma_u;
    let lm = p.lipschitz(c.d) + c.reg;
    let first = alpha.powf(1.0 / d)
        * ((1.0 + c.sigma_hat + lm / factorial(c.d) * alpha) / c.rho_bar).powf(1.0 - 1.0 / d);
    let second = (sigma * sigma * alpha.powf(2.0 / (d - 1.0)) / (2.0 * c.eps_bar)).powf((d - 1.0) / (d + 1.0));
    Some(first.max(second))
}

/// One row of the bisection-count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCountRow {
    pub problem: String,
    pub method: String,
    pub rho_bar: f64,
    pub eps_bar: f64,
    pub log2_inv_rho: f64,
    pub log2_inv_eps: f64,
    pub iterations: usize,
    pub max_steps: usize,
    pub mean_steps: f64,
}

pub fn step_count_report(traces: &[RunTrace]) -> Vec<StepCountRow> {
    traces
        .iter()
        .map(|t| {
            let (rho_bar, eps_bar) = t
                .config
                .as_ref()
                .map(|c| (c.rho_bar, c.eps_bar))
                .unwrap_or((f64::NAN, f64::NAN));
            let steps: Vec<usize> = t.records.iter().map(|r| r.bisect_steps).collect();
            let max_steps = steps.iter().copied().max().unwrap_or(0);
            let mean_steps = if steps.is_empty() {
                0.0
            } else {
                steps.iter().sum::<usize>() as f64 / steps.len() as f64
            };
            StepCountRow {
                problem: t.problem.clone(),
                method: t.method.clone(),
                rho_bar,
                eps_bar,
                log2_inv_rho: -rho_bar.log2(),
                log2_inv_eps: -eps_bar.log2(),
                iterations: t.records.len(),
                max_steps,
                mean_steps,
            }
        })
        .collect()
}
