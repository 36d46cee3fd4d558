//! The optimal d-th order tensor method: accelerated hybrid proximal
//! extragradient bookkeeping around a bisection-driven tensor step.

mod checks;

pub use checks::{
    certificate_report, check_potential, check_rate_bound, iteration_factor, CertificateReport, PotentialReport,
    PotentialRow, RateReport, RateRow,
};

use serde::{Deserialize, Serialize};

use crate::ats::{certificate_lhs, AtsConfig};
use crate::bisection::{self, BisectionOutcome, Probe};
use crate::error::{ConfigViolation, Error, Result};
use crate::multilinear::DenseVector;
use crate::oracle::Problem;

/// Below this step length the large-step condition carries no information.
pub const STATIONARY_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub d: usize,
    pub sigma_hat: f64,
    pub sigma_l: f64,
    pub sigma_u: f64,
    /// Regularization weight `M`.
    #[serde(rename = "M")]
    pub reg: f64,
    pub rho_bar: f64,
    pub eps_bar: f64,
    pub max_outer: usize,
    pub max_bisect: usize,
    pub ats: AtsConfig,
}

impl SolverConfig {
    /// Defaults for `p` at order `d`: `M = L_d`, or `M = 3 kappa^2 L_3` for a
    /// smooth third-order run.
    pub fn defaults(p: &Problem, d: usize) -> Self {
        let ats = AtsConfig::default();
        let reg = default_reg(p, d, ats.kappa);
        Self {
            d,
            sigma_hat: 0.1,
            sigma_l: 0.2,
            sigma_u: 0.8,
            reg,
            rho_bar: 1e-6,
            eps_bar: 1e-9,
            max_outer: 200,
            max_bisect: 200,
            ats,
        }
    }

    /// `sigma = sigma_hat + sigma_u`.
    pub fn sigma(&self) -> f64 {
        self.sigma_hat + self.sigma_u
    }

    /// The subproblem configuration, with the accuracy taken from `sigma_hat`.
    pub fn ats_config(&self) -> AtsConfig {
        AtsConfig {
            sigma_hat: self.sigma_hat,
            ..self.ats.clone()
        }
    }
}

pub fn default_reg(p: &Problem, d: usize, kappa: f64) -> f64 {
    if d == 3 && p.h.is_zero() {
        3.0 * kappa * kappa * p.lipschitz(3)
    } else {
        p.lipschitz(d.clamp(1, 3))
    }
}

/// Checks every constraint on `c` for problem `p`, reporting all violations at once.
pub fn validate_config(c: &SolverConfig, p: &Problem) -> Result<()> {
    let mut v = Vec::new();
    let mut push = |constraint: &'static str, detail: String| v.push(ConfigViolation { constraint, detail });
    if !(1..=3).contains(&c.d) {
        push("d in {1,2,3}", format!("d = {}", c.d));
    } else if c.d > p.max_order() {
        push("d <= problem order", format!("d = {} > {}", c.d, p.max_order()));
    }
    if !(c.sigma_hat >= 0.0 && c.sigma_hat < 1.0) {
        push("0 <= sigma_hat < 1", format!("sigma_hat = {}", c.sigma_hat));
    }
    if !(c.sigma_l > 0.0 && c.sigma_l < c.sigma_u && c.sigma_u < 1.0) {
        push(
            "0 < sigma_l < sigma_u < 1",
            format!("sigma_l = {}, sigma_u = {}", c.sigma_l, c.sigma_u),
        );
    }
    if !(c.sigma() < 1.0) {
        push("sigma_hat + sigma_u < 1", format!("sigma = {}", c.sigma()));
    }
    if (1..=3).contains(&c.d) {
        let e = c.d as i32 - 1;
        let lhs = c.sigma_l * (1.0 + c.sigma_hat).powi(e);
        let rhs = c.sigma_u * (1.0 - c.sigma_hat).powi(e);
        if !(lhs < rhs) {
            push(
                "sigma_l (1+sigma_hat)^(d-1) < sigma_u (1-sigma_hat)^(d-1)",
                format!("{lhs} >= {rhs}"),
            );
        }
        let l = p.lipschitz(c.d);
        if !(c.reg >= l) || !c.reg.is_finite() {
            push("M >= L_d", format!("M = {}, L_{} = {l}", c.reg, c.d));
        }
        if !(c.reg > 0.0) {
            push("M > 0", format!("M = {}", c.reg));
        }
        if c.d == 3 && p.h.is_zero() {
            let kappa = c.ats.kappa;
            if !(kappa > 1.0) {
                push("kappa > 1", format!("kappa = {kappa}"));
            } else {
                let need = 3.0 * kappa * kappa * p.lipschitz(3);
                if !(c.reg >= need * (1.0 - 1e-12)) {
                    push("M >= 3 kappa^2 L_3", format!("M = {}, 3 kappa^2 L_3 = {need}", c.reg));
                }
            }
        }
    }
    if !(c.rho_bar > 0.0) {
        push("rho_bar > 0", format!("rho_bar = {}", c.rho_bar));
    }
    if !(c.eps_bar > 0.0) {
        push("eps_bar > 0", format!("eps_bar = {}", c.eps_bar));
    }
    if c.max_bisect == 0 {
        push("max_bisect >= 1", "max_bisect = 0".into());
    }
    if c.ats.max_inner == 0 {
        push("max_inner >= 1", "max_inner = 0".into());
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(v))
    }
}

/// Positive root of `a^2 - lambda a - lambda A = 0`.
pub fn a_next(a_k: f64, lambda: f64) -> f64 {
    0.5 * (lambda + (lambda * lambda + 4.0 * lambda * a_k).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// `|v| <= rho_bar` and `eps <= eps_bar`.
    Converged,
    MaxIter,
    BisectFailed,
    /// `|y - x_tilde|` fell below [`STATIONARY_STEP`].
    Stationary,
    /// `F` rose far above `F(x_0)` (baselines only).
    Diverged,
    /// A baseline's subproblem could not be solved.
    SubproblemFailed,
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    /// `A_k` after the update.
    pub a_total: f64,
    pub a_k: f64,
    pub lambda: f64,
    pub beta: f64,
    pub bisect_steps: usize,
    pub ats_inner: usize,
    pub oracle_calls: usize,
    pub norm_v: f64,
    pub eps: f64,
    /// `F(y_k)`.
    pub f_y: f64,
    /// `|y_k - x_tilde_{k-1}|`.
    pub step_norm: f64,
    pub residual_ratio: f64,
    /// `lambda |y_k - x_tilde_{k-1}|^{d-1}`.
    pub product: f64,
    /// Whether the large-step window holds.
    pub large_step: bool,
    /// `|lambda u + y - x_tilde|^2 + 2 lambda eps`.
    pub cert_u_lhs: f64,
    /// `|lambda v + y - x_tilde|^2 + 2 lambda eps`.
    pub cert_v_lhs: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub problem: String,
    pub method: String,
    /// Present for runs of the optimal method.
    pub config: Option<SolverConfig>,
    /// `L_d` used by the run (zero for first-order baselines without one).
    pub lipschitz: f64,
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub failure: Option<String>,
    pub x0: Vec<f64>,
    pub final_y: Vec<f64>,
    pub f_x0: f64,
    /// Known optimal value, if any.
    pub f_star: Option<f64>,
    /// `|x_0 - x*|`.
    pub distance: Option<f64>,
    pub oracle_calls: usize,
    pub gradient_calls: usize,
    pub ats_inner: usize,
    pub bisect_steps: usize,
}

impl RunTrace {
    pub fn empty(p: &Problem, method: impl Into<String>, x0: &DenseVector) -> Self {
        Self {
            problem: p.name.clone(),
            method: method.into(),
            config: None,
            lipschitz: 0.0,
            records: Vec::new(),
            termination: Termination::MaxIter,
            failure: None,
            x0: x0.iter().copied().collect(),
            final_y: x0.iter().copied().collect(),
            f_x0: p.objective(x0),
            f_star: p.optimal_value(),
            distance: p.distance_to_optimum(x0),
            oracle_calls: 0,
            gradient_calls: 0,
            ats_inner: 0,
            bisect_steps: 0,
        }
    }

    /// `F(y_k) - F*` per record.
    pub fn gaps(&self) -> Option<Vec<f64>> {
        let fs = self.f_star?;
        Some(self.records.iter().map(|r| r.f_y - fs).collect())
    }

    /// First `k` with `F(y_k) - F* <= tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        let fs = self.f_star?;
        self.records.iter().find(|r| r.f_y - fs <= tol).map(|r| r.k)
    }

    pub fn final_gap(&self) -> Option<f64> {
        let fs = self.f_star?;
        match self.records.last() {
            Some(r) => Some(r.f_y - fs),
            None => Some(self.f_x0 - fs),
        }
    }
}

/// Iterates of the method between outer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub k: usize,
    pub a: f64,
    pub x: DenseVector,
    pub y: DenseVector,
}

impl State {
    pub fn start(x0: &DenseVector) -> Self {
        Self {
            k: 0,
            a: 0.0,
            x: x0.clone(),
            y: x0.clone(),
        }
    }
}

/// Result of one outer step.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Advanced { record: IterRecord, near_optimal: bool },
    BisectFailed { steps: usize, message: String },
}

/// Per-step work counters.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepCost {
    pub oracle_calls: usize,
    pub gradient_calls: usize,
    pub ats_inner: usize,
    pub bisect_steps: usize,
}

/// One outer iteration: bisection, then the A-HPE update of `A`, `x`, `y`.
pub fn step(state: &mut State, p: &Problem, c: &SolverConfig) -> Result<(StepOutcome, StepCost)> {
    let (outcome, stats) = bisection::search(p, &state.x, &state.y, state.a, c);
    let cost = StepCost {
        oracle_calls: stats.oracle_calls,
        gradient_calls: stats.gradient_calls,
        ats_inner: stats.ats_inner,
        bisect_steps: stats.steps,
    };
    let (probe, near_optimal) = match outcome {
        BisectionOutcome::LargeStep(pr) => (pr, false),
        BisectionOutcome::NearOptimal(pr) => (pr, true),
        BisectionOutcome::Failed { steps, last_state, error } => {
            let message = format!(
                "bisection failed after {steps} steps (beta in [{:.17e}, {:.17e}]){}",
                last_state.beta_lo,
                last_state.beta_hi,
                error.map(|e| format!(": {e}")).unwrap_or_default()
            );
            return Ok((StepOutcome::BisectFailed { steps, message }, cost));
        }
    };
    let Probe {
        lambda,
        x_tilde,
        sol,
        v,
        product,
        ..
    } = probe;

    let a = a_next(state.a, lambda);
    let total = state.a + a;
    let beta = a / total;
    let x_tilde_eq = &state.y * (state.a / total) + &state.x * (a / total);
    let drift = (&x_tilde_eq - &x_tilde).norm();
    if drift > 1e-10 * (1.0 + x_tilde.norm()) {
        return Err(Error::Inconsistent(format!(
            "averaged point differs from the bisection point by {drift:.3e}"
        )));
    }

    let (alpha_lo, alpha_hi) = bisection::window(p, c);
    let step_norm = (&sol.y - &x_tilde).norm();
    let record = IterRecord {
        k: state.k + 1,
        a_total: total,
        a_k: a,
        lambda,
        beta,
        bisect_steps: cost.bisect_steps,
        ats_inner: cost.ats_inner,
        oracle_calls: cost.oracle_calls,
        norm_v: v.norm(),
        eps: sol.eps,
        f_y: p.objective(&sol.y),
        step_norm,
        residual_ratio: sol.residual_ratio,
        product,
        large_step: product >= alpha_lo && product <= alpha_hi,
        cert_u_lhs: certificate_lhs(&sol.y, &sol.u, sol.eps, lambda, &x_tilde),
        cert_v_lhs: certificate_lhs(&sol.y, &v, sol.eps, lambda, &x_tilde),
        x: Vec::new(),
        y: sol.y.iter().copied().collect(),
        x_tilde: x_tilde.iter().copied().collect(),
        u: sol.u.iter().copied().collect(),
        v: v.iter().copied().collect(),
    };
    state.x -= &v * a;
    state.a = total;
    state.y = sol.y;
    state.k += 1;
    let mut record = record;
    record.x = state.x.iter().copied().collect();
    Ok((StepOutcome::Advanced { record, near_optimal }, cost))
}

/// Runs the method from `x0` until convergence, stagnation, failure or the iteration limit.
pub fn run(p: &Problem, x0: &DenseVector, c: &SolverConfig) -> Result<RunTrace> {
    validate_config(c, p)?;
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: x0.len(),
        });
    }
    let mut trace = RunTrace::empty(p, format!("optimal-d{}", c.d), x0);
    trace.config = Some(c.clone());
    trace.lipschitz = p.lipschitz(c.d);
    let mut state = State::start(x0);
    trace.termination = Termination::MaxIter;
    while state.k < c.max_outer {
        let (outcome, cost) = step(&mut state, p, c)?;
        trace.oracle_calls += cost.oracle_calls;
        trace.gradient_calls += cost.gradient_calls;
        trace.ats_inner += cost.ats_inner;
        trace.bisect_steps += cost.bisect_steps;
        match outcome {
            StepOutcome::BisectFailed { message, .. } => {
                trace.termination = Termination::BisectFailed;
                trace.failure = Some(message);
                break;
            }
            StepOutcome::Advanced { record, near_optimal } => {
                let step_norm = record.step_norm;
                trace.records.push(record);
                if near_optimal {
                    trace.termination = Termination::Converged;
                    break;
                }
                if step_norm <= STATIONARY_STEP {
                    trace.termination = Termination::Stationary;
                    break;
                }
            }
        }
    }
    trace.final_y = state.y.iter().copied().collect();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{lasso_problem, quartic_problem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_config_is_valid() {
        let p = quartic_problem(5, 42);
        for d in 1..=3 {
            validate_config(&SolverConfig::defaults(&p, d), &p).unwrap();
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let p = quartic_problem(5, 42);
        let mut c = SolverConfig::defaults(&p, 2);
        c.sigma_hat = 0.5;
        c.sigma_u = 0.6;
        c.reg = 0.5 * p.lipschitz(2);
        let Err(Error::InvalidConfig(v)) = validate_config(&c, &p) else {
            panic!("expected violations");
        };
        let names: Vec<_> = v.iter().map(|x| x.constraint).collect();
        assert!(names.contains(&"sigma_hat + sigma_u < 1"));
        assert!(names.contains(&"M >= L_d"));
    }

    #[test]
    fn third_order_needs_kappa_scaled_reg() {
        let p = quartic_problem(5, 42);
        let mut c = SolverConfig::defaults(&p, 3);
        c.reg = p.lipschitz(3);
        assert!(validate_config(&c, &p).is_err());
    }

    #[test]
    fn a_next_examples() {
        assert_eq!(a_next(0.0, 1.0), 1.0);
        assert_eq!(a_next(2.0, 1.0), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a_k = rng.random_range(0.0..100.0);
            let lam = rng.random_range(1e-3..100.0);
            let a = a_next(a_k, lam);
            assert!((a * a / (a_k + a) - lam).abs() <= 1e-12 * lam.max(1.0));
        }
    }

    #[test]
    fn zero_iterations_give_an_empty_trace() {
        let p = quartic_problem(5, 42);
        let mut c = SolverConfig::defaults(&p, 2);
        c.max_outer = 0;
        let t = run(&p, &p.start, &c).unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.termination, Termination::MaxIter);
    }

    #[test]
    fn stationary_start_converges_at_once() {
        let p = quartic_problem(5, 42);
        let c = SolverConfig::defaults(&p, 2);
        let t = run(&p, &DenseVector::zeros(5), &c).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert_eq!(t.records.len(), 1);
        assert!(t.records[0].norm_v <= c.rho_bar);
    }

    #[test]
    fn quartic_second_order_converges() {
        let p = quartic_problem(5, 42);
        let c = SolverConfig::defaults(&p, 2);
        let t = run(&p, &p.start, &c).unwrap();
        assert_eq!(t.termination, Termination::Converged, "{:?}", t.failure);
        assert!(t.final_gap().unwrap() <= 1e-8);
        for w in t.records.windows(2) {
            assert!(w[1].a_total > w[0].a_total);
        }
    }

    #[test]
    fn lasso_support_matches_reference() {
        let p = lasso_problem(20, 40, 42);
        let c = SolverConfig::defaults(&p, 2);
        let t = run(&p, &p.start, &c).unwrap();
        assert_eq!(t.termination, Termination::Converged, "{:?}", t.failure);
        let xs = p.known_optimum.as_ref().unwrap().point();
        for (a, b) in t.final_y.iter().zip(xs.iter()) {
            assert_eq!(*a == 0.0, *b == 0.0, "{a} vs {b}");
        }
        assert!(t.final_gap().unwrap() <= 1e-6);
    }
}
