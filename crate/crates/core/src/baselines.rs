//! Reference methods sharing the [`RunTrace`] format: proximal gradient descent,
//! its accelerated variant, and the basic (non-accelerated) tensor method.

use serde::{Deserialize, Serialize};

use crate::ahpe::{default_reg, IterRecord, RunTrace, Termination};
use crate::ats::{self, AtsConfig};
use crate::error::{Error, Result};
use crate::multilinear::DenseVector;
use crate::oracle::Problem;
use crate::taylor::TaylorModel;

/// Prox parameter standing in for "no prox term" in the basic tensor method.
///
/// Larger values make the subproblem certificate unattainable in double
/// precision: `lambda u` and `y - x` cancel to about `lambda * M * 1e-16`.
pub const BASIC_TENSOR_LAMBDA: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMethod {
    Gd,
    Agd,
    BasicTensor { d: usize },
}

impl BaselineMethod {
    pub fn label(&self) -> String {
        match self {
            Self::Gd => "gd".into(),
            Self::Agd => "agd".into(),
            Self::BasicTensor { d } => format!("basic-d{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// Gradient step; `1 / L_1` when absent.
    pub step: Option<f64>,
    /// Regularization weight `M` for the tensor method; the solver default when absent.
    pub reg: Option<f64>,
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the gradient-mapping norm drops to this value.
    pub tol: f64,
    pub ats: AtsConfig,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self {
            method,
            step: None,
            reg: None,
            lambda: BASIC_TENSOR_LAMBDA,
            max_iter: 10_000,
            tol: 1e-10,
            ats: AtsConfig::default(),
        }
    }
}

pub fn run_baseline(p: &Problem, x0: &DenseVector, cfg: &BaselineConfig) -> Result<RunTrace> {
    match cfg.method {
        BaselineMethod::Gd => run_gd(p, x0, cfg),
        BaselineMethod::Agd => run_agd(p, x0, cfg),
        BaselineMethod::BasicTensor { d } => run_basic_tensor(p, x0, cfg, d),
    }
}

fn check_start(p: &Problem, x0: &DenseVector) -> Result<()> {
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: x0.len(),
        });
    }
    Ok(())
}

fn step_size(p: &Problem, cfg: &BaselineConfig) -> Result<f64> {
    let t = cfg.step.unwrap_or(1.0 / p.lipschitz(1));
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::InvalidArgument(format!("gradient step {t}")))
    }
}

fn diverged(trace: &RunTrace, f: f64) -> bool {
    !f.is_finite() || f > trace.f_x0 + 10.0 * trace.f_x0.abs().max(1.0)
}

fn record(k: usize, f_y: f64, y: &DenseVector, prev: &DenseVector, norm_v: f64, lambda: f64) -> IterRecord {
    IterRecord {
        k,
        a_total: 0.0,
        a_k: 0.0,
        lambda,
        beta: 0.0,
        bisect_steps: 0,
        ats_inner: 0,
        oracle_calls: 1,
        norm_v,
        eps: 0.0,
        f_y,
        step_norm: (y - prev).norm(),
        residual_ratio: 0.0,
        product: 0.0,
        large_step: false,
        cert_u_lhs: 0.0,
        cert_v_lhs: 0.0,
        x: Vec::new(),
        y: y.iter().copied().collect(),
        x_tilde: prev.iter().copied().collect(),
        u: Vec::new(),
        v: Vec::new(),
    }
}

/// Proximal gradient descent with a fixed step.
pub fn run_gd(p: &Problem, x0: &DenseVector, cfg: &BaselineConfig) -> Result<RunTrace> {
    check_start(p, x0)?;
    let t = step_size(p, cfg)?;
    let mut trace = RunTrace::empty(p, "gd", x0);
    trace.lipschitz = p.lipschitz(1);
    let mut x = x0.clone();
    for k in 1..=cfg.max_iter {
        let g = p.gradient(&x);
        trace.gradient_calls += 1;
        trace.oracle_calls += 1;
        let next = p.h.prox(&(&x - &g * t), t);
        let mapping = (&x - &next).norm() / t;
        let f = p.objective(&next);
        trace.records.push(record(k, f, &next, &x, mapping, t));
        x = next;
        if diverged(&trace, f) {
            trace.termination = Termination::Diverged;
            break;
        }
        if mapping <= cfg.tol {
            trace.termination = Termination::Converged;
            break;
        }
    }
    trace.final_y = x.iter().copied().collect();
    Ok(trace)
}

/// Accelerated proximal gradient (FISTA) with a fixed step.
pub fn run_agd(p: &Problem, x0: &DenseVector, cfg: &BaselineConfig) -> Result<RunTrace> {
    check_start(p, x0)?;
    let t = step_size(p, cfg)?;
    let mut trace = RunTrace::empty(p, "agd", x0);
    trace.lipschitz = p.lipschitz(1);
    let mut x = x0.clone();
    let mut w = x0.clone();
    let mut theta: f64 = 1.0;
    for k in 1..=cfg.max_iter {
        let g = p.gradient(&w);
        trace.gradient_calls += 1;
        trace.oracle_calls += 1;
        let next = p.h.prox(&(&w - &g * t), t);
        let mapping = (&w - &next).norm() / t;
        let f = p.objective(&next);
        trace.records.push(record(k, f, &next, &x, mapping, t));
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        w = &next + (&next - &x) * ((theta - 1.0) / theta_next);
        theta = theta_next;
        x = next;
        if diverged(&trace, f) {
            trace.termination = Termination::Diverged;
            break;
        }
        if mapping <= cfg.tol {
            trace.termination = Termination::Converged;
            break;
        }
    }
    trace.final_y = x.iter().copied().collect();
    Ok(trace)
}

/// Repeated regularized model minimization `x+ = argmin f_x(y) + h(y)`, solved
/// as a subproblem with a negligible prox term (`lambda = 1e6`).
pub fn run_basic_tensor(p: &Problem, x0: &DenseVector, cfg: &BaselineConfig, d: usize) -> Result<RunTrace> {
    check_start(p, x0)?;
    if !(1..=3).contains(&d) || d > p.max_order() {
        return Err(Error::UnsupportedOrder {
            requested: d,
            supported: p.max_order().min(3),
        });
    }
    let reg = cfg.reg.unwrap_or_else(|| default_reg(p, d, cfg.ats.kappa));
    if !(reg >= p.lipschitz(d)) {
        return Err(Error::InvalidArgument(format!(
            "basic tensor method needs M >= L_{d}: M = {reg}, L_{d} = {}",
            p.lipschitz(d)
        )));
    }
    let mut trace = RunTrace::empty(p, format!("basic-d{d}"), x0);
    trace.lipschitz = p.lipschitz(d);
    let mut x = x0.clone();
    for k in 1..=cfg.max_iter {
        let m = TaylorModel::at(p, &x, reg, d)?;
        trace.oracle_calls += 1;
        let sol = match ats::solve(&m, &p.h, cfg.lambda, &cfg.ats) {
            Ok(s) => s,
            Err(e) => {
                trace.termination = Termination::SubproblemFailed;
                trace.failure = Some(e.to_string());
                break;
            }
        };
        trace.ats_inner += sol.inner_iterations;
        let grad = p.gradient(&sol.y);
        trace.gradient_calls += 1;
        let stationarity = p.h.min_norm_subgradient(&sol.y, &grad).norm();
        let f = p.objective(&sol.y);
        let mut r = record(k, f, &sol.y, &x, stationarity, cfg.lambda);
        r.ats_inner = sol.inner_iterations;
        r.residual_ratio = sol.residual_ratio;
        trace.records.push(r);
        let moved = (&sol.y - &x).norm();
        x = sol.y;
        if diverged(&trace, f) {
            trace.termination = Termination::Diverged;
            break;
        }
        if stationarity <= cfg.tol || moved == 0.0 {
            trace.termination = Termination::Converged;
            break;
        }
    }
    trace.final_y = x.iter().copied().collect();
    Ok(trace)
}
