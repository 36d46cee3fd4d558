//! Approximate tensor subroutine: solvers for
//! `min_y f_x(y) + h(y) + |y - x|^2 / (2 lambda)`
//! that return a triplet `(y, u, eps)` with `u` in `(grad f_x + ∂_eps h)(y)` and
//! `|lambda u + y - x|^2 + 2 lambda eps <= sigma^2 |y - x|^2`.
//!
//! Every solver here produces `eps = 0`; for composite `h` the subgradient part
//! of `u` comes from the optimality condition of a prox step.

mod generic;
mod order1;
mod order2;
mod order3;

use serde::{Deserialize, Serialize};

pub use generic::solve_generic;
pub use order1::solve_d1;
pub use order2::solve_d2;
pub use order3::{solve_d3, solve_d3_traced, solve_tau, solve_tau_spectral, QuarticStep};

use crate::error::{Error, Result};
use crate::multilinear::DenseVector;
use crate::oracle::NonsmoothTerm;
use crate::taylor::TaylorModel;

/// Which solver family handles a subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AtsStrategy {
    /// Closed form (d = 1), secular equation (d = 2), Bregman gradient (d = 3),
    /// prox-gradient for composite d >= 2.
    #[default]
    Auto,
    /// Prox-gradient for every order.
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtsConfig {
    /// Target accuracy `sigma_hat` in `[0, 1)`.
    pub sigma_hat: f64,
    pub max_inner: usize,
    /// Relative-smoothness parameter for d = 3, `M = 3 kappa^2 L_3`.
    pub kappa: f64,
    /// Tolerance of the univariate quartic step.
    pub tau_tol: f64,
    /// Overrides the accuracy used by the inner stopping rule. Fault injection only:
    /// a value above `sigma_hat` yields solutions that fail the configured certificate.
    #[serde(default)]
    pub inner_sigma: Option<f64>,
    #[serde(default)]
    pub strategy: AtsStrategy,
}

impl Default for AtsConfig {
    fn default() -> Self {
        Self {
            sigma_hat: 0.1,
            max_inner: 10_000,
            kappa: 1.2,
            tau_tol: 1e-13,
            inner_sigma: None,
            strategy: AtsStrategy::Auto,
        }
    }
}

impl AtsConfig {
    pub fn with_sigma(sigma_hat: f64) -> Self {
        Self {
            sigma_hat,
            ..Self::default()
        }
    }

    /// Accuracy the inner loops stop on.
    pub fn stopping_sigma(&self) -> f64 {
        self.inner_sigma.unwrap_or(self.sigma_hat)
    }
}

/// A certified approximate solution `(y, u, eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSolution {
    pub y: DenseVector,
    pub u: DenseVector,
    pub eps: f64,
    /// `sqrt(|lambda u + y - x|^2 + 2 lambda eps) / |y - x|`.
    pub residual_ratio: f64,
    pub inner_iterations: usize,
}

/// Left-hand side of the certificate, `|lambda u + y - x|^2 + 2 lambda eps`.
pub fn certificate_lhs(y: &DenseVector, u: &DenseVector, eps: f64, lambda: f64, x: &DenseVector) -> f64 {
    (u * lambda + y - x).norm_squared() + 2.0 * lambda * eps
}

/// `sqrt(lhs) / |y - x|`; zero for an exact fixed point `y = x`, `lambda u = 0`, `eps = 0`.
pub fn residual_ratio(y: &DenseVector, u: &DenseVector, eps: f64, lambda: f64, x: &DenseVector) -> f64 {
    let lhs = certificate_lhs(y, u, eps, lambda, x);
    let step = (y - x).norm();
    if lhs == 0.0 {
        0.0
    } else if step == 0.0 {
        f64::INFINITY
    } else {
        lhs.sqrt() / step
    }
}

/// Whether `(y, u, eps)` is a `sigma_hat`-approximate solution at `(lambda, x)`.
pub fn certify(
    y: &DenseVector,
    u: &DenseVector,
    eps: f64,
    lambda: f64,
    x: &DenseVector,
    sigma_hat: f64,
) -> bool {
    if eps < 0.0 || !(lambda > 0.0) {
        return false;
    }
    let lhs = certificate_lhs(y, u, eps, lambda, x);
    lhs <= sigma_hat * sigma_hat * (y - x).norm_squared()
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("prox parameter lambda = {lambda}")))
    }
}

/// Packages `(y, u)` with `eps = 0`, or reports a missing certificate.
pub(crate) fn finish(
    m: &TaylorModel,
    y: DenseVector,
    u: DenseVector,
    lambda: f64,
    sigma: f64,
    inner_iterations: usize,
) -> Result<ApproxSolution> {
    let ratio = residual_ratio(&y, &u, 0.0, lambda, &m.anchor);
    if certify(&y, &u, 0.0, lambda, &m.anchor, sigma) {
        Ok(ApproxSolution {
            y,
            u,
            eps: 0.0,
            residual_ratio: ratio,
            inner_iterations,
        })
    } else {
        Err(Error::MaxInnerExceeded {
            iterations: inner_iterations,
            best_ratio: ratio,
        })
    }
}

/// Dispatches to the solver suited to the model order and `h`.
pub fn solve(m: &TaylorModel, h: &NonsmoothTerm, lambda: f64, cfg: &AtsConfig) -> Result<ApproxSolution> {
    if cfg.strategy == AtsStrategy::Generic {
        return solve_generic(m, h, lambda, cfg);
    }
    match (m.order, h.is_zero()) {
        (1, _) => solve_d1(m, h, lambda, cfg),
        (2, true) => solve_d2(m, h, lambda, cfg),
        (3, true) => solve_d3(m, h, lambda, cfg),
        _ => solve_generic(m, h, lambda, cfg),
    }
}

/// `psi(lambda; x) = lambda |y*(lambda) - x|^{d-1}` where `y*` is the exact
/// solution of the subproblem, computed to relative accuracy `1e-10`.
pub fn psi_residual(m: &TaylorModel, h: &NonsmoothTerm, lambda: f64, cfg: &AtsConfig) -> Result<f64> {
    let accurate = AtsConfig {
        sigma_hat: 1e-10,
        inner_sigma: None,
        max_inner: cfg.max_inner.max(200_000),
        ..cfg.clone()
    };
    let sol = solve(m, h, lambda, &accurate)?;
    Ok(lambda * (&sol.y - &m.anchor).norm().powi(m.order as i32 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DenseVector {
        DenseVector::from_vec(xs.to_vec())
    }

    #[test]
    fn exact_solution_certifies_for_any_sigma() {
        // lambda u + y - x = 0
        let x = v(&[1.0, 2.0]);
        let y = v(&[0.0, 1.0]);
        let u = v(&[0.5, 0.5]);
        for sigma in [0.0, 0.3, 0.99] {
            assert!(certify(&y, &u, 0.0, 2.0, &x, sigma));
        }
        assert!(certify(&x, &v(&[0.0, 0.0]), 0.0, 1.0, &x, 0.0));
    }

    #[test]
    fn certificate_direct_substitution() {
        let x = v(&[0.0]);
        let y = v(&[1.0]);
        let u = v(&[-0.5]);
        assert!(certify(&y, &u, 0.0, 1.0, &x, 0.5));
        assert!(!certify(&y, &u, 0.0, 1.0, &x, 0.4));
        assert_eq!(residual_ratio(&y, &u, 0.0, 1.0, &x), 0.5);
    }

    #[test]
    fn eps_enters_the_certificate() {
        let x = v(&[0.0]);
        let y = v(&[1.0]);
        let u = v(&[-1.0]);
        assert!(certify(&y, &u, 0.02, 1.0, &x, 0.2));
        assert!(!certify(&y, &u, 0.03, 1.0, &x, 0.2));
        assert!(!certify(&y, &u, -0.01, 1.0, &x, 0.2));
    }
}
