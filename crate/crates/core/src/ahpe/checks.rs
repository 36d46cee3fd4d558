//! Runtime verification of the per-iteration certificates and of the
//! potential, recursion and rate inequalities, evaluated from a trace.

use serde::{Deserialize, Serialize};

use super::{RunTrace, SolverConfig};
use crate::ats::certificate_lhs;
use crate::multilinear::DenseVector;
use crate::oracle::Problem;
use crate::taylor::factorial;

/// Absolute part of the floating-point allowance on the potential inequalities.
const POTENTIAL_SLACK: f64 = 1e-10;
/// Relative allowance on the recursion for `A_k`.
const RECURSION_SLACK: f64 = 1e-10;

fn vec_of(xs: &[f64]) -> DenseVector {
    DenseVector::from_column_slice(xs)
}

fn window(c: &SolverConfig, lipschitz: f64) -> (f64, f64) {
    let scale = factorial(c.d) / (lipschitz + c.reg);
    (scale * c.sigma_l, scale * c.sigma_u)
}

/// Per-record certificate verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub k: usize,
    /// `|lambda u + y - x_tilde|^2 + 2 lambda eps <= sigma_hat^2 |y - x_tilde|^2`.
    pub approx_solution: bool,
    /// Two-sided window; `None` for a stopping record outside it.
    pub large_step: Option<bool>,
    /// Same inequality with `v` and `sigma = sigma_hat + sigma_u`; `None` when the
    /// window's upper side (its hypothesis) does not hold.
    pub extragradient: Option<bool>,
    /// `F(x*) >= F(y) + <v, x* - y> - eps`, when the optimum is known.
    pub eps_subgradient: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub rows: Vec<CertificateRow>,
    pub violations: usize,
    /// Records accepted only through the stopping test.
    pub flagged: usize,
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.violations == 0
    }
}

/// Recomputes every per-iteration certificate from the stored vectors.
pub fn certificate_report(trace: &RunTrace, p: &Problem) -> CertificateReport {
    let mut rows = Vec::new();
    let mut violations = 0;
    let mut flagged = 0;
    let Some(c) = trace.config.as_ref() else {
        return CertificateReport {
            rows,
            violations,
            flagged,
        };
    };
    let (lo, hi) = window(c, trace.lipschitz);
    let sigma = c.sigma();
    let xstar = p.known_optimum.as_ref().map(|o| (o.point(), o.value));
    for r in &trace.records {
        let y = vec_of(&r.y);
        let xt = vec_of(&r.x_tilde);
        let u = vec_of(&r.u);
        let v = vec_of(&r.v);
        let step2 = (&y - &xt).norm_squared();
        let approx = certificate_lhs(&y, &u, r.eps, r.lambda, &xt) <= c.sigma_hat * c.sigma_hat * step2;
        let product = r.lambda * step2.sqrt().powi(c.d as i32 - 1);
        let in_window = product >= lo && product <= hi;
        let large_step = if in_window || r.large_step { Some(in_window) } else { None };
        let extragradient =
            (product <= hi).then(|| certificate_lhs(&y, &v, r.eps, r.lambda, &xt) <= sigma * sigma * step2);
        let eps_subgradient = xstar.as_ref().map(|(xs, fs)| {
            let rhs = r.f_y + v.dot(&(xs - &y)) - r.eps;
            *fs >= rhs - 1e-12 * (1.0 + fs.abs() + r.f_y.abs())
        });
        let failed = !approx
            || large_step == Some(false)
            || extragradient == Some(false)
            || eps_subgradient == Some(false);
        if failed {
            violations += 1;
        }
        if large_step.is_none() || extragradient.is_none() {
            flagged += 1;
        }
        rows.push(CertificateRow {
            k: r.k,
            approx_solution: approx,
            large_step,
            extragradient,
            eps_subgradient,
        });
    }
    CertificateReport {
        rows,
        violations,
        flagged,
    }
}

/// Whether record `j` satisfies the relation the potential argument needs.
fn hpe_relation(trace: &RunTrace, c: &SolverConfig, j: usize) -> bool {
    let r = &trace.records[j];
    let y = vec_of(&r.y);
    let xt = vec_of(&r.x_tilde);
    let v = vec_of(&r.v);
    let sigma = c.sigma();
    certificate_lhs(&y, &v, r.eps, r.lambda, &xt) <= sigma * sigma * (&y - &xt).norm_squared()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialRow {
    pub k: usize,
    /// Left side of `|x* - x_k|^2/2 + A_k (F(y_k) - F*) + (1 - sigma^2)/2 S_k <= D^2/2`.
    pub potential: f64,
    pub half_d2: f64,
    pub potential_ok: bool,
    /// `S_k = sum_j A_j / lambda_j |y_j - x_tilde_{j-1}|^2`.
    pub sum: f64,
    pub sum_bound: f64,
    pub sum_ok: bool,
    /// `A_k` against `(sum_j sqrt(lambda_j))^2 / 4`.
    pub a_total: f64,
    pub sqrt_lambda_bound: f64,
    pub sqrt_lambda_ok: bool,
    /// Whether every record up to `k` satisfies the extragradient relation.
    pub in_hypothesis: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub rows: Vec<PotentialRow>,
    pub violations: usize,
}

impl PotentialReport {
    pub fn all_pass(&self) -> bool {
        self.violations == 0
    }
}

/// Potential inequality, its summed consequence and the `A_k` growth bound,
/// per record. `None` without a known optimum or solver configuration.
pub fn check_potential(trace: &RunTrace, p: &Problem) -> Option<PotentialReport> {
    let c = trace.config.as_ref()?;
    let opt = p.known_optimum.as_ref()?;
    let xstar = opt.point();
    let fstar = opt.value;
    let x0 = vec_of(&trace.x0);
    let dist = (&x0 - &xstar).norm();
    let half_d2 = 0.5 * dist * dist;
    let sigma2 = c.sigma() * c.sigma();
    let mut rows = Vec::new();
    let mut violations = 0;
    let mut sum = 0.0;
    let mut sqrt_sum = 0.0;
    let mut in_hypothesis = true;
    for (j, r) in trace.records.iter().enumerate() {
        in_hypothesis &= hpe_relation(trace, c, j);
        sum += r.a_total / r.lambda * r.step_norm * r.step_norm;
        sqrt_sum += r.lambda.sqrt();
        let xk = vec_of(&r.x);
        let potential =
            0.5 * (&xstar - &xk).norm_squared() + r.a_total * (r.f_y - fstar) + 0.5 * (1.0 - sigma2) * sum;
        let slack = POTENTIAL_SLACK * (1.0 + half_d2) + r.a_total * 4.0 * f64::EPSILON * fstar.abs();
        let potential_ok = potential <= half_d2 + slack;
        let sum_bound = dist * dist / (1.0 - sigma2);
        let sum_ok = sum <= sum_bound + slack / (1.0 - sigma2);
        let sqrt_lambda_bound = 0.25 * sqrt_sum * sqrt_sum;
        let sqrt_lambda_ok = r.a_total >= sqrt_lambda_bound * (1.0 - RECURSION_SLACK);
        if !sqrt_lambda_ok || (in_hypothesis && !(potential_ok && sum_ok)) {
            violations += 1;
        }
        rows.push(PotentialRow {
            k: r.k,
            potential,
            half_d2,
            potential_ok,
            sum,
            sum_bound,
            sum_ok,
            a_total: r.a_total,
            sqrt_lambda_bound,
            sqrt_lambda_ok,
            in_hypothesis,
        });
    }
    Some(PotentialReport { rows, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub k: usize,
    pub gap: f64,
    pub bound: f64,
    pub bound_ok: bool,
    /// `(1/4) C^{-2p/q} (sum_j A_j^{1/q})^{2p}`; `None` for `d = 1`.
    pub recursion_bound: Option<f64>,
    pub recursion_ok: Option<bool>,
    /// `sum_j A_j / lambda_j^{(d+1)/(d-1)}` against `C`; `None` for `d = 1`.
    pub lambda_sum: Option<f64>,
    pub lambda_sum_ok: Option<bool>,
    pub lower_bound: f64,
    pub lower_ok: bool,
    /// Every record up to `k` is a large step satisfying the extragradient relation.
    pub in_hypothesis: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `C = D^2 / (1 - sigma^2) (d! sigma_l / (L_d + M))^{-2/(d-1)}`; `None` for `d = 1`.
    pub c_constant: Option<f64>,
    pub rows: Vec<RateRow>,
    pub violations: usize,
}

impl RateReport {
    pub fn all_pass(&self) -> bool {
        self.violations == 0
    }
}

/// Coefficient of `k^{-(3d+1)/2}` in the rate bound, before `D^{d+1} (L_d + M)`.
pub fn rate_coefficient(c: &SolverConfig) -> f64 {
    let d = c.d as f64;
    let sigma2 = c.sigma() * c.sigma();
    ((d + 1.0) / 2.0).powf((3.0 * d + 1.0) / 2.0) * 2f64.powi(c.d as i32)
        / ((1.0 - sigma2).powf((d - 1.0) / 2.0) * factorial(c.d) * c.sigma_l)
}

/// `C`, or `None` for `d = 1`.
pub fn c_constant(c: &SolverConfig, lipschitz: f64, dist: f64) -> Option<f64> {
    if c.d < 2 {
        return None;
    }
    let alpha = factorial(c.d) * c.sigma_l / (lipschitz + c.reg);
    Some(dist * dist / (1.0 - c.sigma() * c.sigma()) * alpha.powf(-2.0 / (c.d as f64 - 1.0)))
}

/// Rate bound, recursion for `A_k`, the sum bound behind it and the uniform lower
/// bound on `A_k`, per record.
pub fn check_rate_bound(trace: &RunTrace, p: &Problem) -> Option<RateReport> {
    let c = trace.config.as_ref()?;
    let opt = p.known_optimum.as_ref()?;
    let xstar = opt.point();
    let dist = (vec_of(&trace.x0) - &xstar).norm();
    let lm = trace.lipschitz + c.reg;
    let d = c.d as f64;
    let coef = rate_coefficient(c) * dist.powi(c.d as i32 + 1) * lm;
    let cc = c_constant(c, trace.lipschitz, dist);
    let (q, pp) = if c.d >= 2 {
        ((3.0 * d + 1.0) / (d - 1.0), (3.0 * d + 1.0) / (2.0 * d + 2.0))
    } else {
        (f64::INFINITY, 1.0)
    };
    let sigma2 = c.sigma() * c.sigma();
    let lower_bound = factorial(c.d) * c.sigma_l
        / (lm * (2.0 / (1.0 - sigma2).sqrt() + 2.0).powi(c.d as i32 - 1) * dist.powi(c.d as i32 - 1));

    let mut rows = Vec::new();
    let mut violations = 0;
    let mut a_pow_sum = 0.0;
    let mut lam_sum = 0.0;
    let mut in_hypothesis = true;
    for (j, r) in trace.records.iter().enumerate() {
        in_hypothesis &= r.large_step && hpe_relation(trace, c, j);
        let k = r.k as f64;
        let gap = r.f_y - opt.value;
        let bound = coef * k.powf(-(3.0 * d + 1.0) / 2.0);
        let bound_ok = gap <= bound;
        let (recursion_bound, recursion_ok, lambda_sum, lambda_sum_ok) = match cc {
            Some(cv) => {
                a_pow_sum += r.a_total.powf(1.0 / q);
                lam_sum += r.a_total / r.lambda.powf((d + 1.0) / (d - 1.0));
                let rb = 0.25 * cv.powf(-2.0 * pp / q) * a_pow_sum.powf(2.0 * pp);
                (
                    Some(rb),
                    Some(r.a_total >= rb * (1.0 - RECURSION_SLACK)),
                    Some(lam_sum),
                    Some(lam_sum <= cv * (1.0 + RECURSION_SLACK)),
                )
            }
            None => (None, None, None, None),
        };
        let lower_ok = r.a_total >= lower_bound * (1.0 - RECURSION_SLACK);
        let failed = !bound_ok || recursion_ok == Some(false) || lambda_sum_ok == Some(false) || !lower_ok;
        if in_hypothesis && failed {
            violations += 1;
        }
        rows.push(RateRow {
            k: r.k,
            gap,
            bound,
            bound_ok,
            recursion_bound,
            recursion_ok,
            lambda_sum,
            lambda_sum_ok,
            lower_bound,
            lower_ok,
            in_hypothesis,
        });
    }
    Some(RateReport {
        c_constant: cc,
        rows,
        violations,
    })
}

/// Outer-iteration factor of the oracle-complexity bound:
/// `(d+1)/2 (2^d / ((1-sigma^2)^{(d-1)/2} d! sigma_l))^{2/(3d+1)} ((L_d+M) D^{d+1} / eps)^{2/(3d+1)}`.
pub fn iteration_factor(c: &SolverConfig, lipschitz: f64, dist: f64, eps: f64) -> f64 {
    let d = c.d as f64;
    let sigma2 = c.sigma() * c.sigma();
    let e = 2.0 / (3.0 * d + 1.0);
    let inner = 2f64.powi(c.d as i32) / ((1.0 - sigma2).powf((d - 1.0) / 2.0) * factorial(c.d) * c.sigma_l);
    (d + 1.0) / 2.0 * inner.powf(e) * ((lipschitz + c.reg) * dist.powf(d + 1.0) / eps).powf(e)
}
