use super::{check_lambda, finish, solve_generic, ApproxSolution, AtsConfig};
use crate::error::{Error, Result};
use crate::multilinear::{DenseMatrix, DenseVector, SymmetricSpectrum};
use crate::oracle::NonsmoothTerm;
use crate::taylor::TaylorModel;

const MAX_TAU_STEPS: usize = 500;

/// Minimizer of `a^T z + z^T A z / 2 + (gamma/4) |z|^4` for a fixed matrix
/// `A = scale * H + shift * I`, with the eigendecomposition of `H` computed once.
#[derive(Debug, Clone)]
pub struct QuarticStep {
    spectrum: SymmetricSpectrum,
    scale: f64,
    shift: f64,
    gamma: f64,
    tol: f64,
}

impl QuarticStep {
    pub fn new(h: &DenseMatrix, scale: f64, shift: f64, gamma: f64, tol: f64) -> Result<Self> {
        let spectrum = SymmetricSpectrum::new(h)?;
        Self::from_spectrum(spectrum, scale, shift, gamma, tol)
    }

    pub fn from_spectrum(spectrum: SymmetricSpectrum, scale: f64, shift: f64, gamma: f64, tol: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("quartic weight gamma = {gamma}")));
        }
        let step = Self {
            spectrum,
            scale,
            shift,
            gamma,
            tol,
        };
        let (lo, hi) = step.eigen_range();
        let floor = -1e-12 * hi.abs().max(1.0);
        if lo < floor {
            return Err(Error::NotPsd { min_eigenvalue: lo });
        }
        if gamma == 0.0 && lo <= 0.0 {
            return Err(Error::NotPsd { min_eigenvalue: lo });
        }
        Ok(step)
    }

    fn eigen_range(&self) -> (f64, f64) {
        let a = self.scale * self.spectrum.min_value() + self.shift;
        let b = self.scale * self.spectrum.max_value() + self.shift;
        (a.min(b), a.max(b))
    }

    fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        // rounding-level negatives are treated as zero
        self.spectrum.values.iter().map(move |l| (self.scale * l + self.shift).max(0.0))
    }

    /// Returns `(tau, z)` with `tau = |z|^2` and `z = -(A + gamma tau I)^{-1} a`.
    pub fn solve(&self, a: &DenseVector) -> Result<(f64, DenseVector)> {
        if a.len() != self.spectrum.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spectrum.dim(),
                found: a.len(),
            });
        }
        let anorm = a.norm();
        if anorm == 0.0 {
            return Ok((0.0, DenseVector::zeros(a.len())));
        }
        let a_rot = self.spectrum.to_eigenbasis(a);
        let mu: Vec<f64> = self.eigenvalues().collect();
        let gamma = self.gamma;
        let z_rot_at = |tau: f64| {
            DenseVector::from_iterator(
                a_rot.len(),
                a_rot.iter().zip(&mu).map(|(ai, m)| -ai / (m + gamma * tau)),
            )
        };
        if gamma == 0.0 {
            let z_rot = z_rot_at(0.0);
            return Ok((z_rot.norm_squared(), self.spectrum.from_eigenbasis(&z_rot)));
        }

        // psi(tau) = |z(tau)|^2 - tau is strictly decreasing and convex
        let psi = |tau: f64| -> (f64, f64) {
            let mut s = 0.0;
            let mut ds = 0.0;
            for (ai, m) in a_rot.iter().zip(&mu) {
                let den = m + gamma * tau;
                let q = ai * ai / (den * den);
                s += q;
                ds += -2.0 * gamma * q / den;
            }
            (s - tau, ds - 1.0)
        };
        let mut lo = 0.0;
        let mut hi = (anorm / gamma).powf(2.0 / 3.0);
        let mu_min = mu.iter().copied().fold(f64::INFINITY, f64::min);
        if mu_min > 0.0 {
            hi = hi.min((anorm / mu_min).powi(2));
        }
        let tol = self.tol.max(f64::EPSILON);
        let mut tau = hi;
        for _ in 0..MAX_TAU_STEPS {
            let (val, der) = psi(tau);
            if val.abs() <= tol * tau.max(f64::MIN_POSITIVE) {
                break;
            }
            if val > 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            let newton = tau - val / der;
            tau = if newton > lo && newton < hi && der.is_finite() {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                break;
            }
        }
        let z_rot = z_rot_at(tau);
        Ok((tau, self.spectrum.from_eigenbasis(&z_rot)))
    }
}

/// Minimizes `a^T z + z^T A z / 2 + (gamma/4) |z|^4` for symmetric PSD `A`
/// through the scalar equation in `tau = |z|^2`.
pub fn solve_tau(a_mat: &DenseMatrix, a: &DenseVector, gamma: f64, tol: f64) -> Result<(f64, DenseVector)> {
    QuarticStep::new(a_mat, 1.0, 0.0, gamma, tol)?.solve(a)
}

/// [`solve_tau`] for `A = scale * H + shift * I` with a precomputed spectrum of `H`.
pub fn solve_tau_spectral(
    spectrum: &SymmetricSpectrum,
    scale: f64,
    shift: f64,
    a: &DenseVector,
    gamma: f64,
    tol: f64,
) -> Result<(f64, DenseVector)> {
    QuarticStep::from_spectrum(spectrum.clone(), scale, shift, gamma, tol)?.solve(a)
}

/// Third-order subproblem for `h = 0` by the Bregman gradient method.
///
/// With `Omega(z) = f_x(x + z) - f(x) + |z|^2 / (2 lambda)` and the reference
/// function `rho(z) = z^T B z + c4 |z|^4`, where
/// `B = (k-1)/(2k) H + (k-1)/(2 lambda (k+1)) I` and `c4 = M (k-1) / (24k)`,
/// `Omega` is 1-strongly convex and `(k+1)/(k-1)`-smooth relative to `rho`.
pub fn solve_d3(m: &TaylorModel, h: &NonsmoothTerm, lambda: f64, cfg: &AtsConfig) -> Result<ApproxSolution> {
    solve_d3_traced(m, h, lambda, cfg).map(|(s, _)| s)
}

/// [`solve_d3`] that also returns `Omega` at every iterate, starting from `z = 0`.
pub fn solve_d3_traced(
    m: &TaylorModel,
    h: &NonsmoothTerm,
    lambda: f64,
    cfg: &AtsConfig,
) -> Result<(ApproxSolution, Vec<f64>)> {
    if m.order != 3 {
        return Err(Error::UnsupportedOrder {
            requested: m.order,
            supported: 3,
        });
    }
    check_lambda(lambda)?;
    let kappa = cfg.kappa;
    if !(kappa > 1.0) {
        return Err(Error::KappaTooSmall(kappa));
    }
    if !h.is_zero() {
        return solve_generic(m, h, lambda, cfg).map(|s| (s, Vec::new()));
    }
    let sigma = cfg.stopping_sigma();
    let n = m.dim();
    let omega = |z: &DenseVector| m.value_at_increment(z) - m.bundle.value + z.norm_squared() / (2.0 * lambda);
    let grad_omega = |z: &DenseVector| m.gradient_at_increment(z) + z / lambda;

    let mut z = DenseVector::zeros(n);
    let mut g = grad_omega(&z);
    let mut history = vec![0.0];
    if g.iter().all(|v| *v == 0.0) {
        let sol = finish(m, m.anchor.clone(), m.gradient_at_increment(&z), lambda, sigma, 0)?;
        return Ok((sol, history));
    }

    let l_rel = (kappa + 1.0) / (kappa - 1.0);
    let b_h = (kappa - 1.0) / (2.0 * kappa);
    let b_i = (kappa - 1.0) / (2.0 * lambda * (kappa + 1.0));
    let c4 = m.reg * (kappa - 1.0) / (24.0 * kappa);
    let hess = m.hessian().expect("order-3 model");
    // A = 2 L B, gamma = 4 L c4
    let step = QuarticStep::new(hess, 2.0 * l_rel * b_h, 2.0 * l_rel * b_i, 4.0 * l_rel * c4, cfg.tau_tol)?;
    let bz = |z: &DenseVector| (hess * z) * b_h + z * b_i;
    let grad_rho = |z: &DenseVector| bz(z) * 2.0 + z * (4.0 * c4 * z.norm_squared());

    for it in 1..=cfg.max_inner {
        let a = &g - grad_rho(&z) * l_rel;
        let (_, z_next) = step.solve(&a)?;
        z = z_next;
        g = grad_omega(&z);
        history.push(omega(&z));
        if lambda * g.norm() <= sigma * z.norm() {
            let u = m.gradient_at_increment(&z);
            let sol = finish(m, &m.anchor + &z, u, lambda, sigma, it)?;
            return Ok((sol, history));
        }
    }
    let u = m.gradient_at_increment(&z);
    Err(Error::MaxInnerExceeded {
        iterations: cfg.max_inner,
        best_ratio: super::residual_ratio(&(&m.anchor + &z), &u, 0.0, lambda, &m.anchor),
    })
}
