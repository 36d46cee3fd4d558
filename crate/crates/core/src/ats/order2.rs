use super::{check_lambda, finish, solve_generic, ApproxSolution, AtsConfig};
use crate::error::{Error, Result};
use crate::multilinear::{DenseVector, SymmetricSpectrum};
use crate::oracle::NonsmoothTerm;
use crate::taylor::TaylorModel;

const RADIAL_TOL: f64 = 1e-12;
const MAX_RADIAL_STEPS: usize = 400;

/// Second-order subproblem.
///
/// For `h = 0` the stationarity condition `g + (H + (M r/2 + 1/lambda) I) z = 0`
/// with `r = |z|` is reduced to a scalar equation in `r`, solved by bisection
/// in the eigenbasis of `H`. Composite `h` goes through [`solve_generic`].
pub fn solve_d2(m: &TaylorModel, h: &NonsmoothTerm, lambda: f64, cfg: &AtsConfig) -> Result<ApproxSolution> {
    if m.order != 2 {
        return Err(Error::UnsupportedOrder {
            requested: m.order,
            supported: 2,
        });
    }
    check_lambda(lambda)?;
    if !h.is_zero() {
        return solve_generic(m, h, lambda, cfg);
    }
    let x = &m.anchor;
    let g = &m.bundle.gradient;
    if g.iter().all(|v| *v == 0.0) {
        return finish(m, x.clone(), g.clone(), lambda, cfg.stopping_sigma(), 0);
    }
    let hess = m.hessian().expect("order-2 model");
    let spectrum = SymmetricSpectrum::new(hess)?;
    let (z, steps) = radial_solve(&spectrum, g, m.reg, lambda)?;
    let y = x + &z;
    let u = m.gradient_at_increment(&z);
    finish(m, y, u, lambda, cfg.stopping_sigma(), steps)
}

/// Returns `z` with `|z| = r` solving the radial equation, and the bisection count.
fn radial_solve(
    spectrum: &SymmetricSpectrum,
    g: &DenseVector,
    reg: f64,
    lambda: f64,
) -> Result<(DenseVector, usize)> {
    let g_rot = spectrum.to_eigenbasis(g);
    let base_shift = spectrum.min_value() + 1.0 / lambda;
    let half_reg = 0.5 * reg;
    let z_of = |r: f64| spectrum.solve_shifted_in_basis(1.0, half_reg * r + 1.0 / lambda, &g_rot);

    if half_reg == 0.0 {
        if base_shift <= 0.0 {
            return Err(Error::RadialRoot(format!(
                "H + I/lambda is not positive definite (min eigenvalue {base_shift:.3e})"
            )));
        }
        let z = -spectrum.from_eigenbasis(&z_of(0.0));
        return Ok((z, 0));
    }

    // |z(r)| is finite and decreasing on (r_lo, inf)
    let r_lo = if base_shift > 0.0 {
        0.0
    } else {
        -base_shift / half_reg
    };
    let phi = |r: f64| z_of(r).norm() - r;

    let mut lo = r_lo;
    let mut hi = if r_lo > 0.0 { 2.0 * r_lo } else { 1.0 };
    let mut grow = 0;
    while phi(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 2000 || !hi.is_finite() {
            return Err(Error::RadialRoot("no upper bracket for the radial equation".into()));
        }
    }
    let mut steps = 0;
    let mut r = 0.5 * (lo + hi);
    while steps < MAX_RADIAL_STEPS {
        steps += 1;
        r = 0.5 * (lo + hi);
        let val = phi(r);
        if !val.is_finite() {
            lo = r;
            continue;
        }
        if val.abs() <= RADIAL_TOL * r.max(f64::MIN_POSITIVE) * 1e-3 || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if val > 0.0 {
            lo = r;
        } else {
            hi = r;
        }
    }
    let z_rot = z_of(r);
    let resid = (z_rot.norm() - r).abs();
    if !(resid <= RADIAL_TOL * r.max(1.0)) {
        return Err(Error::RadialRoot(format!(
            "radial residual {resid:.3e} after {steps} steps"
        )));
    }
    Ok((-spectrum.from_eigenbasis(&z_rot), steps))
}
