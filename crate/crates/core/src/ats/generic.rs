use super::{certify, check_lambda, residual_ratio, ApproxSolution, AtsConfig};
use crate::error::{Error, Result};
use crate::multilinear::DenseVector;
use crate::oracle::NonsmoothTerm;
use crate::taylor::TaylorModel;

const STEP_GROWTH: f64 = 1.25;
const MAX_BACKTRACK: usize = 200;

/// Accelerated prox-gradient with backtracking and gradient restart on
/// `s(z) = f_x(x + z) + |z|^2 / (2 lambda)` plus `h(x + z)`.
///
/// Each iterate `y+ = prox_{t h}(x + w - t grad s(w))` yields the subgradient
/// `g_h = (w - z+)/t - grad s(w)` of `h` at `y+`, and `u = grad f_x(y+) + g_h`.
pub fn solve_generic(m: &TaylorModel, h: &NonsmoothTerm, lambda: f64, cfg: &AtsConfig) -> Result<ApproxSolution> {
    check_lambda(lambda)?;
    let sigma = cfg.stopping_sigma();
    let x = &m.anchor;
    let n = m.dim();

    let neg_g = -&m.bundle.gradient;
    if h.contains_subgradient(x, &neg_g, 0.0) {
        return Ok(ApproxSolution {
            y: x.clone(),
            u: DenseVector::zeros(n),
            eps: 0.0,
            residual_ratio: 0.0,
            inner_iterations: 0,
        });
    }

    let s_val = |z: &DenseVector| m.value_at_increment(z) + z.norm_squared() / (2.0 * lambda);
    let s_grad = |z: &DenseVector| m.gradient_at_increment(z) + z / lambda;

    let curvature = m.hessian_at_increment(&DenseVector::zeros(n)).norm() + 1.0 / lambda;
    let mut t = 1.0 / curvature;
    let mut z = DenseVector::zeros(n);
    let mut w = z.clone();
    let mut theta: f64 = 1.0;
    let mut best_ratio = f64::INFINITY;

    for it in 1..=cfg.max_inner {
        let gw = s_grad(&w);
        let sw = s_val(&w);
        let mut backtracked = false;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let y_next = h.prox(&(x + &w - &gw * t), t);
            let z_next = &y_next - x;
            let d = &z_next - &w;
            let model = sw + gw.dot(&d) + d.norm_squared() / (2.0 * t);
            let actual = s_val(&z_next);
            if actual.is_finite() && actual <= model + 1e-15 * sw.abs().max(1.0) {
                accepted = Some((y_next, z_next));
                break;
            }
            t *= 0.5;
            backtracked = true;
        }
        let (y_next, z_next) = accepted.ok_or(Error::NonFinite("prox-gradient backtracking"))?;

        let g_h = (&w - &z_next) / t - &gw;
        let u = m.gradient_at_increment(&z_next) + g_h;
        if certify(&y_next, &u, 0.0, lambda, x, sigma) {
            return Ok(ApproxSolution {
                residual_ratio: residual_ratio(&y_next, &u, 0.0, lambda, x),
                y: y_next,
                u,
                eps: 0.0,
                inner_iterations: it,
            });
        }
        best_ratio = best_ratio.min(residual_ratio(&y_next, &u, 0.0, lambda, x));

        let restart = (&w - &z_next).dot(&(&z_next - &z)) > 0.0;
        if restart {
            theta = 1.0;
            w = z_next.clone();
        } else {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            w = &z_next + (&z_next - &z) * ((theta - 1.0) / theta_next);
            theta = theta_next;
        }
        z = z_next;
        if !backtracked {
            t *= STEP_GROWTH;
        }
    }
    Err(Error::MaxInnerExceeded {
        iterations: cfg.max_inner,
        best_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ats::solve_d2;
    use crate::multilinear::DenseMatrix;
    use crate::oracle::DerivativeBundle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, n: usize, order: usize) -> TaylorModel {
        let b = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let bundle = DerivativeBundle {
            value: 0.0,
            gradient: DenseVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)),
            hessian: Some(b.tr_mul(&b)),
            third: None,
            order: 2,
        };
        let x = DenseVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        TaylorModel::new(x, bundle, rng.random_range(0.5..4.0), order).unwrap()
    }

    #[test]
    fn agrees_with_secular_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = AtsConfig::with_sigma(1e-9);
        for _ in 0..10 {
            let m = random_model(&mut rng, 4, 2);
            let lambda = rng.random_range(0.1..10.0);
            let a = solve_d2(&m, &NonsmoothTerm::Zero, lambda, &cfg).unwrap();
            let b = solve_generic(&m, &NonsmoothTerm::Zero, lambda, &cfg).unwrap();
            assert!((&a.y - &b.y).norm() < 1e-6);
        }
    }

    #[test]
    fn stationary_anchor_needs_no_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = random_model(&mut rng, 3, 2);
        m.bundle.gradient = DenseVector::from_vec(vec![0.05, -0.1, 0.0]);
        let h = NonsmoothTerm::L1 { weight: 0.2 };
        m.anchor = DenseVector::zeros(3);
        let s = solve_generic(&m, &h, 1.0, &AtsConfig::default()).unwrap();
        assert_eq!(s.inner_iterations, 0);
        assert_eq!(s.y, m.anchor);
    }

    #[test]
    fn l1_subgradient_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let weight = 0.7;
        let h = NonsmoothTerm::L1 { weight };
        for _ in 0..10 {
            let m = random_model(&mut rng, 5, 2);
            let s = solve_generic(&m, &h, rng.random_range(0.1..5.0), &AtsConfig::default()).unwrap();
            let sub = &s.u - m.gradient(&s.y).unwrap();
            for i in 0..5 {
                assert!(sub[i].abs() <= weight * (1.0 + 1e-12));
                if s.y[i] != 0.0 {
                    assert!((sub[i] - weight * s.y[i].signum()).abs() < 1e-12);
                }
            }
        }
    }
}
