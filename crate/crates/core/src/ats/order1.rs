use super::{check_lambda, finish, ApproxSolution, AtsConfig};
use crate::error::{Error, Result};
use crate::oracle::NonsmoothTerm;
use crate::taylor::TaylorModel;

/// First-order subproblem. The smooth part `g^T z + (M + 1/lambda) |z|^2 / 2` is an
/// isotropic quadratic, so a single prox step with `t = 1/(M + 1/lambda)` is exact.
pub fn solve_d1(m: &TaylorModel, h: &NonsmoothTerm, lambda: f64, cfg: &AtsConfig) -> Result<ApproxSolution> {
    if m.order != 1 {
        return Err(Error::UnsupportedOrder {
            requested: m.order,
            supported: 1,
        });
    }
    check_lambda(lambda)?;
    let x = &m.anchor;
    let g = &m.bundle.gradient;
    let t = 1.0 / (m.reg + 1.0 / lambda);
    let shifted = x - g * t;
    let y = h.prox(&shifted, t);
    let subgrad = (&shifted - &y) / t;
    let u = m.gradient(&y)? + subgrad;
    finish(m, y, u, lambda, cfg.stopping_sigma(), 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilinear::DenseVector;
    use crate::oracle::DerivativeBundle;

    fn linear_model(x: &[f64], g: &[f64], reg: f64) -> TaylorModel {
        let bundle = DerivativeBundle {
            value: 0.0,
            gradient: DenseVector::from_vec(g.to_vec()),
            hessian: None,
            third: None,
            order: 1,
        };
        TaylorModel::new(DenseVector::from_vec(x.to_vec()), bundle, reg, 1).unwrap()
    }

    #[test]
    fn stationary_anchor_stays_put() {
        let m = linear_model(&[1.0, -2.0], &[0.0, 0.0], 3.0);
        let s = solve_d1(&m, &NonsmoothTerm::Zero, 0.7, &AtsConfig::default()).unwrap();
        assert_eq!(s.y, m.anchor);
        assert_eq!(s.u, DenseVector::zeros(2));
        assert_eq!(s.eps, 0.0);
    }

    #[test]
    fn unregularized_quadratic_closed_form() {
        let m = linear_model(&[0.0], &[1.0], 0.0);
        let s = solve_d1(&m, &NonsmoothTerm::Zero, 1.0, &AtsConfig::default()).unwrap();
        assert!((s.y[0] + 1.0).abs() < 1e-15);
        assert!((s.u[0] - 1.0).abs() < 1e-15);
        assert!(s.residual_ratio < 1e-15);
    }

    #[test]
    fn l1_instance_matches_grid_search() {
        let m = linear_model(&[0.3, -0.4], &[0.8, -0.1], 1.5);
        let h = NonsmoothTerm::L1 { weight: 0.5 };
        let lambda = 0.9;
        let s = solve_d1(&m, &h, lambda, &AtsConfig::default()).unwrap();
        let objective = |y: &DenseVector| {
            m.value(y).unwrap() + h.evaluate(y) + (y - &m.anchor).norm_squared() / (2.0 * lambda)
        };
        // coarse lattice, then a fine lattice around the coarse winner
        let mut best = (f64::INFINITY, DenseVector::zeros(2));
        let mut center = m.anchor.clone();
        for (half_width, steps) in [(2.0, 400), (0.02, 400)] {
            let step = 2.0 * half_width / steps as f64;
            for i in 0..=steps {
                for j in 0..=steps {
                    let y = DenseVector::from_vec(vec![
                        center[0] - half_width + i as f64 * step,
                        center[1] - half_width + j as f64 * step,
                    ]);
                    let f = objective(&y);
                    if f < best.0 {
                        best = (f, y);
                    }
                }
            }
            center = best.1.clone();
        }
        assert!((&s.y - &best.1).norm() < 1e-4, "{} vs {}", s.y, best.1);
    }
}
