//! High-accuracy reference solvers used to pin down optima of the test problems.

use super::functions::SmoothFunction;
use super::Problem;
use crate::multilinear::DenseVector;

/// Damped Newton's method with Armijo backtracking for smooth strictly convex `f`.
/// Stops when the gradient norm drops below `tol`.
pub fn newton_minimize(
    f: &dyn SmoothFunction,
    x0: &DenseVector,
    tol: f64,
    max_iter: usize,
) -> DenseVector {
    let mut x = x0.clone();
    for _ in 0..max_iter {
        let g = f.gradient(&x);
        if g.norm() <= tol {
            break;
        }
        let mut h = f.hessian(&x);
        let mut shift = 0.0;
        let dir = loop {
            if let Some(chol) = h.clone().cholesky() {
                break -chol.solve(&g);
            }
            shift = if shift == 0.0 { 1e-12 } else { shift * 10.0 };
            for i in 0..h.nrows() {
                h[(i, i)] += shift;
            }
        };
        let fx = f.value(&x);
        let slope = g.dot(&dir);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-20 {
            let trial = &x + &dir * t;
            if f.value(&trial) <= fx + 1e-4 * t * slope {
                x = trial;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // at the floating-point floor: take the full Newton step
            x += &dir;
            if f.gradient(&x).norm() > g.norm() {
                x -= &dir;
                break;
            }
        }
    }
    x
}

/// Plain proximal gradient with step `1/L_1`, run until the gradient-mapping norm
/// `|x - x+| / t` is at most `tol`. Returns the final point and the iteration count.
pub fn prox_gradient_reference(
    problem: &Problem,
    x0: &DenseVector,
    tol: f64,
    max_iter: usize,
) -> (DenseVector, usize) {
    let step = 1.0 / problem.lipschitz(1);
    let mut x = x0.clone();
    for it in 0..max_iter {
        let g = problem.smooth.gradient(&x);
        let next = problem.h.prox(&(&x - &g * step), step);
        let mapping = (&x - &next).norm() / step;
        x = next;
        if mapping <= tol {
            return (x, it + 1);
        }
    }
    (x, max_iter)
}
