//! The d-th order oracle: problem definitions `F = f + h` with analytic
//! derivatives of `f` up to third order and Lipschitz constants `L_1..L_3`.

mod builtin;
pub mod functions;
mod nonsmooth;
pub mod reference;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use builtin::{
    builtin_problem, builtin_problems, lasso_problem, logistic_problem, logsumexp_problem,
    quadratic_problem, quartic_problem, ProblemParams, BUILTIN_NAMES,
};
pub use functions::SmoothFunction;
pub use nonsmooth::{soft_threshold, NonsmoothTerm};

use crate::error::{Error, Result};
use crate::multilinear::{DenseMatrix, DenseVector, SymTensor3};

/// Half-width of the box `[-10, 10]^n` used for Lipschitz sampling.
pub const TEST_BOX_RADIUS: f64 = 10.0;

/// Oracle response at a point: `f` and its derivatives up to `order`.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub value: f64,
    pub gradient: DenseVector,
    pub hessian: Option<DenseMatrix>,
    pub third: Option<SymTensor3>,
    pub order: usize,
}

impl DerivativeBundle {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|v| v.is_finite())
            && self.hessian.as_ref().map_or(true, |h| h.iter().all(|v| v.is_finite()))
            && self.third.as_ref().map_or(true, |t| t.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

impl KnownOptimum {
    pub fn point(&self) -> DenseVector {
        DenseVector::from_vec(self.x.clone())
    }
}

/// A composite problem `min f(x) + h(x)`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub smooth: Arc<dyn SmoothFunction>,
    /// `L_1, L_2, L_3`: Lipschitz constants of the first three derivatives.
    pub lipschitz_constants: [f64; 3],
    pub h: NonsmoothTerm,
    pub known_optimum: Option<KnownOptimum>,
    /// Default starting point.
    pub start: DenseVector,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        smooth: Arc<dyn SmoothFunction>,
        lipschitz_constants: [f64; 3],
        h: NonsmoothTerm,
    ) -> Self {
        let n = smooth.dim();
        Self {
            name: name.into(),
            smooth,
            lipschitz_constants,
            h,
            known_optimum: None,
            start: DenseVector::zeros(n),
        }
    }

    pub fn with_optimum(mut self, x: DenseVector, value: f64) -> Self {
        self.known_optimum = Some(KnownOptimum {
            x: x.iter().copied().collect(),
            value,
        });
        self
    }

    pub fn with_start(mut self, start: DenseVector) -> Self {
        self.start = start;
        self
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    /// `L_d` for `d` in 1..=3.
    pub fn lipschitz(&self, d: usize) -> f64 {
        self.lipschitz_constants[d - 1]
    }

    pub fn max_order(&self) -> usize {
        self.smooth.max_order()
    }

    /// `F(x) = f(x) + h(x)`.
    pub fn objective(&self, x: &DenseVector) -> f64 {
        self.smooth.value(x) + self.h.evaluate(x)
    }

    pub fn gradient(&self, x: &DenseVector) -> DenseVector {
        self.smooth.gradient(x)
    }

    pub fn optimal_value(&self) -> Option<f64> {
        self.known_optimum.as_ref().map(|o| o.value)
    }

    /// Distance from `x` to the known minimizer.
    pub fn distance_to_optimum(&self, x: &DenseVector) -> Option<f64> {
        self.known_optimum
            .as_ref()
            .map(|o| (x - o.point()).norm())
    }

    /// Exact analytic derivatives of `f` at `x` up to `order`.
    pub fn query(&self, x: &DenseVector, order: usize) -> Result<DerivativeBundle> {
        if order == 0 || order > self.max_order() {
            return Err(Error::UnsupportedOrder {
                requested: order,
                supported: self.max_order(),
            });
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("oracle query point"));
        }
        let f = &self.smooth;
        let bundle = DerivativeBundle {
            value: f.value(x),
            gradient: f.gradient(x),
            hessian: (order >= 2).then(|| f.hessian(x)),
            third: (order >= 3).then(|| f.third(x)),
            order,
        };
        if !bundle.is_finite() {
            return Err(Error::NonFinite("oracle response"));
        }
        Ok(bundle)
    }
}

/// Relative allowance for rounding when a sampled ratio sits exactly at `L_d`.
const LIPSCHITZ_ROUNDING: f64 = 1e-12;

/// Outcome of sampling the Lipschitz inequality of the `order`-th derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub order: usize,
    pub trials: usize,
    pub lipschitz: f64,
    pub max_ratio: f64,
    pub violated: bool,
}

/// Samples `trials` random pairs in the test box and reports the largest
/// `|D^d f(x) - D^d f(y)|_F / |x - y|`.
pub fn validate_lipschitz(p: &Problem, order: usize, trials: usize, seed: u64) -> Result<LipschitzReport> {
    if order == 0 || order > p.max_order() {
        return Err(Error::UnsupportedOrder {
            requested: order,
            supported: p.max_order(),
        });
    }
    let n = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| {
        DenseVector::from_fn(n, |_, _| rng.random_range(-TEST_BOX_RADIUS..=TEST_BOX_RADIUS))
    };
    let f = &p.smooth;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let dist = (&x - &y).norm();
        if dist == 0.0 {
            continue;
        }
        let diff = match order {
            1 => (f.gradient(&x) - f.gradient(&y)).norm(),
            2 => (f.hessian(&x) - f.hessian(&y)).norm(),
            _ => f.third(&x).sub(&f.third(&y))?.frobenius_norm(),
        };
        max_ratio = max_ratio.max(diff / dist);
    }
    let lipschitz = p.lipschitz(order);
    Ok(LipschitzReport {
        order,
        trials,
        lipschitz,
        max_ratio,
        violated: max_ratio > lipschitz * (1.0 + LIPSCHITZ_ROUNDING),
    })
}
