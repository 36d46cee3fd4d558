use serde::{Deserialize, Serialize};

use crate::multilinear::DenseVector;

/// The prox-friendly convex term `h` of a composite objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NonsmoothTerm {
    Zero,
    L1 { weight: f64 },
    BoxIndicator { lower: Vec<f64>, upper: Vec<f64> },
}

impl NonsmoothTerm {
    pub fn is_zero(&self) -> bool {
        matches!(self, NonsmoothTerm::Zero)
    }

    /// `h(x)`, `+inf` outside the box for the indicator.
    pub fn evaluate(&self, x: &DenseVector) -> f64 {
        match self {
            NonsmoothTerm::Zero => 0.0,
            NonsmoothTerm::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            NonsmoothTerm::BoxIndicator { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Exact minimizer of `h(y) + |y - x|^2 / (2 step)`.
    pub fn prox(&self, x: &DenseVector, step: f64) -> DenseVector {
        match self {
            NonsmoothTerm::Zero => x.clone(),
            NonsmoothTerm::L1 { weight } => {
                let thr = weight * step;
                x.map(|v| soft_threshold(v, thr))
            }
            NonsmoothTerm::BoxIndicator { lower, upper } => DenseVector::from_iterator(
                x.len(),
                x.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (lo, hi))| v.clamp(*lo, *hi)),
            ),
        }
    }

    /// Whether `g` lies in the subdifferential of `h` at `y`, up to `tol` per coordinate.
    pub fn contains_subgradient(&self, y: &DenseVector, g: &DenseVector, tol: f64) -> bool {
        match self {
            NonsmoothTerm::Zero => g.iter().all(|v| v.abs() <= tol),
            NonsmoothTerm::L1 { weight } => y.iter().zip(g.iter()).all(|(yi, gi)| {
                if *yi > 0.0 {
                    (gi - weight).abs() <= tol
                } else if *yi < 0.0 {
                    (gi + weight).abs() <= tol
                } else {
                    gi.abs() <= weight + tol
                }
            }),
            NonsmoothTerm::BoxIndicator { lower, upper } => y
                .iter()
                .zip(g.iter())
                .zip(lower.iter().zip(upper))
                .all(|((yi, gi), (lo, hi))| {
                    if *yi < *lo || *yi > *hi {
                        return false;
                    }
                    let at_lo = *yi <= *lo;
                    let at_hi = *yi >= *hi;
                    match (at_lo, at_hi) {
                        (true, true) => true,
                        (true, false) => *gi <= tol,
                        (false, true) => *gi >= -tol,
                        (false, false) => gi.abs() <= tol,
                    }
                }),
        }
    }

    /// Smallest-norm element of `grad + ∂h(y)`: the stationarity measure of a composite point.
    pub fn min_norm_subgradient(&self, y: &DenseVector, grad: &DenseVector) -> DenseVector {
        match self {
            NonsmoothTerm::Zero => grad.clone(),
            NonsmoothTerm::L1 { weight } => DenseVector::from_iterator(
                y.len(),
                y.iter().zip(grad.iter()).map(|(yi, gi)| {
                    if *yi > 0.0 {
                        gi + weight
                    } else if *yi < 0.0 {
                        gi - weight
                    } else {
                        soft_threshold(*gi, *weight)
                    }
                }),
            ),
            NonsmoothTerm::BoxIndicator { lower, upper } => DenseVector::from_iterator(
                y.len(),
                y.iter()
                    .zip(grad.iter())
                    .zip(lower.iter().zip(upper))
                    .map(|((yi, gi), (lo, hi))| {
                        if *yi <= *lo && *yi >= *hi {
                            0.0
                        } else if *yi <= *lo {
                            gi.min(0.0)
                        } else if *yi >= *hi {
                            gi.max(0.0)
                        } else {
                            *gi
                        }
                    }),
            ),
        }
    }
}

#[inline]
pub fn soft_threshold(v: f64, thr: f64) -> f64 {
    if v > thr {
        v - thr
    } else if v < -thr {
        v + thr
    } else {
        0.0
    }
}
