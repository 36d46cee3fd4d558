//! Smooth convex test functions with analytic derivatives up to order three.

use std::fmt::Debug;

use crate::multilinear::{DenseMatrix, DenseVector, SymTensor3};

/// The smooth part `f` of a composite objective.
pub trait SmoothFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// Highest derivative order the function can report.
    fn max_order(&self) -> usize {
        3
    }

    fn value(&self, x: &DenseVector) -> f64;
    fn gradient(&self, x: &DenseVector) -> DenseVector;
    fn hessian(&self, x: &DenseVector) -> DenseMatrix;
    fn third(&self, x: &DenseVector) -> SymTensor3;
}

/// `f(x) = 1/2 x^T Q x + c^T x`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub q: DenseMatrix,
    pub c: DenseVector,
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn value(&self, x: &DenseVector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }
    fn gradient(&self, x: &DenseVector) -> DenseVector {
        &self.q * x + &self.c
    }
    fn hessian(&self, _x: &DenseVector) -> DenseMatrix {
        self.q.clone()
    }
    fn third(&self, _x: &DenseVector) -> SymTensor3 {
        SymTensor3::zeros(self.dim())
    }
}

/// `f(x) = 1/2 |A x - b|^2`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub a: DenseMatrix,
    pub b: DenseVector,
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn value(&self, x: &DenseVector) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared()
    }
    fn gradient(&self, x: &DenseVector) -> DenseVector {
        self.a.tr_mul(&(&self.a * x - &self.b))
    }
    fn hessian(&self, _x: &DenseVector) -> DenseMatrix {
        self.a.tr_mul(&self.a)
    }
    fn third(&self, _x: &DenseVector) -> SymTensor3 {
        SymTensor3::zeros(self.dim())
    }
}

/// Regularized logistic loss
/// `f(x) = (1/m) sum_i log(1 + exp(-b_i a_i^T x)) + (mu/2) |x|^2`
/// with rows `a_i` of `features` and labels `b_i` in {-1, +1}.
#[derive(Debug, Clone)]
pub struct Logistic {
    pub features: DenseMatrix,
    pub labels: DenseVector,
    pub mu: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus_neg(t: f64) -> f64 {
    // log(1 + exp(-t))
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

impl Logistic {
    fn margins(&self, x: &DenseVector) -> DenseVector {
        (&self.features * x).component_mul(&self.labels)
    }

    fn samples(&self) -> f64 {
        self.features.nrows() as f64
    }
}

impl SmoothFunction for Logistic {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn value(&self, x: &DenseVector) -> f64 {
        let loss: f64 = self.margins(x).iter().map(|t| softplus_neg(*t)).sum();
        loss / self.samples() + 0.5 * self.mu * x.norm_squared()
    }

    fn gradient(&self, x: &DenseVector) -> DenseVector {
        let t = self.margins(x);
        let w = DenseVector::from_iterator(
            t.len(),
            t.iter()
                .zip(self.labels.iter())
                .map(|(ti, bi)| (sigmoid(*ti) - 1.0) * bi),
        );
        self.features.tr_mul(&w) / self.samples() + x * self.mu
    }

    fn hessian(&self, x: &DenseVector) -> DenseMatrix {
        let t = self.margins(x);
        let n = self.dim();
        let mut scaled = self.features.clone();
        for (i, ti) in t.iter().enumerate() {
            let s = sigmoid(*ti);
            scaled.row_mut(i).scale_mut(s * (1.0 - s));
        }
        let mut h = self.features.tr_mul(&scaled) / self.samples();
        for i in 0..n {
            h[(i, i)] += self.mu;
        }
        h
    }

    fn third(&self, x: &DenseVector) -> SymTensor3 {
        let t = self.margins(x);
        let n = self.dim();
        let m = self.samples();
        let weights: Vec<f64> = t
            .iter()
            .zip(self.labels.iter())
            .map(|(ti, bi)| {
                let s = sigmoid(*ti);
                s * (1.0 - s) * (1.0 - 2.0 * s) * bi / m
            })
            .collect();
        let a = &self.features;
        SymTensor3::from_fn(n, |i, j, k| {
            weights
                .iter()
                .enumerate()
                .map(|(r, w)| w * a[(r, i)] * a[(r, j)] * a[(r, k)])
                .sum()
        })
    }
}

/// `f(x) = log sum_a exp(c_a^T x + e_a)` with rows `c_a` of `forms`.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    pub forms: DenseMatrix,
    pub offsets: DenseVector,
}

impl LogSumExp {
    fn logits(&self, x: &DenseVector) -> DenseVector {
        &self.forms * x + &self.offsets
    }

    fn softmax(&self, x: &DenseVector) -> DenseVector {
        let z = self.logits(x);
        let zmax = z.max();
        let e = z.map(|v| (v - zmax).exp());
        let s = e.sum();
        e / s
    }

    /// `S = C^T diag(p) C` and `pi = C^T p`.
    fn moments(&self, p: &DenseVector) -> (DenseMatrix, DenseVector) {
        let mut scaled = self.forms.clone();
        for (r, pr) in p.iter().enumerate() {
            scaled.row_mut(r).scale_mut(*pr);
        }
        (self.forms.tr_mul(&scaled), self.forms.tr_mul(p))
    }
}

impl SmoothFunction for LogSumExp {
    fn dim(&self) -> usize {
        self.forms.ncols()
    }

    fn value(&self, x: &DenseVector) -> f64 {
        let z = self.logits(x);
        let zmax = z.max();
        zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln()
    }

    fn gradient(&self, x: &DenseVector) -> DenseVector {
        self.forms.tr_mul(&self.softmax(x))
    }

    fn hessian(&self, x: &DenseVector) -> DenseMatrix {
        let p = self.softmax(x);
        let (s, pi) = self.moments(&p);
        s - &pi * pi.transpose()
    }

    fn third(&self, x: &DenseVector) -> SymTensor3 {
        let p = self.softmax(x);
        let (s, pi) = self.moments(&p);
        let c = &self.forms;
        SymTensor3::from_fn(self.dim(), |i, j, k| {
            let raw: f64 = p
                .iter()
                .enumerate()
                .map(|(r, pr)| pr * c[(r, i)] * c[(r, j)] * c[(r, k)])
                .sum();
            raw - s[(i, j)] * pi[k] - s[(i, k)] * pi[j] - s[(j, k)] * pi[i]
                + 2.0 * pi[i] * pi[j] * pi[k]
        })
    }
}

/// `f(x) = sum_i x_i^4 / 4 + 1/2 x^T Q x`.
#[derive(Debug, Clone)]
pub struct SeparableQuartic {
    pub q: DenseMatrix,
}

impl SmoothFunction for SeparableQuartic {
    fn dim(&self) -> usize {
        self.q.nrows()
    }
    fn value(&self, x: &DenseVector) -> f64 {
        0.25 * x.iter().map(|v| v.powi(4)).sum::<f64>() + 0.5 * x.dot(&(&self.q * x))
    }
    fn gradient(&self, x: &DenseVector) -> DenseVector {
        x.map(|v| v.powi(3)) + &self.q * x
    }
    fn hessian(&self, x: &DenseVector) -> DenseMatrix {
        let mut h = self.q.clone();
        for (i, v) in x.iter().enumerate() {
            h[(i, i)] += 3.0 * v * v;
        }
        h
    }
    fn third(&self, x: &DenseVector) -> SymTensor3 {
        let mut t = SymTensor3::zeros(self.dim());
        for (i, v) in x.iter().enumerate() {
            t.set(i, i, i, 6.0 * v);
        }
        t
    }
}
