//! Regularized Taylor model
//! `f_x(y) = sum_{k<=d} D^k f(x)[y-x]^k / k! + M/(d+1)! |y-x|^{d+1}`.

use crate::error::{Error, Result};
use crate::multilinear::{contract3_full, contract3_to_matrix, DenseMatrix, DenseVector};
use crate::oracle::{DerivativeBundle, Problem};

pub(crate) fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

#[derive(Debug, Clone)]
pub struct TaylorModel {
    pub anchor: DenseVector,
    pub bundle: DerivativeBundle,
    /// Regularization weight `M`.
    pub reg: f64,
    pub order: usize,
}

impl TaylorModel {
    pub fn new(anchor: DenseVector, bundle: DerivativeBundle, reg: f64, order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) || bundle.order < order {
            return Err(Error::UnsupportedOrder {
                requested: order,
                supported: bundle.order.min(3),
            });
        }
        if anchor.len() != bundle.dim() {
            return Err(Error::DimensionMismatch {
                expected: bundle.dim(),
                found: anchor.len(),
            });
        }
        if !(reg >= 0.0) || !reg.is_finite() {
            return Err(Error::InvalidArgument(format!("regularization weight {reg}")));
        }
        Ok(Self {
            anchor,
            bundle,
            reg,
            order,
        })
    }

    /// Queries `problem` at `anchor` and builds the order-`order` model.
    pub fn at(problem: &Problem, anchor: &DenseVector, reg: f64, order: usize) -> Result<Self> {
        let bundle = problem.query(anchor, order)?;
        Self::new(anchor.clone(), bundle, reg, order)
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn hessian(&self) -> Option<&DenseMatrix> {
        if self.order >= 2 {
            self.bundle.hessian.as_ref()
        } else {
            None
        }
    }

    fn increment(&self, y: &DenseVector) -> Result<DenseVector> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        Ok(y - &self.anchor)
    }

    /// Polynomial part plus regularizer, evaluated at the increment `z = y - x`.
    pub fn value_at_increment(&self, z: &DenseVector) -> f64 {
        let b = &self.bundle;
        let mut v = b.value + b.gradient.dot(z);
        if self.order >= 2 {
            let h = b.hessian.as_ref().expect("order-2 bundle");
            v += 0.5 * z.dot(&(h * z));
        }
        if self.order >= 3 {
            let t = b.third.as_ref().expect("order-3 bundle");
            v += contract3_full(t, z, z, z).expect("matching dims") / 6.0;
        }
        let d = self.order;
        v + self.reg / factorial(d + 1) * z.norm().powi(d as i32 + 1)
    }

    pub fn gradient_at_increment(&self, z: &DenseVector) -> DenseVector {
        let b = &self.bundle;
        let mut g = b.gradient.clone();
        if self.order >= 2 {
            g += b.hessian.as_ref().expect("order-2 bundle") * z;
        }
        if self.order >= 3 {
            let tz = contract3_to_matrix(b.third.as_ref().expect("order-3 bundle"), z)
                .expect("matching dims");
            g += (tz * z) * 0.5;
        }
        let d = self.order;
        let r = z.norm();
        if r > 0.0 {
            g += z * (self.reg / factorial(d) * r.powi(d as i32 - 1));
        }
        g
    }

    pub fn hessian_at_increment(&self, z: &DenseVector) -> DenseMatrix {
        let n = self.dim();
        let b = &self.bundle;
        let mut h = match self.order {
            1 => DenseMatrix::zeros(n, n),
            _ => b.hessian.clone().expect("order-2 bundle"),
        };
        if self.order >= 3 {
            h += contract3_to_matrix(b.third.as_ref().expect("order-3 bundle"), z)
                .expect("matching dims");
        }
        let d = self.order as i32;
        let r = z.norm();
        let c = self.reg / factorial(self.order);
        if d == 1 {
            h += DenseMatrix::identity(n, n) * c;
        } else if r > 0.0 {
            h += DenseMatrix::identity(n, n) * (c * r.powi(d - 1));
            h += (z * z.transpose()) * (c * (d - 1) as f64 * r.powi(d - 3));
        }
        h
    }

    pub fn value(&self, y: &DenseVector) -> Result<f64> {
        Ok(self.value_at_increment(&self.increment(y)?))
    }

    pub fn gradient(&self, y: &DenseVector) -> Result<DenseVector> {
        Ok(self.gradient_at_increment(&self.increment(y)?))
    }
}

pub fn model_value(m: &TaylorModel, y: &DenseVector) -> Result<f64> {
    m.value(y)
}

pub fn model_gradient(m: &TaylorModel, y: &DenseVector) -> Result<DenseVector> {
    m.gradient(y)
}

/// Both sides of `|grad f(y) - grad f_x(y)| <= (L_d + M)/d! |y - x|^d`.
pub fn gap_bound_check(p: &Problem, m: &TaylorModel, y: &DenseVector) -> Result<(f64, f64)> {
    let z = m.increment(y)?;
    let lhs = (p.gradient(y) - m.gradient_at_increment(&z)).norm();
    let d = m.order;
    let rhs = (p.lipschitz(d) + m.reg) / factorial(d) * z.norm().powi(d as i32);
    Ok((lhs, rhs))
}
