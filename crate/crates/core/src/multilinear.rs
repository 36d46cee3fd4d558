//! Dense vectors, matrices and symmetric third-order tensors.
//!
//! Vectors and matrices are `nalgebra` dynamic types. [`SymTensor3`] stores
//! only the canonical entries `T[i,j,k]` with `i <= j <= k`, so every
//! permutation of an index triple reads the same slot.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type DenseVector = DVector<f64>;
pub type DenseMatrix = DMatrix<f64>;

#[inline]
fn packed_index(i: usize, j: usize, k: usize) -> usize {
    // sort descending: c >= b >= a
    let (mut a, mut b, mut c) = (i, j, k);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    if b > c {
        std::mem::swap(&mut b, &mut c);
    }
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    c * (c + 1) * (c + 2) / 6 + b * (b + 1) / 2 + a
}

fn packed_len(n: usize) -> usize {
    n * (n + 1) * (n + 2) / 6
}

/// Symmetric third-order tensor in packed canonical storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl SymTensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; packed_len(dim)],
        }
    }

    /// Builds a tensor by evaluating `f` once per canonical triple `i <= j <= k`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..dim {
            for j in 0..=k {
                for i in 0..=j {
                    t.data[packed_index(i, j, k)] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[packed_index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[packed_index(i, j, k)] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[packed_index(i, j, k)] += value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Visits every canonical entry with the number of index permutations it stands for.
    pub fn for_each_canonical(&self, mut f: impl FnMut(usize, usize, usize, f64, f64)) {
        for k in 0..self.dim {
            for j in 0..=k {
                for i in 0..=j {
                    let mult = if i == j && j == k {
                        1.0
                    } else if i == j || j == k {
                        3.0
                    } else {
                        6.0
                    };
                    f(i, j, k, self.data[packed_index(i, j, k)], mult);
                }
            }
        }
    }

    /// Entrywise difference `self - other`.
    pub fn sub(&self, other: &SymTensor3) -> Result<SymTensor3> {
        check_dim(self.dim, other.dim)?;
        Ok(SymTensor3 {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_canonical(|_, _, _, v, mult| acc += mult * v * v);
        acc.sqrt()
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// `result[i][j] = sum_k T[i,j,k] z[k]`.
pub fn contract3_to_matrix(t: &SymTensor3, z: &DenseVector) -> Result<DenseMatrix> {
    check_dim(t.dim, z.len())?;
    let n = t.dim;
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                s += t.get(i, j, k) * z[k];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    Ok(out)
}

/// `T[z1, z2, z3]`.
pub fn contract3_full(
    t: &SymTensor3,
    z1: &DenseVector,
    z2: &DenseVector,
    z3: &DenseVector,
) -> Result<f64> {
    check_dim(t.dim, z1.len())?;
    check_dim(t.dim, z2.len())?;
    check_dim(t.dim, z3.len())?;
    let n = t.dim;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = z1[i] * z2[j];
            if w == 0.0 {
                continue;
            }
            for k in 0..n {
                s += t.get(i, j, k) * w * z3[k];
            }
        }
    }
    Ok(s)
}

/// `T[z, z]` as a vector, i.e. `(T[z]) z`.
pub fn contract3_twice(t: &SymTensor3, z: &DenseVector) -> Result<DenseVector> {
    Ok(contract3_to_matrix(t, z)? * z)
}

/// Upper estimate of the tensor operator norm: the Frobenius norm.
pub fn operator_norm_upper(t: &SymTensor3) -> f64 {
    t.frobenius_norm()
}

/// Eigendecomposition `A = Q diag(values) Q^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    pub values: DenseVector,
    pub vectors: DenseMatrix,
}

impl SymmetricSpectrum {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symmetric eigendecomposition"));
        }
        // symmetrize against round-off in assembled Hessians
        let sym = (a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Coordinates in the eigenbasis, `Q^T v`.
    pub fn to_eigenbasis(&self, v: &DenseVector) -> DenseVector {
        self.vectors.tr_mul(v)
    }

    pub fn from_eigenbasis(&self, w: &DenseVector) -> DenseVector {
        &self.vectors * w
    }

    /// Solves `(c A + shift I) z = rhs` given `rhs` already in the eigenbasis.
    pub fn solve_shifted_in_basis(&self, scale: f64, shift: f64, rhs: &DenseVector) -> DenseVector {
        DenseVector::from_iterator(
            rhs.len(),
            self.values
                .iter()
                .zip(rhs.iter())
                .map(|(lam, r)| r / (scale * lam + shift)),
        )
    }
}
