//! Built-in benchmark problems, generated reproducibly from a seed.
//!
//! | name        | f                                   | h     | L_1, L_2, L_3 |
//! |-------------|-------------------------------------|-------|---------------|
//! | `logistic`  | mean logistic loss + mu/2 \|x\|^2   | 0     | see [`logistic_problem`] |
//! | `logsumexp` | log-sum-exp of +/- paired forms     | 0     | R^2, 6R^3, 26R^4 |
//! | `lasso`     | 1/2 \|Ax - b\|^2                    | w\|x\|_1 | \|A\|^2, 1, 1 |
//! | `quartic`   | sum x_i^4/4 + 1/2 x^T Q x           | 0     | 300 + \|Q\|, 60, 6 |
//!
//! Constants that are zero for a quadratic `f` are replaced by `1.0` so the
//! large-step window `d! sigma / (L_d + M)` stays finite.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::functions::{LeastSquares, LogSumExp, Logistic, Quadratic, SeparableQuartic, SmoothFunction};
use super::reference::{newton_minimize, prox_gradient_reference};
use super::{NonsmoothTerm, Problem, TEST_BOX_RADIUS};
use crate::error::{Error, Result};
use crate::multilinear::{DenseMatrix, DenseVector, SymmetricSpectrum};

pub const BUILTIN_NAMES: [&str; 4] = ["logistic", "logsumexp", "lasso", "quartic"];

/// Stand-in Lipschitz constant for derivatives that are identically constant.
const CONSTANT_DERIVATIVE_FLOOR: f64 = 1.0;

/// Max |s(1-s)(1-2s)| over s in (0,1): the third derivative of the logistic loss.
const LOGISTIC_THIRD_MAX: f64 = 0.096_225_044_864_937_63; // 1 / (6 sqrt 3)
/// Max |d^4/dt^4 log(1 + e^{-t})|.
const LOGISTIC_FOURTH_MAX: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemParams {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub seed: u64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            n: None,
            m: None,
            seed: 42,
        }
    }
}

fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v * scale
    })
}

fn gaussian_vector(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseVector {
    DenseVector::from_fn(n, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v * scale
    })
}

fn max_row_norm(a: &DenseMatrix) -> f64 {
    a.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Logistic regression with an l2 term.
///
/// Rows `a_i ~ N(0, I/n)`, labels from a planted model with 10% noise,
/// `mu = 1e-3`. Lipschitz constants:
/// `L_1 = lambda_max(A^T A)/(4m) + mu`,
/// `L_2 = (1/(6 sqrt 3 m)) sum |a_i|^3`,
/// `L_3 = (1/(8m)) sum |a_i|^4`.
pub fn logistic_problem(n: usize, m: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = gaussian_matrix(m, n, 1.0 / (n as f64).sqrt(), &mut rng);
    let planted = gaussian_vector(n, 2.0, &mut rng);
    let noise = gaussian_vector(m, 0.5, &mut rng);
    let scores = &features * &planted + noise;
    let labels = scores.map(|s| if s >= 0.0 { 1.0 } else { -1.0 });
    let mu = 1e-3;
    let gram = features.tr_mul(&features);
    let spectrum = SymmetricSpectrum::new(&gram).expect("finite gram matrix");
    let mf = m as f64;
    let l1 = spectrum.max_value() / (4.0 * mf) + mu;
    let l2 = LOGISTIC_THIRD_MAX / mf * features.row_iter().map(|r| r.norm().powi(3)).sum::<f64>();
    let l3 = LOGISTIC_FOURTH_MAX / mf * features.row_iter().map(|r| r.norm().powi(4)).sum::<f64>();
    let f = Logistic {
        features,
        labels,
        mu,
    };
    let x0 = DenseVector::zeros(n);
    let xstar = newton_minimize(&f, &x0, 1e-14, 200);
    let fstar = f.value(&xstar);
    Problem::new(
        format!("logistic(n={n},m={m},seed={seed})"),
        Arc::new(f),
        [l1, l2, l3],
        NonsmoothTerm::Zero,
    )
    .with_optimum(xstar, fstar)
    .with_start(x0)
}

/// Log-sum-exp over `m/2` random forms `c_j ~ N(0, I/n)` and their negations,
/// with offsets `e ~ N(0, 1/4)`. With `R = max |c_a|`: `L = (R^2, 6R^3, 26R^4)`.
pub fn logsumexp_problem(n: usize, m: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = m.div_ceil(2).max(1);
    let half = gaussian_matrix(pairs, n, 1.0 / (n as f64).sqrt(), &mut rng);
    let forms = DenseMatrix::from_fn(2 * pairs, n, |r, c| {
        if r < pairs {
            half[(r, c)]
        } else {
            -half[(r - pairs, c)]
        }
    });
    let offsets = gaussian_vector(2 * pairs, 0.5, &mut rng);
    let r = max_row_norm(&forms);
    let f = LogSumExp { forms, offsets };
    let x0 = DenseVector::zeros(n);
    let xstar = newton_minimize(&f, &x0, 1e-14, 200);
    let fstar = f.value(&xstar);
    Problem::new(
        format!("logsumexp(n={n},m={},seed={seed})", 2 * pairs),
        Arc::new(f),
        [r * r, 6.0 * r.powi(3), 26.0 * r.powi(4)],
        NonsmoothTerm::Zero,
    )
    .with_optimum(xstar, fstar)
    .with_start(x0)
}

/// Least squares plus an l1 term. `A ~ N(0, 1/m)`, sparse planted signal,
/// `w = 0.1 |A^T b|_inf`. `L_1 = lambda_max(A^T A)`.
pub fn lasso_problem(n: usize, m: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_matrix(m, n, 1.0 / (m as f64).sqrt(), &mut rng);
    let support = (n / 4).max(1);
    let planted = DenseVector::from_fn(n, |i, _| {
        if i < support {
            if i % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    });
    let noise = gaussian_vector(m, 0.01, &mut rng);
    let b = &a * &planted + noise;
    let weight = 0.1 * a.tr_mul(&b).amax();
    let spectrum = SymmetricSpectrum::new(&a.tr_mul(&a)).expect("finite gram matrix");
    let l1 = spectrum.max_value();
    let f = LeastSquares { a, b };
    let mut problem = Problem::new(
        format!("lasso(n={n},m={m},seed={seed})"),
        Arc::new(f),
        [l1, CONSTANT_DERIVATIVE_FLOOR, CONSTANT_DERIVATIVE_FLOOR],
        NonsmoothTerm::L1 { weight },
    );
    let x0 = DenseVector::zeros(n);
    let (xstar, _) = prox_gradient_reference(&problem, &x0, 1e-13, 1_000_000);
    let fstar = problem.objective(&xstar);
    problem = problem.with_optimum(xstar, fstar).with_start(x0);
    problem
}

/// `sum x_i^4/4 + 1/2 x^T Q x` with `Q = 0.1 B^T B / n`, minimized at the origin.
/// Constants hold on the test box `[-10, 10]^n`: `L_1 = 3 * 10^2 + lambda_max(Q)`,
/// `L_2 = 3 * 20`, `L_3 = 6`.
pub fn quartic_problem(n: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian_matrix(n, n, 1.0, &mut rng);
    let q = b.tr_mul(&b) * (0.1 / n as f64);
    let qmax = SymmetricSpectrum::new(&q).expect("finite matrix").max_value();
    let r = TEST_BOX_RADIUS;
    let f = SeparableQuartic { q };
    Problem::new(
        format!("quartic(n={n},seed={seed})"),
        Arc::new(f),
        [3.0 * r * r + qmax, 6.0 * r, 6.0],
        NonsmoothTerm::Zero,
    )
    .with_optimum(DenseVector::zeros(n), 0.0)
    .with_start(DenseVector::from_element(n, 1.0))
}

/// `1/2 x^T Q x + c^T x` with `Q` positive definite; the optimum is solved exactly.
pub fn quadratic_problem(q: DenseMatrix, c: DenseVector) -> Problem {
    let n = c.len();
    let spectrum = SymmetricSpectrum::new(&q).expect("finite matrix");
    let f = Quadratic { q, c };
    let mut problem = Problem::new(
        format!("quadratic(n={n})"),
        Arc::new(f.clone()),
        [
            spectrum.max_value().max(f64::MIN_POSITIVE),
            CONSTANT_DERIVATIVE_FLOOR,
            CONSTANT_DERIVATIVE_FLOOR,
        ],
        NonsmoothTerm::Zero,
    );
    if let Some(chol) = f.q.clone().cholesky() {
        let xstar = -chol.solve(&f.c);
        let fstar = f.value(&xstar);
        problem = problem.with_optimum(xstar, fstar);
    }
    problem
}

fn canonical_name(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "a" | "logistic" => Some("logistic"),
        "b" | "logsumexp" | "lse" => Some("logsumexp"),
        "c" | "lasso" => Some("lasso"),
        "d" | "quartic" => Some("quartic"),
        _ => None,
    }
}

/// Looks up a built-in problem by name (`logistic`, `logsumexp`, `lasso`,
/// `quartic`, or the letters `a`..`d`).
pub fn builtin_problem(name: &str, params: &ProblemParams) -> Result<Problem> {
    let canonical = canonical_name(name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "unknown problem '{name}'; available: {}",
            BUILTIN_NAMES.join(", ")
        ))
    })?;
    let seed = params.seed;
    let problem = match canonical {
        "logistic" => logistic_problem(params.n.unwrap_or(20), params.m.unwrap_or(100), seed),
        "logsumexp" => logsumexp_problem(params.n.unwrap_or(10), params.m.unwrap_or(30), seed),
        "lasso" => lasso_problem(params.n.unwrap_or(20), params.m.unwrap_or(40), seed),
        _ => quartic_problem(params.n.unwrap_or(5), seed),
    };
    Ok(problem)
}

/// All four built-in problems with their default sizes.
pub fn builtin_problems(seed: u64) -> Vec<Problem> {
    let params = ProblemParams {
        seed,
        ..Default::default()
    };
    BUILTIN_NAMES
        .iter()
        .map(|name| builtin_problem(name, &params).expect("built-in name"))
        .collect()
}
