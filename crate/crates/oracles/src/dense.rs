//! Dense-matrix references for Gaussian Markov random fields and Gaussian models.

use nalgebra::{DMatrix, DVector};

/// Stationary AR(1) covariance `rho^|i-j| / kappa`.
pub fn ar1_covariance(n: usize, rho: f64, kappa: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()) / kappa)
}

/// Closed-form tridiagonal inverse of [`ar1_covariance`].
pub fn ar1_precision(n: usize, rho: f64, kappa: f64) -> DMatrix<f64> {
    let s = kappa / (1.0 - rho * rho);
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 if n == 1 => kappa,
        0 if i == 0 || i == n - 1 => s,
        0 => (1.0 + rho * rho) * s,
        1 => -rho * s,
        _ => 0.0,
    })
}

/// First-difference matrix `D` of size `(n-1) x n`.
pub fn first_difference(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n - 1, n, |i, j| {
        if j == i {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// `log N(y; mean, cov)`.
pub fn gaussian_log_density(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().expect("covariance must be positive definite");
    let r = y - mean;
    let solved = chol.solve(&r);
    let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    -0.5 * (y.len() as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + r.dot(&solved))
}

/// `log |M|` for symmetric positive definite `M`.
pub fn logdet_spd(m: &DMatrix<f64>) -> f64 {
    let chol = m.clone().cholesky().expect("matrix must be positive definite");
    chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum()
}

/// Symmetric eigenvalues in ascending order.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Gaussian linear model `y = A x + e`, `x ~ N(0, Q^-1)`, `e ~ N(0, noise I)`:
/// log marginal likelihood, posterior mean and posterior marginal variances.
pub struct ConjugateGaussian {
    pub log_marginal: f64,
    pub posterior_mean: DVector<f64>,
    pub posterior_variance: DVector<f64>,
}

pub fn conjugate_gaussian(a: &DMatrix<f64>, q: &DMatrix<f64>, noise: f64, y: &DVector<f64>) -> ConjugateGaussian {
    let prior_cov = q.clone().try_inverse().expect("prior precision must be invertible");
    let marginal_cov = a * &prior_cov * a.transpose() + DMatrix::identity(y.len(), y.len()) * noise;
    let log_marginal = gaussian_log_density(y, &DVector::zeros(y.len()), &marginal_cov);
    let h = q + a.transpose() * a / noise;
    let post_cov = h.try_inverse().expect("posterior precision must be invertible");
    let posterior_mean = &post_cov * a.transpose() * y / noise;
    ConjugateGaussian {
        log_marginal,
        posterior_mean,
        posterior_variance: post_cov.diagonal(),
    }
}
