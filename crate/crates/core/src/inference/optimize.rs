//! Outer optimization of the hyperparameter posterior: Nelder–Mead on the unconstrained
//! scale, then a finite-difference curvature at the mode.

use nalgebra::{DMatrix, SymmetricEigen};

use super::glm::glm_start;
use super::hyper::{HyperName, Hyperparameters, N_HYPER};
use super::laplace::{log_hyperprior, Laplace, ModeResult, NewtonOptions};
use super::spec::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub initial_step: f64,
    /// Stop when the spread of function values over the simplex falls below this...
    pub ftol: f64,
    /// ...and every vertex is within this distance (max-norm) of the best one.
    pub xtol: f64,
    pub max_evals: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            initial_step: 0.5,
            ftol: 1e-6,
            xtol: 1e-3,
            max_evals: 3000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimize `f` by Nelder–Mead with dimension-adaptive coefficients. Non-finite values are
/// treated as `+inf`.
pub fn nelder_mead(f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], opts: &SimplexOptions) -> SimplexResult {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evaluations);
        return SimplexResult {
            x: Vec::new(),
            f: v,
            evaluations,
            converged: true,
        };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();
    let mut converged = false;
    while evaluations < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();
        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread <= opts.ftol && size <= opts.xtol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(alpha);
        let fr = eval(&xr, &mut evaluations);
        if fr < values[0] {
            let xe = along(alpha * beta);
            let fe = eval(&xe, &mut evaluations);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(alpha * gamma);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for k in 1..=n {
            simplex[k] = best
                .iter()
                .zip(&simplex[k])
                .map(|(b, v)| b + delta * (v - b))
                .collect();
            values[k] = eval(&simplex[k], &mut evaluations);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .expect("nonempty simplex");
    SimplexResult {
        x: simplex[best].clone(),
        f: values[best],
        evaluations,
        converged,
    }
}

/// Central finite-difference Hessian of `f` at `x` with step `h`.
pub fn finite_difference_hessian(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let f0 = f(x);
    let mut at = |d: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in d {
            y[i] += s;
        }
        f(&y)
    };
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        hess[i][i] = (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Hyperparameters held at their initial values.
    pub fixed: [bool; N_HYPER],
    pub simplex: SimplexOptions,
    pub fd_step: f64,
    pub newton: NewtonOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            fixed: [false; N_HYPER],
            simplex: SimplexOptions::default(),
            fd_step: 0.02,
            newton: NewtonOptions::default(),
        }
    }
}

/// Hyperparameter mode with the Gaussian approximation around it.
#[derive(Debug, Clone)]
pub struct HyperFit {
    pub mode: Hyperparameters,
    /// Optimized coordinates; the curvature and covariance are indexed by these in order.
    pub free: [bool; N_HYPER],
    /// Negative Hessian of the log hyperparameter posterior on the unconstrained scale.
    pub curvature: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    /// Unnormalized log posterior of the hyperparameters at the mode.
    pub log_posterior: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub latent: ModeResult,
}

impl HyperFit {
    pub fn free_names(&self) -> Vec<HyperName> {
        HyperName::ALL.into_iter().filter(|h| self.free[h.index()]).collect()
    }
}

/// Laplace approximation of `log p(y | theta) + log p(theta)`, with the mode search started
/// from the GLM initialization.
pub fn log_marginal_hyper(hyper: &Hyperparameters, spec: &ModelSpec) -> Result<f64> {
    let lap = Laplace::new(spec)?;
    let init = glm_start(spec)?;
    let mode = lap.find_mode(hyper, &init, NewtonOptions::default())?;
    Ok(mode.log_marginal_likelihood() + log_hyperprior(spec, hyper))
}

struct Objective<'l, 'a> {
    lap: &'l Laplace<'a>,
    base: [f64; N_HYPER],
    free: Vec<usize>,
    warm: Vec<f64>,
    best: f64,
    newton: NewtonOptions,
}

impl Objective<'_, '_> {
    fn hyper(&self, z: &[f64]) -> Result<Hyperparameters> {
        let mut u = self.base;
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = z[k];
        }
        Hyperparameters::from_internal(&u)
    }

    fn evaluate(&mut self, z: &[f64]) -> Result<(f64, ModeResult)> {
        let hyper = self.hyper(z)?;
        let mode = self.lap.find_mode(&hyper, &self.warm, self.newton)?;
        let lp = mode.log_marginal_likelihood() + log_hyperprior(self.lap.spec(), &hyper);
        if !lp.is_finite() {
            return Err(Error::domain("log marginal is not finite"));
        }
        Ok((lp, mode))
    }

    /// Negative log posterior; the best mode so far seeds the next Newton search.
    fn value(&mut self, z: &[f64]) -> f64 {
        match self.evaluate(z) {
            Ok((lp, mode)) => {
                if -lp < self.best {
                    self.best = -lp;
                    self.warm = mode.mode;
                }
                -lp
            }
            Err(e) => {
                log::debug!("hyperparameter evaluation failed at {z:?}: {e}");
                f64::INFINITY
            }
        }
    }
}

/// Maximize the Laplace log posterior of the hyperparameters from `init`.
pub fn optimize_hyper(lap: &Laplace, init: &Hyperparameters, opts: &OptimizeOptions) -> Result<HyperFit> {
    init.validate()?;
    let active = lap.spec().active_hypers();
    let free: [bool; N_HYPER] = std::array::from_fn(|i| active[i] && !opts.fixed[i]);
    let free_idx: Vec<usize> = (0..N_HYPER).filter(|&i| free[i]).collect();
    let base = init.to_internal();
    let mut obj = Objective {
        lap,
        base,
        free: free_idx.clone(),
        warm: glm_start(lap.spec())?,
        best: f64::INFINITY,
        newton: opts.newton,
    };
    let z0: Vec<f64> = free_idx.iter().map(|&i| base[i]).collect();
    obj.evaluate(&z0)
        .map_err(|e| Error::Initialization(format!("log marginal at the initial hyperparameters: {e}")))?;
    let result = nelder_mead(&mut |z| obj.value(z), &z0, &opts.simplex);
    if !result.converged {
        log::warn!("hyperparameter simplex stopped after {} evaluations without converging", result.evaluations);
    }
    let (log_posterior, latent) = obj.evaluate(&result.x)?;
    let mut neg = |z: &[f64]| obj.value(z);
    let hess = finite_difference_hessian(&mut neg, &result.x, opts.fd_step);
    let covariance = invert_curvature(&hess);
    Ok(HyperFit {
        mode: obj.hyper(&result.x)?,
        free,
        curvature: hess,
        covariance,
        log_posterior,
        evaluations: result.evaluations,
        converged: result.converged,
        latent,
    })
}

/// Inverse of a symmetric curvature matrix with eigenvalues floored at a small positive value,
/// so directions the data do not inform get a large but finite variance.
fn invert_curvature(h: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = h.len();
    if n == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let eig = SymmetricEigen::new(m);
    let floor = 1e-6;
    if eig.eigenvalues.iter().any(|&l| l < floor) {
        log::warn!("hyperparameter curvature is not positive definite; flooring eigenvalues at {floor}");
    }
    let inv_diag = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let cov = &eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose();
    (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect()
}
