//! Laplace approximation: prior precision assembly, Newton mode finding on the sparse Hessian
//! and the approximate log marginal likelihood of the hyperparameters.

use std::f64::consts::PI;
use std::sync::Arc;

use super::hyper::{HyperName, Hyperparameters};
use super::spec::{dot, BlockKind, Likelihood, ModelSpec};
use crate::error::{Error, Result};
use crate::gmrf::{
    ar1_logdet, ar1_triplets, kron_group, rw1_constrained_logdet, rw1_precision, SpdeParams,
    SOFT_CONSTRAINT_PRECISION,
};
use crate::sparse::{Cholesky, SymCsc, Symbolic};
use crate::tweedie;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 100;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
const OBJECTIVE_ROUNDOFF: f64 = 1e-12;

/// Lower-triangle entries of the latent prior precision and its log determinant.
pub struct PriorPrecision {
    pub triplets: Vec<(usize, usize, f64)>,
    pub logdet: f64,
}

pub fn prior_precision(spec: &ModelSpec, hyper: &Hyperparameters) -> Result<PriorPrecision> {
    let mut triplets = Vec::new();
    let mut logdet = 0.0;
    for (b, block) in spec.blocks.iter().enumerate() {
        let off = spec.offset(b);
        let n = block.dim();
        match &block.kind {
            BlockKind::Fixed { prior_precision } => {
                triplets.extend((0..n).map(|i| (off + i, off + i, *prior_precision)));
                logdet += n as f64 * prior_precision.ln();
            }
            BlockKind::Spatial { operator, groups } => {
                let params = SpdeParams::from_range_sd(hyper.spatial_range_km, hyper.spatial_sd)?;
                let within = operator.precision(params);
                let within_logdet = Cholesky::new(&within.matrix, &[])?.logdet();
                let q = kron_group(&within, *groups, hyper.group_rho)?;
                triplets.extend(q.matrix.triplets().map(|(i, j, v)| (off + i, off + j, v)));
                logdet += *groups as f64 * within_logdet
                    + operator.dim() as f64 * ar1_logdet(*groups, hyper.group_rho, 1.0);
            }
            BlockKind::Ar1 => {
                triplets.extend(
                    ar1_triplets(n, hyper.week_rho, hyper.week_prec)
                        .into_iter()
                        .map(|(i, j, v)| (off + i, off + j, v)),
                );
                logdet += ar1_logdet(n, hyper.week_rho, hyper.week_prec);
            }
            BlockKind::Rw1 { length } => {
                let rw = rw1_precision(*length, hyper.region_rw_prec)?;
                let mut local = rw.triplets();
                local.extend(rw.constraint_triplets(SOFT_CONSTRAINT_PRECISION));
                for k in 0..n / length {
                    let base = off + k * length;
                    triplets.extend(local.iter().map(|&(i, j, v)| (base + i, base + j, v)));
                }
                logdet += (n / length) as f64
                    * rw1_constrained_logdet(*length, hyper.region_rw_prec, SOFT_CONSTRAINT_PRECISION);
            }
        }
    }
    Ok(PriorPrecision { triplets, logdet })
}

/// Log-likelihood contributions that do not depend on the latent field.
fn likelihood_constant(spec: &ModelSpec, hyper: &Hyperparameters) -> Result<f64> {
    match spec.likelihood {
        Likelihood::Tweedie => {
            let mut total = 0.0;
            for &y in &spec.y {
                total += tweedie::log_series(y, hyper.p, hyper.sigma2)?;
            }
            Ok(total)
        }
        Likelihood::Gaussian => Ok(-0.5 * spec.n_obs() as f64 * (2.0 * PI * hyper.sigma2).ln()),
    }
}

#[inline]
fn obs_terms(lik: Likelihood, y: f64, eta: f64, hyper: &Hyperparameters) -> (f64, f64, f64) {
    match lik {
        Likelihood::Tweedie => {
            let (d1, d2) = tweedie::eta_derivatives(y, eta, hyper.p, hyper.sigma2);
            (tweedie::log_kernel(y, eta, hyper.p, hyper.sigma2), d1, d2)
        }
        Likelihood::Gaussian => {
            let r = y - eta;
            (-0.5 * r * r / hyper.sigma2, r / hyper.sigma2, -1.0 / hyper.sigma2)
        }
    }
}

/// Log hyperprior over the active hyperparameters, on the unconstrained scale.
pub fn log_hyperprior(spec: &ModelSpec, hyper: &Hyperparameters) -> f64 {
    let u = hyper.to_internal();
    let active = spec.active_hypers();
    HyperName::ALL
        .into_iter()
        .filter(|h| active[h.index()])
        .map(|h| spec.priors.log_density(h, u[h.index()]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Result of [`Laplace::find_mode`].
#[derive(Debug, Clone)]
pub struct ModeResult {
    pub mode: Vec<f64>,
    /// `Q + A^T W A` at the mode.
    pub hessian: SymCsc,
    pub factor: Cholesky,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Log-likelihood at the mode, constants included.
    pub log_likelihood: f64,
    /// `x^T Q x` at the mode.
    pub prior_quadratic: f64,
    pub prior_logdet: f64,
}

impl ModeResult {
    /// `log p(y | theta)` up to the hyperprior: the Laplace approximation at the mode.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_likelihood + 0.5 * self.prior_logdet - 0.5 * self.prior_quadratic - 0.5 * self.factor.logdet()
    }
}

/// Precomputed sparsity structure of the posterior Hessian for one model specification.
pub struct Laplace<'a> {
    spec: &'a ModelSpec,
    pattern: SymCsc,
    symbolic: Arc<Symbolic>,
    /// Per observation: `(slot, a_j a_k)` for every lower-triangle pair of its row.
    obs_pairs: Vec<Vec<(usize, f64)>>,
}

impl<'a> Laplace<'a> {
    pub fn new(spec: &'a ModelSpec) -> Result<Self> {
        let reference = Hyperparameters::initial(spec.priors.range_median_km);
        let prior = prior_precision(spec, &reference)?;
        let mut entries: Vec<_> = prior.triplets.iter().map(|&(i, j, _)| (i, j, 0.0)).collect();
        for row in &spec.rows {
            for (a, &(i, _)) in row.iter().enumerate() {
                for &(j, _) in &row[..=a] {
                    entries.push((i, j, 0.0));
                }
            }
        }
        let pattern = SymCsc::from_triplets(spec.dim(), &entries)?;
        let symbolic = Symbolic::analyze(&pattern, &spec.fixed_indices())?;
        let obs_pairs = spec
            .rows
            .iter()
            .map(|row| {
                let mut pairs = Vec::with_capacity(row.len() * (row.len() + 1) / 2);
                for (a, &(i, vi)) in row.iter().enumerate() {
                    for &(j, vj) in &row[..=a] {
                        let s = pattern.slot(i, j).expect("pattern contains every row pair");
                        pairs.push((s, vi * vj));
                    }
                }
                pairs
            })
            .collect();
        Ok(Laplace {
            spec,
            pattern,
            symbolic,
            obs_pairs,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn pattern(&self) -> &SymCsc {
        &self.pattern
    }

    /// Prior precision scattered into the Hessian pattern, and its log determinant.
    pub fn prior(&self, hyper: &Hyperparameters) -> Result<(SymCsc, f64)> {
        let prior = prior_precision(self.spec, hyper)?;
        let mut q = self.pattern.clone();
        let vals = q.values_mut();
        for &(i, j, v) in &prior.triplets {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            let s = self
                .pattern
                .slot(r, c)
                .ok_or_else(|| Error::Spec(format!("prior entry ({r}, {c}) outside the Hessian pattern")))?;
            vals[s] += v;
        }
        Ok((q, prior.logdet))
    }

    fn check_latent(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.dim() {
            return Err(Error::Spec(format!(
                "latent vector has length {}, model dimension is {}",
                x.len(),
                self.spec.dim()
            )));
        }
        Ok(())
    }

    fn log_likelihood(&self, eta: &[f64], hyper: &Hyperparameters, constant: f64) -> f64 {
        let lik = self.spec.likelihood;
        constant
            + self
                .spec
                .y
                .iter()
                .zip(eta)
                .map(|(&y, &e)| obs_terms(lik, y, e, hyper).0)
                .sum::<f64>()
    }

    /// Log joint density of latent field, data and hyperparameters.
    pub fn joint_log_density(&self, x: &[f64], hyper: &Hyperparameters) -> Result<f64> {
        self.check_latent(x)?;
        hyper.validate()?;
        let (q, logdet) = self.prior(hyper)?;
        let eta = self.spec.eta(x);
        let loglik = self.log_likelihood(&eta, hyper, likelihood_constant(self.spec, hyper)?);
        let n = self.spec.dim() as f64;
        Ok(loglik + 0.5 * logdet - 0.5 * n * (2.0 * PI).ln() - 0.5 * q.quad_form(x)
            + log_hyperprior(self.spec, hyper))
    }

    /// Gradient of [`Laplace::joint_log_density`] with respect to the latent field.
    pub fn joint_gradient(&self, x: &[f64], hyper: &Hyperparameters) -> Result<Vec<f64>> {
        self.check_latent(x)?;
        hyper.validate()?;
        let (q, _) = self.prior(hyper)?;
        let g = self.negative_gradient(&q, x, hyper);
        Ok(g.into_iter().map(|v| -v).collect())
    }

    /// Gradient of `-log p(y|x) + x^T Q x / 2`.
    fn negative_gradient(&self, q: &SymCsc, x: &[f64], hyper: &Hyperparameters) -> Vec<f64> {
        let mut g = q.mul_vec(x);
        let lik = self.spec.likelihood;
        for (row, &y) in self.spec.rows.iter().zip(&self.spec.y) {
            let (_, d1, _) = obs_terms(lik, y, dot(row, x), hyper);
            for &(j, v) in row {
                g[j] -= v * d1;
            }
        }
        g
    }

    /// `-log p(y|x) + x^T Q x / 2` without constants.
    fn objective(&self, q: &SymCsc, x: &[f64], hyper: &Hyperparameters) -> f64 {
        let eta = self.spec.eta(x);
        0.5 * q.quad_form(x) - self.log_likelihood(&eta, hyper, 0.0)
    }

    fn hessian(&self, q: &SymCsc, x: &[f64], hyper: &Hyperparameters) -> SymCsc {
        let mut h = q.clone();
        let vals = h.values_mut();
        let lik = self.spec.likelihood;
        for ((row, &y), pairs) in self.spec.rows.iter().zip(&self.spec.y).zip(&self.obs_pairs) {
            let (_, _, d2) = obs_terms(lik, y, dot(row, x), hyper);
            for &(s, aa) in pairs {
                vals[s] -= d2 * aa;
            }
        }
        h
    }

    /// Newton iterations with Armijo backtracking on the negative log posterior of the field.
    pub fn find_mode(&self, hyper: &Hyperparameters, init: &[f64], opts: NewtonOptions) -> Result<ModeResult> {
        self.check_latent(init)?;
        hyper.validate()?;
        let (q, prior_logdet) = self.prior(hyper)?;
        let mut x = init.to_vec();
        let mut f = self.objective(&q, &x, hyper);
        if !f.is_finite() {
            return Err(Error::Initialization("joint log density is not finite at the initial latent vector".into()));
        }
        let mut iterations = 0;
        loop {
            let g = self.negative_gradient(&q, &x, hyper);
            let gradient_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let hessian = self.hessian(&q, &x, hyper);
            let factor = Cholesky::factor(&self.symbolic, &hessian)?;
            if gradient_norm < opts.tol {
                let eta = self.spec.eta(&x);
                return Ok(ModeResult {
                    log_likelihood: self.log_likelihood(&eta, hyper, likelihood_constant(self.spec, hyper)?),
                    prior_quadratic: q.quad_form(&x),
                    prior_logdet,
                    mode: x,
                    hessian,
                    factor,
                    iterations,
                    gradient_norm,
                });
            }
            if iterations == opts.max_iters || !gradient_norm.is_finite() {
                return Err(Error::Convergence {
                    iterations,
                    gradient_norm,
                });
            }
            let step: Vec<f64> = factor.solve(&g).into_iter().map(|v| -v).collect();
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            // Decreases below the rounding level of the objective are indistinguishable from zero.
            let noise = OBJECTIVE_ROUNDOFF * f.abs().max(1.0);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
                let ft = self.objective(&q, &trial, hyper);
                if ft.is_finite() && ft <= f + ARMIJO_C * t * slope + noise {
                    x = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            if !accepted {
                // No decrease is representable: the gradient is at roundoff level for this scale.
                let g = self.negative_gradient(&q, &x, hyper);
                return Err(Error::Convergence {
                    iterations,
                    gradient_norm: g.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                });
            }
        }
    }
}
