//! Forward simulation from the latent Gaussian model, used for calibration checks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hyper::Hyperparameters;
use super::laplace::prior_precision;
use super::spec::{Likelihood, ModelSpec};
use crate::error::{Error, Result};
use crate::sparse::{Cholesky, SymCsc};
use crate::tweedie::{self, TweedieParams};

/// Draw of the latent vector from its prior `N(0, Q(hyper)^-1)`.
pub fn sample_prior_latent<R: Rng + ?Sized>(spec: &ModelSpec, hyper: &Hyperparameters, rng: &mut R) -> Result<Vec<f64>> {
    let prior = prior_precision(spec, hyper)?;
    let q = SymCsc::from_triplets(spec.dim(), &prior.triplets)?;
    let factor = Cholesky::new(&q, &[])?;
    let z: Vec<f64> = (0..spec.dim()).map(|_| StandardNormal.sample(rng)).collect();
    Ok(factor.sample_from_standard(&z))
}

/// Responses drawn from the observation model given the latent vector `x`.
pub fn sample_response<R: Rng + ?Sized>(spec: &ModelSpec, x: &[f64], hyper: &Hyperparameters, rng: &mut R) -> Result<Vec<f64>> {
    if x.len() != spec.dim() {
        return Err(Error::Spec(format!("latent vector of length {} for dimension {}", x.len(), spec.dim())));
    }
    spec.eta(x)
        .into_iter()
        .map(|eta| match spec.likelihood {
            Likelihood::Tweedie => Ok(tweedie::sample_one(&TweedieParams::new(eta.exp(), hyper.p, hyper.sigma2)?, rng)),
            Likelihood::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                Ok(eta + hyper.sigma2.sqrt() * z)
            }
        })
        .collect()
}

/// Prior draw of the latent vector with the named coefficients overwritten.
pub fn sample_latent_with<R: Rng + ?Sized>(
    spec: &ModelSpec,
    hyper: &Hyperparameters,
    fixed: &[(&str, f64)],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut x = sample_prior_latent(spec, hyper, rng)?;
    for &(name, v) in fixed {
        let j = spec
            .label_index(name)
            .ok_or_else(|| Error::Lookup(format!("no latent coefficient named {name}")))?;
        x[j] = v;
    }
    Ok(x)
}
