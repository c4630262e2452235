//! Gaussian marginal summaries of latent coefficients and hyperparameters.

use serde::{Deserialize, Serialize};

use super::hyper::{HyperName, Hyperparameters, N_HYPER};
use super::laplace::ModeResult;
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::ingest::{DesignColumn, RegionCode, SpeciesGroup};
use crate::numeric::{gauss_hermite, Z90};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub mode: f64,
    /// The 80% interval `[q10, q90]` excludes zero.
    pub significant: bool,
}

impl PosteriorSummary {
    pub fn gaussian(name: &str, mean: f64, sd: f64) -> Self {
        let sd = sd.max(0.0);
        let q10 = mean - Z90 * sd;
        let q90 = mean + Z90 * sd;
        PosteriorSummary {
            name: name.to_owned(),
            mean,
            sd,
            q10,
            q50: mean,
            q90,
            mode: mean,
            significant: q10 > 0.0 || q90 < 0.0,
        }
    }
}

/// Per-coefficient summaries from the Gaussian approximation at the mode: means from the
/// mode, variances from the selected inverse of the Hessian.
pub fn latent_marginals(spec: &ModelSpec, mode: &ModeResult) -> Vec<PosteriorSummary> {
    let var = mode.factor.inverse_diagonal();
    spec.labels()
        .zip(mode.mode.iter().zip(&var))
        .map(|(name, (&m, &v))| PosteriorSummary::gaussian(name, m, v.max(0.0).sqrt()))
        .collect()
}

/// Summaries of the hyperparameters from a Gaussian on the unconstrained scale. Quantiles and
/// mode map through the monotone transforms; mean and sd are Gauss–Hermite moments. Entries
/// outside `free` are reported as point values.
pub fn hyper_marginals(
    mode: &Hyperparameters,
    free: &[bool; N_HYPER],
    covariance: &[Vec<f64>],
) -> Vec<PosteriorSummary> {
    let (z, w) = gauss_hermite(41);
    let u = mode.to_internal();
    let mut k = 0;
    HyperName::ALL
        .into_iter()
        .map(|name| {
            let i = name.index();
            let value = mode.get(name);
            if !free[i] {
                return point_summary(name.key(), value);
            }
            let sd_u = covariance[k][k].max(0.0).sqrt();
            k += 1;
            let f = |x: f64| name.from_internal(u[i] + sd_u * x);
            let mean: f64 = z.iter().zip(&w).map(|(&x, &w)| w * f(x)).sum();
            let second: f64 = z.iter().zip(&w).map(|(&x, &w)| w * (f(x) - mean).powi(2)).sum();
            PosteriorSummary {
                name: name.key().to_owned(),
                mean,
                sd: second.max(0.0).sqrt(),
                q10: f(-Z90),
                q50: f(0.0),
                q90: f(Z90),
                mode: value,
                significant: f(-Z90) > 0.0 || f(Z90) < 0.0,
            }
        })
        .collect()
}

fn point_summary(name: &str, v: f64) -> PosteriorSummary {
    PosteriorSummary {
        name: name.to_owned(),
        mean: v,
        sd: 0.0,
        q10: v,
        q50: v,
        q90: v,
        mode: v,
        significant: v != 0.0,
    }
}

/// `exp(intercept + species + region + interaction)` from posterior means of the fixed effects.
/// Baseline levels contribute nothing; any other required label must be present.
pub fn expected_count(summary: &[PosteriorSummary], species: SpeciesGroup, region: RegionCode) -> Result<f64> {
    let mean = |col: DesignColumn| -> Result<f64> {
        let name = col.name();
        summary
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.mean)
            .ok_or_else(|| Error::Lookup(format!("no posterior summary for {name}")))
    };
    let mut eta = mean(DesignColumn::Intercept)?;
    let sp = species != SpeciesGroup::BASELINE;
    let rg = region != RegionCode::BASELINE;
    if sp {
        eta += mean(DesignColumn::Species(species))?;
    }
    if rg {
        eta += mean(DesignColumn::Region(region))?;
    }
    if sp && rg {
        eta += mean(DesignColumn::Interaction(species, region))?;
    }
    Ok(eta.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_summary_quantiles() {
        let s = PosteriorSummary::gaussian("x", 1.0, 0.5);
        assert!(s.q10 <= s.q50 && s.q50 <= s.q90);
        assert!((s.q90 - s.q10 - 2.0 * Z90 * 0.5).abs() < 1e-15);
        assert!(s.significant);
        assert!(!PosteriorSummary::gaussian("y", 0.1, 0.5).significant);
    }

    #[test]
    fn hyper_summary_maps_quantiles() {
        let h = Hyperparameters::initial(200.0);
        let mut free = [false; N_HYPER];
        free[HyperName::P.index()] = true;
        free[HyperName::Sigma2.index()] = true;
        let cov = vec![vec![0.04, 0.0], vec![0.0, 0.01]];
        let s = hyper_marginals(&h, &free, &cov);
        let sig = &s[HyperName::Sigma2.index()];
        assert!((sig.q90 - (Z90 * 0.1f64).exp()).abs() < 1e-14);
        // log-normal mean and sd
        assert!((sig.mean - (0.005f64).exp()).abs() < 1e-12);
        let lnsd = ((0.01f64.exp() - 1.0) * 0.01f64.exp()).sqrt();
        assert!((sig.sd - lnsd).abs() < 1e-10);
        let p = &s[HyperName::P.index()];
        assert!(p.q10 < 1.5 && p.q90 > 1.5 && p.q10 > 1.0 && p.q90 < 2.0);
        let rng = &s[HyperName::SpatialRange.index()];
        assert_eq!((rng.sd, rng.q10, rng.q90), (0.0, 200.0, 200.0));
    }
}
