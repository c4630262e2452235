//! Posterior predictive quantiles of a count: a Gaussian linear predictor pushed through the
//! log link and Tweedie observation noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{gauss_hermite, invert_monotone};
use crate::sparse::{Cholesky, SelectedInverse};
use crate::tweedie::{self, TweedieParams};

/// Poisson terms kept in the mixture cdf (relative weight above `e^-30`).
const CDF_CUTOFF: f64 = 30.0;
pub const DEFAULT_NODES: usize = 20;
pub const DEFAULT_DRAWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictiveMethod {
    /// Gauss–Hermite quadrature over the linear predictor.
    Quadrature { nodes: usize },
    /// Seeded Monte Carlo draws of the linear predictor.
    MonteCarlo { draws: usize, seed: u64 },
}

impl Default for PredictiveMethod {
    fn default() -> Self {
        PredictiveMethod::Quadrature { nodes: DEFAULT_NODES }
    }
}

/// Gaussian approximation of one linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub mean: f64,
    pub sd: f64,
}

impl LinearPredictor {
    /// Mean `a^T x` and variance `a^T H^-1 a`, read from the selected inverse when it covers the
    /// row's pattern and from a triangular solve otherwise.
    pub fn from_row(row: &[(usize, f64)], mode: &[f64], factor: &Cholesky, selected: Option<&SelectedInverse>) -> Self {
        let mean = row.iter().map(|&(j, v)| v * mode[j]).sum();
        let var = selected
            .and_then(|s| s.quadratic_form(row))
            .unwrap_or_else(|| factor.inverse_quadratic_form(row));
        LinearPredictor {
            mean,
            sd: var.max(0.0).sqrt(),
        }
    }
}

/// Mixture of Tweedie laws over a weighted set of linear predictor values.
pub struct PredictiveMixture {
    components: Vec<(f64, TweedieParams)>,
}

impl PredictiveMixture {
    pub fn new(eta: LinearPredictor, p: f64, sigma2: f64, method: PredictiveMethod) -> Result<Self> {
        if !(eta.mean.is_finite() && eta.sd.is_finite() && eta.sd >= 0.0) {
            return Err(Error::domain(format!("invalid linear predictor {eta:?}")));
        }
        let points: Vec<(f64, f64)> = if eta.sd == 0.0 {
            vec![(1.0, eta.mean)]
        } else {
            match method {
                PredictiveMethod::Quadrature { nodes } => {
                    let (z, w) = gauss_hermite(nodes.max(1));
                    w.into_iter().zip(z).map(|(w, z)| (w, eta.mean + eta.sd * z)).collect()
                }
                PredictiveMethod::MonteCarlo { draws, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let w = 1.0 / draws.max(1) as f64;
                    (0..draws.max(1))
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            (w, eta.mean + eta.sd * z)
                        })
                        .collect()
                }
            }
        };
        let components = points
            .into_iter()
            .map(|(w, e)| Ok((w, TweedieParams::new(e.exp(), p, sigma2)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PredictiveMixture { components })
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .map(|(w, t)| w * tweedie::cdf_with_cutoff(y, t, CDF_CUTOFF))
            .sum::<f64>()
            .min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|(w, t)| w * t.mu).sum()
    }

    /// Quantiles at `levels`; bisection brackets are shared across levels so the results are
    /// ordered like the levels.
    pub fn quantiles(&self, levels: &[f64]) -> Result<Vec<f64>> {
        let scale = self.mean().max(1e-12);
        let f = |y: f64| self.cdf(y);
        levels
            .iter()
            .map(|&l| {
                if !(l > 0.0 && l < 1.0) {
                    return Err(Error::domain(format!("quantile level must lie in (0, 1), got {l}")));
                }
                Ok(invert_monotone(&f, l, scale))
            })
            .collect()
    }
}

/// Predictive quantiles of a count whose log mean is `eta`.
pub fn predictive_quantiles(
    eta: LinearPredictor,
    p: f64,
    sigma2: f64,
    levels: &[f64],
    method: PredictiveMethod,
) -> Result<Vec<f64>> {
    PredictiveMixture::new(eta, p, sigma2, method)?.quantiles(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_predictor_matches_tweedie_quantile() {
        let eta = LinearPredictor { mean: 1.2f64.ln(), sd: 0.0 };
        let q = predictive_quantiles(eta, 1.6, 0.8, &[0.3, 0.5, 0.9], PredictiveMethod::default()).unwrap();
        let t = TweedieParams::new(1.2, 1.6, 0.8).unwrap();
        for (qq, l) in q.iter().zip([0.3, 0.5, 0.9]) {
            let direct = tweedie::quantile(l, &t).unwrap();
            assert!((qq - direct).abs() < 1e-8 * direct.max(1.0), "{qq} vs {direct}");
        }
    }

    #[test]
    fn quantiles_are_nested() {
        let eta = LinearPredictor { mean: 1.0, sd: 0.7 };
        let levels = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];
        let q = predictive_quantiles(eta, 1.9, 0.4, &levels, PredictiveMethod::default()).unwrap();
        assert!(q.windows(2).all(|w| w[0] <= w[1]), "{q:?}");
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let eta = LinearPredictor { mean: 1.5, sd: 0.5 };
        let gh = predictive_quantiles(eta, 1.92, 0.437, &[0.1, 0.5, 0.9], PredictiveMethod::default()).unwrap();
        let mc = predictive_quantiles(
            eta,
            1.92,
            0.437,
            &[0.1, 0.5, 0.9],
            PredictiveMethod::MonteCarlo { draws: 4000, seed: 7 },
        )
        .unwrap();
        for (a, b) in gh.iter().zip(&mc) {
            assert!((a - b).abs() < 0.04 * a.max(0.1), "{gh:?} vs {mc:?}");
        }
        let again = predictive_quantiles(
            eta,
            1.92,
            0.437,
            &[0.1, 0.5, 0.9],
            PredictiveMethod::MonteCarlo { draws: 4000, seed: 7 },
        )
        .unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn median_increases_with_mean() {
        let mut last = 0.0;
        for m in [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
            let eta = LinearPredictor { mean: m, sd: 0.3 };
            let q = predictive_quantiles(eta, 1.5, 1.0, &[0.5], PredictiveMethod::default()).unwrap()[0];
            assert!(q >= last);
            last = q;
        }
        assert!(last > 0.0);
    }
}
