//! Tweedie compound Poisson–gamma observation model for power `p` in (1, 2).
//!
//! With mean `mu`, power `p` and dispersion `sigma2`, `Y = sum_{k<=N} G_k` where
//! `N ~ Poisson(lambda)`, `lambda = mu^(2-p) / (sigma2 (2-p))`, and the `G_k` are gamma with
//! shape `(2-p)/(p-1)` and scale `sigma2 (p-1) mu^(p-1)`. `Var(Y) = sigma2 mu^p`.
//!
//! The density factors as `f(y) = a(y; sigma2, p) exp((y theta - kappa) / sigma2)` with
//! `theta = mu^(1-p)/(1-p)`, `kappa = mu^(2-p)/(2-p)`; `a` is an infinite series that does not
//! depend on `mu`, so derivatives with respect to the log-mean are closed form.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Series terms smaller than the peak term by this many log units are dropped.
pub const DEFAULT_SERIES_CUTOFF: f64 = 37.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TweedieParams {
    pub mu: f64,
    pub p: f64,
    pub sigma2: f64,
}

fn check_power(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 && p < 2.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("Tweedie power must lie in (1, 2), got {p}")))
    }
}

fn check_dispersion(sigma2: f64) -> Result<()> {
    if sigma2.is_finite() && sigma2 > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("dispersion must be positive and finite, got {sigma2}")))
    }
}

impl TweedieParams {
    pub fn new(mu: f64, p: f64, sigma2: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::domain(format!("mean must be positive and finite, got {mu}")));
        }
        check_power(p)?;
        check_dispersion(sigma2)?;
        Ok(TweedieParams { mu, p, sigma2 })
    }

    /// Poisson rate of the number of gamma summands.
    pub fn lambda(&self) -> f64 {
        self.mu.powf(2.0 - self.p) / (self.sigma2 * (2.0 - self.p))
    }

    pub fn gamma_shape(&self) -> f64 {
        (2.0 - self.p) / (self.p - 1.0)
    }

    pub fn gamma_scale(&self) -> f64 {
        self.sigma2 * (self.p - 1.0) * self.mu.powf(self.p - 1.0)
    }

    pub fn variance(&self) -> f64 {
        self.sigma2 * self.mu.powf(self.p)
    }

    /// Probability of an exact zero.
    pub fn zero_mass(&self) -> f64 {
        (-self.lambda()).exp()
    }
}

/// `log a(y; sigma2, p)`: the mean-free part of the log density. Zero at `y = 0`.
pub fn log_series(y: f64, p: f64, sigma2: f64) -> Result<f64> {
    log_series_with_cutoff(y, p, sigma2, DEFAULT_SERIES_CUTOFF)
}

/// As [`log_series`], dropping terms more than `cutoff` log units below the largest.
pub fn log_series_with_cutoff(y: f64, p: f64, sigma2: f64, cutoff: f64) -> Result<f64> {
    check_power(p)?;
    check_dispersion(sigma2)?;
    if !(y.is_finite() && y >= 0.0) {
        return Err(Error::domain(format!("observation must be finite and non-negative, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    // alpha = (2-p)/(1-p) < 0; log W_j = j z - lgamma(j+1) - lgamma(-j alpha).
    let alpha = (2.0 - p) / (1.0 - p);
    let z = -alpha * y.ln() + alpha * (p - 1.0).ln() - (1.0 - alpha) * sigma2.ln() - (2.0 - p).ln();
    let log_term = |j: f64| j * z - ln_gamma(j + 1.0) - ln_gamma(-j * alpha);

    let j_peak = (y.powf(2.0 - p) / (sigma2 * (2.0 - p))).round().max(1.0);
    let peak = log_term(j_peak);

    let mut sum = 1.0; // terms relative to the peak
    let mut j = j_peak + 1.0;
    loop {
        let rel = log_term(j) - peak;
        if rel < -cutoff {
            break;
        }
        sum += rel.exp();
        j += 1.0;
    }
    let mut j = j_peak - 1.0;
    while j >= 1.0 {
        let rel = log_term(j) - peak;
        if rel < -cutoff {
            break;
        }
        sum += rel.exp();
        j -= 1.0;
    }
    Ok(peak + sum.ln() - y.ln())
}

/// Log-likelihood contribution of `y` as a function of the log mean, without the series term.
#[inline]
pub fn log_kernel(y: f64, eta: f64, p: f64, sigma2: f64) -> f64 {
    let m1 = ((1.0 - p) * eta).exp(); // mu^(1-p)
    let m2 = ((2.0 - p) * eta).exp(); // mu^(2-p)
    (y * m1 / (1.0 - p) - m2 / (2.0 - p)) / sigma2
}

/// First and second derivatives of the log density with respect to `eta = log mu`.
/// The second derivative is strictly negative for `y >= 0`.
#[inline]
pub fn eta_derivatives(y: f64, eta: f64, p: f64, sigma2: f64) -> (f64, f64) {
    let m1 = ((1.0 - p) * eta).exp();
    let m2 = ((2.0 - p) * eta).exp();
    let d1 = (y * m1 - m2) / sigma2;
    let d2 = ((1.0 - p) * y * m1 - (2.0 - p) * m2) / sigma2;
    (d1, d2)
}

/// `log f(y)`. For `y = 0` this is exactly `-lambda`.
pub fn log_density(y: f64, params: &TweedieParams) -> Result<f64> {
    log_density_with_cutoff(y, params, DEFAULT_SERIES_CUTOFF)
}

pub fn log_density_with_cutoff(y: f64, params: &TweedieParams, cutoff: f64) -> Result<f64> {
    let TweedieParams { mu, p, sigma2 } = TweedieParams::new(params.mu, params.p, params.sigma2)?;
    if y == 0.0 {
        return Ok(-params.lambda());
    }
    let series = log_series_with_cutoff(y, p, sigma2, cutoff)?;
    Ok(series + log_kernel(y, mu.ln(), p, sigma2))
}

/// Unit deviance `2 * integral_mu^y (y - t) / t^p dt`; zero iff `y == mu`.
pub fn deviance(y: f64, mu: f64, p: f64) -> Result<f64> {
    check_power(p)?;
    if !(y.is_finite() && y >= 0.0 && mu.is_finite() && mu > 0.0) {
        return Err(Error::domain(format!("deviance needs y >= 0 and mu > 0, got ({y}, {mu})")));
    }
    let a = if y > 0.0 {
        y.powf(2.0 - p) / ((1.0 - p) * (2.0 - p))
    } else {
        0.0
    };
    let b = y * mu.powf(1.0 - p) / (1.0 - p);
    let c = mu.powf(2.0 - p) / (2.0 - p);
    Ok((2.0 * (a - b + c)).max(0.0))
}

/// Range of Poisson counts carrying all but ~`exp(-cutoff)` of the mass.
fn poisson_window(lambda: f64, cutoff: f64) -> (u64, u64, f64) {
    let mode = lambda.floor().max(0.0);
    let log_pmf = |n: f64| n * lambda.ln() - lambda - ln_gamma(n + 1.0);
    let peak = log_pmf(mode);
    let mut lo = mode;
    while lo > 0.0 && log_pmf(lo - 1.0) - peak > -cutoff {
        lo -= 1.0;
    }
    let mut hi = mode;
    while log_pmf(hi + 1.0) - peak > -cutoff {
        hi += 1.0;
    }
    (lo as u64, hi as u64, lambda.ln())
}

/// `P(Y <= y)`, summing Poisson-weighted regularized incomplete gamma functions.
pub fn cdf(y: f64, params: &TweedieParams) -> f64 {
    cdf_with_cutoff(y, params, DEFAULT_SERIES_CUTOFF)
}

/// [`cdf`] keeping Poisson terms within `cutoff` log-units of the largest one.
pub fn cdf_with_cutoff(y: f64, params: &TweedieParams, cutoff: f64) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    let lambda = params.lambda();
    let zero = (-lambda).exp();
    if y == 0.0 {
        return zero;
    }
    let shape = params.gamma_shape();
    let x = y / params.gamma_scale();
    let (lo, hi, log_lambda) = poisson_window(lambda, cutoff);
    let mut total = zero;
    let start = lo.max(1);
    let mut w = (start as f64 * log_lambda - lambda - ln_gamma(start as f64 + 1.0)).exp();
    for n in start..=hi {
        let a = n as f64 * shape;
        // Chernoff bound on either gamma tail: exp(-(x - a - a ln(x / a))).
        let exponent = x - a - a * (x / a).ln();
        if exponent > SATURATION_EXPONENT {
            if x < a {
                break;
            }
            total += w;
        } else {
            total += w * gamma_lr(a, x);
        }
        w *= lambda / (n as f64 + 1.0);
    }
    total.min(1.0)
}

/// Gamma cdf values within `e^-40` of 0 or 1 are not evaluated.
const SATURATION_EXPONENT: f64 = 40.0;

/// Smallest `y` with `P(Y <= y) >= level`, by bisection.
pub fn quantile(level: f64, params: &TweedieParams) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0, 1), got {level}")));
    }
    let f = |y: f64| cdf(y, params);
    Ok(crate::numeric::invert_monotone(&f, level, params.mu.max(1e-12)))
}

/// Draw one variate.
pub fn sample_one<R: Rng + ?Sized>(params: &TweedieParams, rng: &mut R) -> f64 {
    let lambda = params.lambda();
    let n: f64 = Poisson::new(lambda)
        .expect("validated positive rate")
        .sample(rng);
    if n == 0.0 {
        return 0.0;
    }
    Gamma::new(n * params.gamma_shape(), params.gamma_scale())
        .expect("validated positive shape and scale")
        .sample(rng)
}

/// `n` draws: `N ~ Poisson(lambda)` then the sum of `N` gamma variates, which is gamma with
/// shape `N * shape`. Deterministic for a fixed seed.
pub fn sample(params: &TweedieParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    let params = TweedieParams::new(params.mu, params.p, params.sigma2)?;
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sample_one(&params, &mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use carcasswatch_oracles as oracle;

    #[test]
    fn zero_mass_closed_form() {
        let params = TweedieParams::new(1.0, 1.5, 1.0).unwrap();
        assert_eq!(log_density(0.0, &params).unwrap(), -2.0);
    }

    #[test]
    fn domain_errors() {
        assert!(TweedieParams::new(1.0, 2.0, 1.0).is_err());
        assert!(TweedieParams::new(1.0, 1.0, 1.0).is_err());
        assert!(TweedieParams::new(f64::NAN, 1.5, 1.0).is_err());
        assert!(TweedieParams::new(1.0, 1.5, 0.0).is_err());
        let params = TweedieParams { mu: 1.0, p: 2.5, sigma2: 1.0 };
        assert!(log_density(1.0, &params).is_err());
        let ok = TweedieParams::new(1.0, 1.5, 1.0).unwrap();
        assert!(log_density(f64::INFINITY, &ok).is_err());
        assert!(log_density(-1.0, &ok).is_err());
        assert!(deviance(1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn series_matches_direct_poisson_gamma_sum() {
        for &(y, mu, p, s2) in &[
            (2.0, 1.5, 1.92, 0.437),
            (0.3, 1.0, 1.5, 1.0),
            (175.0, 60.0, 1.6, 0.8),
            (1.0, 0.2, 1.2, 2.0),
            (12.0, 3.0, 1.05, 0.5),
        ] {
            let params = TweedieParams::new(mu, p, s2).unwrap();
            let ours = log_density(y, &params).unwrap();
            let direct = oracle::tweedie::log_density_direct(y, mu, p, s2);
            assert!((ours - direct).abs() < 1e-9, "y={y} mu={mu} p={p}: {ours} vs {direct}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (y, p, s2) = (3.0, 1.7, 0.6);
        for eta in [-2.0, 0.0, 1.3, 4.0] {
            let (d1, d2) = eta_derivatives(y, eta, p, s2);
            let h = 1e-5;
            let f = |e: f64| log_kernel(y, e, p, s2);
            let fd1 = (f(eta + h) - f(eta - h)) / (2.0 * h);
            let g = |e: f64| eta_derivatives(y, e, p, s2).0;
            let fd2 = (g(eta + h) - g(eta - h)) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((d2 - fd2).abs() < 1e-6 * (1.0 + d2.abs()));
            assert!(d2 < 0.0);
        }
    }

    #[test]
    fn truncation_is_monotone() {
        let params = TweedieParams::new(1.5, 1.92, 0.437).unwrap();
        for y in [0.01, 2.0, 40.0] {
            let reference = log_density_with_cutoff(y, &params, 80.0).unwrap();
            for cutoff in [10.0, 20.0, 30.0, 37.0, 50.0] {
                let v = log_density_with_cutoff(y, &params, cutoff).unwrap();
                let tol = (-cutoff as f64).exp() * 50.0;
                assert!((v - reference).abs() <= tol.max(1e-15), "y={y} cutoff={cutoff}");
            }
        }
    }

    #[test]
    fn continuous_in_power() {
        for y in [0.5, 2.0, 30.0] {
            let step = 1e-4;
            let vals: Vec<f64> = (0..=9400)
                .map(|k| 1.05 + step * k as f64)
                .map(|p| log_density(y, &TweedieParams::new(2.0, p, 0.8).unwrap()).unwrap())
                .collect();
            // A jump of size J between neighbours shows up as a third difference of order J.
            for w in vals.windows(4) {
                let third = w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0];
                assert!(third.abs() < 1e-6, "y={y}: third difference {third}");
            }
        }
    }

    #[test]
    fn deviance_closed_forms() {
        assert_eq!(deviance(3.0, 3.0, 1.3).unwrap(), 0.0);
        assert_eq!(deviance(3.0, 3.0, 1.9).unwrap(), 0.0);
        assert!((deviance(0.0, 1.0, 1.5).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn deviance_matches_quadrature() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let y = 20.0 * next();
            let mu = 0.05 + 20.0 * next();
            let p = 1.01 + 0.98 * next();
            let ours = deviance(y, mu, p).unwrap();
            let integrand = |t: f64| (y - t) / t.powf(p);
            let quad = if y > 0.0 {
                2.0 * oracle::quad::integrate(&integrand, mu, y, 1e-13)
            } else {
                // Integral from mu down to 0 of -t^(1-p): integrable, but change variables
                // t = s^(1/(2-p)) to remove the endpoint singularity of its derivative.
                let k = 1.0 / (2.0 - p);
                let g = |s: f64| {
                    let t = s.powf(k);
                    t / t.powf(p) * k * s.powf(k - 1.0)
                };
                2.0 * oracle::quad::integrate(&g, 0.0, mu.powf(2.0 - p), 1e-13)
            };
            assert!((ours - quad).abs() < 1e-8 * (1.0 + ours.abs()), "y={y} mu={mu} p={p}: {ours} vs {quad}");
        }
    }

    #[test]
    fn cdf_matches_integrated_density() {
        for &(mu, p, s2) in &[(1.0, 1.5, 1.0), (1.5, 1.92, 0.437), (6.0, 1.3, 0.7)] {
            let params = TweedieParams::new(mu, p, s2).unwrap();
            let dens = |y: f64| log_density(y, &params).unwrap().exp();
            for y in [0.1 * mu, mu, 3.0 * mu] {
                let integrated = params.zero_mass() + oracle::tweedie::integrate_density(&dens, p, 0.0, y);
                assert!((cdf(y, &params) - integrated).abs() < 1e-7, "mu={mu} p={p} y={y}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let params = TweedieParams::new(2.0, 1.6, 0.9).unwrap();
        for level in [0.1, 0.5, 0.9, 0.99] {
            let q = quantile(level, &params).unwrap();
            if q > 0.0 {
                assert!((cdf(q, &params) - level).abs() < 1e-9);
            } else {
                assert!(params.zero_mass() >= level);
            }
        }
        // Below the zero mass the quantile is exactly zero.
        let heavy_zero = TweedieParams::new(0.1, 1.5, 1.0).unwrap();
        assert_eq!(quantile(0.3, &heavy_zero).unwrap(), 0.0);
    }

    #[test]
    fn sample_mean_within_three_se() {
        let params = TweedieParams::new(2.0, 1.5, 0.8).unwrap();
        let draws = sample(&params, 1_000_000, 7).unwrap();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let m4 = draws.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        assert!((mean - 2.0).abs() < 3.0 * (var / n).sqrt(), "mean {mean}");
        let target = 0.8 * 2f64.powf(1.5);
        let se_var = ((m4 - var * var) / n).sqrt();
        assert!((var - target).abs() < 3.0 * se_var, "var {var} vs {target}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let params = TweedieParams::new(2.0, 1.5, 0.8).unwrap();
        assert_eq!(sample(&params, 100, 3).unwrap(), sample(&params, 100, 3).unwrap());
        assert_ne!(sample(&params, 100, 3).unwrap(), sample(&params, 100, 4).unwrap());
        assert!(sample(&params, 0, 3).is_err());
    }

    #[test]
    fn poisson_limit_zero_proportion() {
        let mu = 1.3;
        let params = TweedieParams::new(mu, 1.0 + 1e-4, 1.0).unwrap();
        let draws = sample(&params, 200_000, 11).unwrap();
        let zeros = draws.iter().filter(|&&x| x == 0.0).count() as f64 / draws.len() as f64;
        let target = (-mu as f64).exp();
        let se = (target * (1.0 - target) / draws.len() as f64).sqrt();
        assert!((zeros - target).abs() < 4.0 * se + 2e-4, "{zeros} vs {target}");
    }

    /// As p -> 1 with unit dispersion the law tends to Poisson(mu): the density spikes at the
    /// integers, so compare the mass of a window around y = 1 with the Poisson pmf.
    #[test]
    fn poisson_limit_mass_near_one() {
        let params = TweedieParams::new(1.0, 1.0 + 1e-4, 1.0).unwrap();
        let mass = cdf(1.5, &params) - cdf(0.5, &params);
        let pmf = (-1.0f64).exp();
        assert!((mass - pmf).abs() < 1e-3, "{mass} vs {pmf}");
        let dens = |y: f64| log_density(y, &params).unwrap().exp();
        let integrated = oracle::quad::integrate(&dens, 0.5, 1.5, 1e-10);
        assert!((integrated - pmf).abs() < 1e-3, "{integrated} vs {pmf}");
    }
}
