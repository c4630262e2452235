//! Compound Poisson–gamma density evaluated as the literal Poisson mixture of gamma densities.

use statrs::function::gamma::ln_gamma;

use crate::quad::integrate;

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log f(y)` for `y > 0` as `log sum_n Pois(n; lambda) Gamma(y; n a, scale)`.
pub fn log_density_direct(y: f64, mu: f64, p: f64, sigma2: f64) -> f64 {
    assert!(y > 0.0);
    let lambda = mu.powf(2.0 - p) / (sigma2 * (2.0 - p));
    let shape = (2.0 - p) / (p - 1.0);
    let scale = sigma2 * (p - 1.0) * mu.powf(p - 1.0);
    let term = |n: f64| {
        let a = n * shape;
        n * lambda.ln() - lambda - ln_gamma(n + 1.0) + (a - 1.0) * y.ln()
            - y / scale
            - ln_gamma(a)
            - a * scale.ln()
    };
    let mut terms = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut n = 1.0;
    loop {
        let t = term(n);
        best = best.max(t);
        terms.push(t);
        if t < best - 60.0 && n > lambda {
            break;
        }
        n += 1.0;
    }
    log_sum_exp(&terms)
}

/// Power substitution `y = t^k` that flattens the `y^(shape - 1)` singularity at zero.
fn substitution_power(p: f64) -> f64 {
    let shape = (2.0 - p) / (p - 1.0);
    if shape < 1.0 {
        1.0 / shape
    } else {
        1.0
    }
}

/// `integral_a^b dens(y) dy` for a Tweedie density with power `p` (continuous part only).
pub fn integrate_density(dens: &dyn Fn(f64) -> f64, p: f64, a: f64, b: f64) -> f64 {
    let k = substitution_power(p);
    let g = |t: f64| dens(t.powf(k)) * k * t.powf(k - 1.0);
    integrate(&g, a.powf(1.0 / k), b.powf(1.0 / k), 1e-12)
}

/// Positive part of the support carrying all but a negligible tail: mean plus 60 standard
/// deviations plus 60 gamma scales.
pub fn upper_limit(mu: f64, p: f64, sigma2: f64) -> f64 {
    let sd = (sigma2 * mu.powf(p)).sqrt();
    let scale = sigma2 * (p - 1.0) * mu.powf(p - 1.0);
    mu + 60.0 * sd + 60.0 * scale
}

/// Cumulative distribution at each point of the ascending `grid` (first point 0), as zero mass
/// plus accumulated quadrature of the density between consecutive grid points.
pub fn cdf_on_grid(dens: &dyn Fn(f64) -> f64, p: f64, zero_mass: f64, grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = zero_mass;
    let mut prev = 0.0;
    for &g in grid {
        if g > prev {
            acc += integrate_density(dens, p, prev, g);
            prev = g;
        }
        out.push(acc);
    }
    out
}
