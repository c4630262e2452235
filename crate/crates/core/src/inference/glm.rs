//! Starting values for the latent field: a quasi-likelihood GLM on the fixed effects alone.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::spec::{BlockKind, Likelihood, ModelSpec};
use crate::error::{Error, Result};

const IRLS_ITERS: usize = 50;
const IRLS_TOL: f64 = 1e-10;
/// Variance function exponent of the quasi-likelihood.
const VARIANCE_POWER: f64 = 1.5;

/// Latent vector with fixed effects from IRLS (log link, variance `mu^1.5`, ridge equal to the
/// fixed-effect prior precision) and every other block at zero. Gaussian models start at zero.
pub fn glm_start(spec: &ModelSpec) -> Result<Vec<f64>> {
    let mut x = vec![0.0; spec.dim()];
    if spec.likelihood == Likelihood::Gaussian {
        return Ok(x);
    }
    let fixed = spec.fixed_indices();
    if fixed.is_empty() {
        return Ok(x);
    }
    let local: HashMap<usize, usize> = fixed.iter().enumerate().map(|(k, &j)| (j, k)).collect();
    let ridge: Vec<f64> = spec
        .blocks
        .iter()
        .flat_map(|b| match b.kind {
            BlockKind::Fixed { prior_precision } => vec![prior_precision; b.dim()],
            _ => Vec::new(),
        })
        .collect();
    let k = fixed.len();
    let rows: Vec<Vec<(usize, f64)>> = spec
        .rows
        .iter()
        .map(|r| r.iter().filter_map(|&(j, v)| local.get(&j).map(|&c| (c, v))).collect())
        .collect();
    let mut eta: Vec<f64> = spec.y.iter().map(|&y| (y + 0.1).ln()).collect();
    let mut mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
    let mut beta = DVector::<f64>::zeros(k);
    for _ in 0..IRLS_ITERS {
        let mut xtwx = DMatrix::<f64>::zeros(k, k);
        let mut xtwz = DVector::<f64>::zeros(k);
        for (i, row) in rows.iter().enumerate() {
            let w = mu[i].powf(2.0 - VARIANCE_POWER);
            let z = eta[i] + (spec.y[i] - mu[i]) / mu[i];
            for &(a, va) in row {
                xtwz[a] += w * va * z;
                for &(b, vb) in row {
                    xtwx[(a, b)] += w * va * vb;
                }
            }
        }
        for (c, r) in ridge.iter().enumerate() {
            xtwx[(c, c)] += r;
        }
        let next = xtwx
            .cholesky()
            .ok_or_else(|| Error::Initialization("GLM normal equations are singular".into()))?
            .solve(&xtwz);
        let change = (&next - &beta).amax();
        beta = next;
        for (i, row) in rows.iter().enumerate() {
            eta[i] = row.iter().map(|&(c, v)| v * beta[c]).sum::<f64>().clamp(-30.0, 30.0);
            mu[i] = eta[i].exp();
        }
        if change < IRLS_TOL {
            break;
        }
    }
    for (c, &j) in fixed.iter().enumerate() {
        x[j] = beta[c];
    }
    Ok(x)
}
