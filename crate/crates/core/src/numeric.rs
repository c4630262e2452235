//! Small numerical helpers shared across modules.

/// Number of bisection steps used by [`invert_monotone`] before the final interpolation.
pub const BISECTION_STEPS: usize = 26;

/// Upper bracket end is widened until the cdf reaches this value, independently of the level.
const UPPER_TAIL: f64 = 1.0 - 1e-12;

/// Smallest `y >= 0` with `cdf(y) >= level` for a nondecreasing `cdf` on `[0, inf)`.
///
/// Returns 0 when `cdf(0) >= level`. Otherwise bisects on `log y` over a bracket that depends
/// only on `scale` and the distribution (widened upward until nearly all mass is covered), with a
/// fixed number of steps, then interpolates `log y` linearly in the cdf inside the final bracket.
/// Every step is monotone in `level`, so results for different levels are ordered like the levels.
pub fn invert_monotone(cdf: &dyn Fn(f64) -> f64, level: f64, scale: f64) -> f64 {
    if cdf(0.0) >= level {
        return 0.0;
    }
    let mut lo = scale.ln() - 60.0;
    let mut hi = scale.ln() + 5.0;
    let mut f_hi = cdf(hi.exp());
    while f_hi < UPPER_TAIL && hi < 700.0 {
        hi += 5.0;
        f_hi = cdf(hi.exp());
    }
    if f_hi < level {
        return f64::INFINITY;
    }
    let mut f_lo = cdf(lo.exp());
    if f_lo >= level {
        return lo.exp();
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let f_mid = cdf(mid.exp());
        if f_mid >= level {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    let t = if f_hi > f_lo { (level - f_lo) / (f_hi - f_lo) } else { 1.0 };
    (lo + t.clamp(0.0, 1.0) * (hi - lo)).exp()
}

/// `log(sum(exp(v)))` without overflow; `-inf` for an empty slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Standard normal quantile at 0.9.
pub const Z90: f64 = 1.2815515655446004;

/// Nodes and weights with `sum_k w_k f(z_k) ~ E[f(Z)]` for `Z ~ N(0, 1)`, from the physicists'
/// Gauss–Hermite rule by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let z: Vec<f64> = nodes.iter().rev().map(|x| x * std::f64::consts::SQRT_2).collect();
    let w: Vec<f64> = weights.iter().rev().map(|w| w / sqrt_pi).collect();
    (z, w)
}
