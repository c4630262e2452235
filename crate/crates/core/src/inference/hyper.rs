//! Hyperparameters, their unconstrained transforms and hyperpriors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_HYPER: usize = 8;

/// Autocorrelations are mapped to `RHO_CAP * tanh(u / 2)`.
pub const RHO_CAP: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperName {
    P,
    Sigma2,
    SpatialRange,
    SpatialSd,
    GroupRho,
    WeekPrec,
    WeekRho,
    RegionRwPrec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transform {
    /// `p = 1 + logistic(u)`
    Power,
    Log,
    Rho,
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^u)` without overflow.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

impl HyperName {
    pub const ALL: [HyperName; N_HYPER] = [
        HyperName::P,
        HyperName::Sigma2,
        HyperName::SpatialRange,
        HyperName::SpatialSd,
        HyperName::GroupRho,
        HyperName::WeekPrec,
        HyperName::WeekRho,
        HyperName::RegionRwPrec,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn key(self) -> &'static str {
        match self {
            HyperName::P => "p",
            HyperName::Sigma2 => "sigma2",
            HyperName::SpatialRange => "spatial_range_km",
            HyperName::SpatialSd => "spatial_sd",
            HyperName::GroupRho => "group_rho",
            HyperName::WeekPrec => "week_prec",
            HyperName::WeekRho => "week_rho",
            HyperName::RegionRwPrec => "region_rw_prec",
        }
    }

    /// Row label in the fit report.
    pub fn label(self) -> &'static str {
        match self {
            HyperName::P => "p parameter for Tweedie",
            HyperName::Sigma2 => "Dispersion parameter for Tweedie",
            HyperName::SpatialRange => "Range for spatial.field (km)",
            HyperName::SpatialSd => "Stdev for spatial.field",
            HyperName::GroupRho => "GroupRho for spatial.field",
            HyperName::WeekPrec => "Precision for ID.Week",
            HyperName::WeekRho => "Rho for ID.Week",
            HyperName::RegionRwPrec => "Precision for Region",
        }
    }

    pub fn from_key(key: &str) -> Option<HyperName> {
        HyperName::ALL.into_iter().find(|h| h.key() == key)
    }

    fn transform(self) -> Transform {
        match self {
            HyperName::P => Transform::Power,
            HyperName::GroupRho | HyperName::WeekRho => Transform::Rho,
            _ => Transform::Log,
        }
    }

    /// Natural value to the unconstrained scale.
    pub fn to_internal(self, v: f64) -> f64 {
        match self.transform() {
            Transform::Power => {
                let q = v - 1.0;
                q.ln() - (-q).ln_1p()
            }
            Transform::Log => v.ln(),
            Transform::Rho => 2.0 * (v / RHO_CAP).atanh(),
        }
    }

    /// Unconstrained value to the natural scale.
    pub fn from_internal(self, u: f64) -> f64 {
        match self.transform() {
            Transform::Power => 1.0 + logistic(u),
            Transform::Log => u.exp(),
            Transform::Rho => RHO_CAP * (0.5 * u).tanh(),
        }
    }

    pub fn in_domain(self, v: f64) -> bool {
        v.is_finite()
            && match self.transform() {
                Transform::Power => v > 1.0 && v < 2.0,
                Transform::Log => v > 0.0,
                Transform::Rho => v.abs() < RHO_CAP,
            }
    }
}

impl std::fmt::Display for HyperName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Natural-scale hyperparameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub p: f64,
    pub sigma2: f64,
    pub spatial_range_km: f64,
    pub spatial_sd: f64,
    pub group_rho: f64,
    pub week_prec: f64,
    pub week_rho: f64,
    pub region_rw_prec: f64,
}

impl Hyperparameters {
    /// Starting point `p = 1.5`, `sigma2 = 1`, `sd = 1`, rhos 0.5, precisions 1.
    pub fn initial(range_km: f64) -> Self {
        Hyperparameters {
            p: 1.5,
            sigma2: 1.0,
            spatial_range_km: range_km,
            spatial_sd: 1.0,
            group_rho: 0.5,
            week_prec: 1.0,
            week_rho: 0.5,
            region_rw_prec: 1.0,
        }
    }

    pub fn to_array(&self) -> [f64; N_HYPER] {
        [
            self.p,
            self.sigma2,
            self.spatial_range_km,
            self.spatial_sd,
            self.group_rho,
            self.week_prec,
            self.week_rho,
            self.region_rw_prec,
        ]
    }

    pub fn from_array(v: [f64; N_HYPER]) -> Result<Self> {
        let h = Hyperparameters {
            p: v[0],
            sigma2: v[1],
            spatial_range_km: v[2],
            spatial_sd: v[3],
            group_rho: v[4],
            week_prec: v[5],
            week_rho: v[6],
            region_rw_prec: v[7],
        };
        h.validate()?;
        Ok(h)
    }

    pub fn get(&self, name: HyperName) -> f64 {
        self.to_array()[name.index()]
    }

    pub fn with(&self, name: HyperName, value: f64) -> Result<Self> {
        let mut v = self.to_array();
        v[name.index()] = value;
        Hyperparameters::from_array(v)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in HyperName::ALL.into_iter().zip(self.to_array()) {
            if !name.in_domain(v) {
                return Err(Error::domain(format!("hyperparameter {name} = {v} is out of its domain")));
            }
        }
        Ok(())
    }

    pub fn to_internal(&self) -> [f64; N_HYPER] {
        let v = self.to_array();
        std::array::from_fn(|k| HyperName::ALL[k].to_internal(v[k]))
    }

    /// Inverse of [`Hyperparameters::to_internal`]; fails when a value saturates its domain.
    pub fn from_internal(u: &[f64; N_HYPER]) -> Result<Self> {
        Hyperparameters::from_array(std::array::from_fn(|k| HyperName::ALL[k].from_internal(u[k])))
    }
}

/// Weakly informative hyperpriors, expressed as densities of the unconstrained values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    /// Median of the log-normal range prior.
    pub range_median_km: f64,
    pub log_range_sd: f64,
    pub log_sigma2_sd: f64,
    /// Rate of the exponential prior on the spatial sd.
    pub sd_rate: f64,
    /// Rate of the exponential prior on `1/sqrt(precision)`.
    pub prec_sd_rate: f64,
    /// Sd of the normal prior on the transformed autocorrelations.
    pub rho_sd: f64,
}

impl HyperPriors {
    pub fn new(range_median_km: f64) -> Self {
        HyperPriors {
            range_median_km,
            log_range_sd: 1.0,
            log_sigma2_sd: 2.0,
            sd_rate: 1.0,
            prec_sd_rate: 1.0,
            rho_sd: 1.5,
        }
    }

    /// Log density of the unconstrained value `u` of `name`, Jacobian included.
    pub fn log_density(&self, name: HyperName, u: f64) -> f64 {
        match name {
            // uniform p on (1, 2)
            HyperName::P => -softplus(u) - softplus(-u),
            HyperName::Sigma2 => normal_log_pdf(u, 0.0, self.log_sigma2_sd),
            HyperName::SpatialRange => normal_log_pdf(u, self.range_median_km.ln(), self.log_range_sd),
            HyperName::SpatialSd => self.sd_rate.ln() - self.sd_rate * u.exp() + u,
            HyperName::WeekPrec | HyperName::RegionRwPrec => {
                let s = (-0.5 * u).exp();
                self.prec_sd_rate.ln() - self.prec_sd_rate * s + s.ln() - std::f64::consts::LN_2
            }
            HyperName::GroupRho | HyperName::WeekRho => normal_log_pdf(u, 0.0, self.rho_sd),
        }
    }
}

pub(crate) fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use carcasswatch_oracles::quad::integrate;
    use proptest::prelude::*;

    #[test]
    fn internal_round_trip_at_table_values() {
        let h = Hyperparameters {
            p: 1.92,
            sigma2: 0.437,
            spatial_range_km: 192.0,
            spatial_sd: 1.568,
            group_rho: 0.907,
            week_prec: 0.116,
            week_rho: 0.999,
            region_rw_prec: 39.302,
        };
        let back = Hyperparameters::from_internal(&h.to_internal()).unwrap();
        for (a, b) in h.to_array().iter().zip(back.to_array()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn out_of_domain_values_are_rejected() {
        let h = Hyperparameters::initial(100.0);
        assert!(h.with(HyperName::P, 2.0).is_err());
        assert!(h.with(HyperName::WeekRho, 0.99995).is_err());
        assert!(h.with(HyperName::Sigma2, -1.0).is_err());
        assert!(h.with(HyperName::GroupRho, -0.5).is_ok());
    }

    #[test]
    fn priors_integrate_to_one() {
        let pri = HyperPriors::new(200.0);
        for name in HyperName::ALL {
            let f = |u: f64| pri.log_density(name, u).exp();
            let total = integrate(&f, -60.0, 60.0, 1e-12);
            assert!((total - 1.0).abs() < 1e-8, "{name}: {total}");
        }
    }

    proptest! {
        #[test]
        fn transforms_round_trip(u in -8.0f64..8.0, k in 0usize..N_HYPER) {
            let name = HyperName::ALL[k];
            let v = name.from_internal(u);
            prop_assert!(name.in_domain(v));
            let back = name.from_internal(name.to_internal(v));
            prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(1.0), "{} {} {}", name, v, back);
        }
    }
}
