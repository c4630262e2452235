//! Synthetic surveillance data along a stylised Chilean coastline, drawn from the full model.

use std::sync::Arc;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::hyper::Hyperparameters;
use super::model::{CellObservation, SurveillanceModel, BLOCK_FIXED};
use super::simulate::{sample_prior_latent, sample_response};
use crate::error::Result;
use crate::gmrf::{build_mesh, Mesh, MeshParams};
use crate::ingest::{week_month_map, RegionCode, SpeciesGroup, PANEL_WEEKS};
use crate::tweedie::{self, TweedieParams};

/// Coastline as (latitude, longitude) knots from north to south.
const COAST: [(f64, f64); 9] = [
    (-17.5, -70.3),
    (-23.0, -70.5),
    (-30.0, -71.4),
    (-33.0, -71.7),
    (-37.0, -73.3),
    (-41.5, -73.8),
    (-46.0, -75.0),
    (-50.0, -75.3),
    (-53.5, -71.0),
];

/// Latitude span (north, south) of each region's coast.
fn region_span(region: RegionCode) -> (f64, f64) {
    match region.code() {
        15 => (-17.5, -19.2),
        1 => (-19.2, -21.4),
        2 => (-21.4, -26.0),
        3 => (-26.0, -29.2),
        4 => (-29.2, -32.2),
        5 => (-32.2, -33.9),
        6 => (-33.9, -34.7),
        7 => (-34.7, -36.0),
        16 => (-36.0, -36.6),
        8 => (-36.6, -38.3),
        9 => (-38.3, -39.4),
        14 => (-39.4, -40.3),
        10 => (-40.3, -43.8),
        11 => (-43.8, -49.0),
        _ => (-49.0, -53.5),
    }
}

/// Coastal longitude at a latitude, by linear interpolation between knots.
pub fn coast_longitude(lat: f64) -> f64 {
    for w in COAST.windows(2) {
        let ((a, la), (b, lb)) = (w[0], w[1]);
        if lat <= a && lat >= b {
            return la + (lb - la) * (a - lat) / (a - b);
        }
    }
    if lat > COAST[0].0 {
        COAST[0].1
    } else {
        COAST[COAST.len() - 1].1
    }
}

/// A coastal site of `region`; `u` in [0, 1] runs north to south, `offshore_deg` shifts east.
pub fn coast_site(region: RegionCode, u: f64, offshore_deg: f64) -> (f64, f64) {
    let (n, s) = region_span(region);
    let lat = n + (s - n) * u;
    (coast_longitude(lat) + offshore_deg, lat)
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n_observations: usize,
    pub seed: u64,
    pub hyper: Hyperparameters,
    pub intercept: f64,
    /// Standard deviation of the non-intercept fixed effects.
    pub fixed_sd: f64,
    /// Monitoring sites per region; every observation is made at one of them.
    pub sites_per_region: usize,
    pub mesh: MeshParams,
}

impl ScenarioConfig {
    pub fn new(n_observations: usize, seed: u64, hyper: Hyperparameters) -> Self {
        ScenarioConfig {
            n_observations,
            seed,
            hyper,
            intercept: 1.0,
            fixed_sd: 0.5,
            sites_per_region: 6,
            mesh: MeshParams {
                max_edge_km: 150.0,
                outer_max_edge_km: 450.0,
                extension_km: 200.0,
                cutoff_km: 10.0,
            },
        }
    }
}

/// A model whose counts were drawn from known hyperparameters and latent field.
pub struct Scenario {
    pub model: SurveillanceModel,
    pub hyper: Hyperparameters,
    pub latent: Vec<f64>,
    pub seed: u64,
}

/// Panel origin used for synthetic data: Monday 2 January 2023.
pub fn scenario_origin() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date")
}

pub fn simulate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let week_months = week_month_map(scenario_origin(), PANEL_WEEKS);
    let k = cfg.sites_per_region.max(1);
    let sites: Vec<Vec<(f64, f64)>> = RegionCode::ALL
        .iter()
        .map(|&r| {
            (0..k)
                .map(|i| coast_site(r, (i as f64 + rng.random::<f64>()) / k as f64, rng.random_range(0.0..0.3)))
                .collect()
        })
        .collect();
    let obs: Vec<CellObservation> = (0..cfg.n_observations)
        .map(|_| {
            let r = rng.random_range(0..RegionCode::ALL.len());
            let region = RegionCode::ALL[r];
            let group = SpeciesGroup::ALL[rng.random_range(0..SpeciesGroup::ALL.len())];
            let week = rng.random_range(1..=PANEL_WEEKS);
            let (longitude, latitude) = sites[r][rng.random_range(0..k)];
            CellObservation {
                region,
                group,
                week,
                month: week_months[week as usize - 1],
                longitude,
                latitude,
                count: 0.0,
            }
        })
        .collect();
    let locations: Vec<_> = obs.iter().map(|o| (o.longitude, o.latitude)).collect();
    let mesh: Arc<Mesh> = Arc::new(build_mesh(&locations, &cfg.mesh)?);
    let model = SurveillanceModel::with_mesh(obs, week_months, mesh)?;
    let mut latent = sample_prior_latent(&model.spec, &cfg.hyper, &mut rng)?;
    let fixed = model.spec.block_range(model.spec.block_index(BLOCK_FIXED).expect("fixed block"));
    let effect = Normal::new(0.0, cfg.fixed_sd).expect("valid sd");
    for (k, j) in fixed.enumerate() {
        latent[j] = if k == 0 { cfg.intercept } else { effect.sample(&mut rng) };
    }
    let counts = sample_response(&model.spec, &latent, &cfg.hyper, &mut rng)?;
    Ok(Scenario {
        model: model.with_counts(&counts)?,
        hyper: cfg.hyper,
        latent,
        seed: cfg.seed,
    })
}

impl Scenario {
    /// True linear predictor of a (region, group, week) cell at its representative location.
    pub fn true_eta(&self, region: RegionCode, group: SpeciesGroup, week: u32) -> Result<f64> {
        let row = self.model.predictor_row(region, group, week)?;
        Ok(row.iter().map(|&(j, v)| v * self.latent[j]).sum())
    }

    /// Fresh count of a cell from the true model.
    pub fn draw_count<R: Rng + ?Sized>(&self, region: RegionCode, group: SpeciesGroup, week: u32, rng: &mut R) -> Result<f64> {
        let eta = self.true_eta(region, group, week)?;
        Ok(tweedie::sample_one(&TweedieParams::new(eta.exp(), self.hyper.p, self.hyper.sigma2)?, rng))
    }
}
