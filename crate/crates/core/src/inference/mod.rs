//! Laplace-approximation inference for latent Gaussian models with Tweedie or Gaussian
//! observations.

mod artifact;
mod glm;
mod hyper;
mod laplace;
mod marginals;
mod model;
mod optimize;
mod predict;
mod scenario;
mod simulate;
mod spec;

pub use artifact::{
    fit_model, BlockLayout, CellKey, FitArtifact, FitSettings, HyperEstimate, LoadedArtifact, Payload,
    ARTIFACT_FORMAT, ARTIFACT_VERSION,
};
pub use glm::glm_start;
pub use hyper::{HyperName, HyperPriors, Hyperparameters, N_HYPER, RHO_CAP};
pub use laplace::{
    log_hyperprior, prior_precision, Laplace, ModeResult, NewtonOptions, PriorPrecision, DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
};
pub use marginals::{expected_count, hyper_marginals, latent_marginals, PosteriorSummary};
pub use model::{
    CellObservation, SurveillanceModel, BLOCK_FIXED, BLOCK_REGION_MONTH, BLOCK_SPATIAL, BLOCK_WEEK,
    FIXED_EFFECT_SD,
};
pub use optimize::{
    finite_difference_hessian, log_marginal_hyper, nelder_mead, optimize_hyper, HyperFit, OptimizeOptions,
    SimplexOptions, SimplexResult,
};
pub use predict::{
    predictive_quantiles, LinearPredictor, PredictiveMethod, PredictiveMixture, DEFAULT_DRAWS, DEFAULT_NODES,
};
pub use scenario::{coast_longitude, coast_site, scenario_origin, simulate_scenario, Scenario, ScenarioConfig};
pub use simulate::{sample_latent_with, sample_prior_latent, sample_response};
pub use spec::{BlockKind, LatentBlock, Likelihood, ModelSpec};
