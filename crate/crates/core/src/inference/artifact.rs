//! The fitted-model artifact: everything charts, maps and reports need, without refitting.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::hyper::{HyperName, Hyperparameters};
use super::laplace::Laplace;
use super::marginals::{hyper_marginals, latent_marginals, PosteriorSummary};
use super::model::{SurveillanceModel, BLOCK_FIXED, BLOCK_SPATIAL};
use super::optimize::{optimize_hyper, OptimizeOptions};
use super::predict::{LinearPredictor, PredictiveMethod};
use crate::error::{Error, Result};
use crate::gmrf::{Mesh, MeshJson, MeshParams};
use crate::ingest::{DatasetSummary, RegionCode, SpeciesGroup};
use crate::monitor::{check_level, predictive_band, seeded, week_seed, Band, DEFAULT_LEVEL};

pub const ARTIFACT_FORMAT: &str = "carcasswatch-fit";
pub const ARTIFACT_VERSION: u32 = 1;

/// A dense `f64` array stored as base64 little-endian bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub data: String,
}

impl Payload {
    pub fn encode(values: &[f64], shape: Vec<usize>) -> Self {
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Payload {
            dtype: "f64le".into(),
            shape,
            data: BASE64.encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<Vec<f64>> {
        if self.dtype != "f64le" {
            return Err(Error::Artifact(format!("unsupported payload dtype {}", self.dtype)));
        }
        let bytes = BASE64
            .decode(&self.data)
            .map_err(|e| Error::Artifact(format!("payload is not base64: {e}")))?;
        let expected: usize = self.shape.iter().product();
        if bytes.len() != expected * 8 {
            return Err(Error::Artifact(format!(
                "payload holds {} bytes, shape {:?} needs {}",
                bytes.len(),
                self.shape,
                expected * 8
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub mesh: MeshParams,
    pub predictive: PredictiveMethod,
    /// Seed of any Monte Carlo step downstream of the fit.
    pub seed: u64,
    /// Level of the control-chart bands stored with the fit.
    pub level: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            mesh: MeshParams::default(),
            predictive: PredictiveMethod::default(),
            seed: 20230101,
            level: DEFAULT_LEVEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperEstimate {
    pub mode: Hyperparameters,
    pub free: Vec<HyperName>,
    /// Covariance on the unconstrained scale, indexed like `free`.
    pub covariance: Vec<Vec<f64>>,
    pub log_posterior: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub name: String,
    pub offset: usize,
    pub dim: usize,
}

/// A modelled (region, group) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub region: RegionCode,
    pub group: SpeciesGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub format: String,
    pub version: u32,
    pub spec_fingerprint: String,
    pub settings: FitSettings,
    pub n_observations: usize,
    pub hyper: HyperEstimate,
    pub hyper_summaries: Vec<PosteriorSummary>,
    pub fixed_effects: Vec<PosteriorSummary>,
    pub blocks: Vec<BlockLayout>,
    pub latent_labels: Vec<String>,
    pub latent_mode: Payload,
    pub latent_sd: Payload,
    pub mesh: MeshJson,
    pub week_months: Vec<u32>,
    pub cells: Vec<CellKey>,
    /// Linear predictor mean and sd, shape `[cells, weeks]`.
    pub eta_mean: Payload,
    pub eta_sd: Payload,
    /// Chart bands at `settings.level`, shape `[cells, weeks, 3]` (lower, median, upper).
    pub bands: Payload,
    /// Observed count per cell and week; `None` marks a week without field visits.
    pub observed: Vec<Vec<Option<f64>>>,
    /// Descriptive data of the fitted dataset, when it came from records.
    pub data: Option<DatasetSummary>,
}

/// Fit `model` and package the result with the descriptive `data` it was built from.
pub fn fit_model(model: &SurveillanceModel, data: Option<&DatasetSummary>, settings: FitSettings, opts: &OptimizeOptions) -> Result<FitArtifact> {
    check_level(settings.level)?;
    let spec = &model.spec;
    let lap = Laplace::new(spec)?;
    let init = Hyperparameters::initial(spec.priors.range_median_km);
    let fit = optimize_hyper(&lap, &init, opts)?;
    let latent = latent_marginals(spec, &fit.latent);
    let fixed_block = spec.block_index(BLOCK_FIXED).expect("fixed block");
    let fixed_effects = latent[spec.block_range(fixed_block)].to_vec();
    let blocks = spec
        .blocks
        .iter()
        .enumerate()
        .map(|(b, block)| BlockLayout {
            name: block.name.clone(),
            offset: spec.offset(b),
            dim: block.dim(),
        })
        .collect();

    let n_weeks = model.n_weeks() as usize;
    let observed_counts = model.observed_counts();
    let selected = fit.latent.factor.selected_inverse();
    let mut cells = Vec::new();
    let mut eta_mean = Vec::new();
    let mut eta_sd = Vec::new();
    let mut observed = Vec::new();
    let mut bands = Vec::new();
    for region in RegionCode::ALL {
        for group in SpeciesGroup::ALL {
            if model.cell_location(region, group).is_err() || model.design.row_for(region, group).is_err() {
                continue;
            }
            let mut obs = Vec::with_capacity(n_weeks);
            for week in 1..=n_weeks as u32 {
                let row = model.predictor_row(region, group, week)?;
                let lp = LinearPredictor::from_row(&row, &fit.latent.mode, &fit.latent.factor, Some(&selected));
                eta_mean.push(lp.mean);
                eta_sd.push(lp.sd);
                let method = seeded(settings.predictive, week_seed(settings.seed, cells.len(), week));
                let b = predictive_band(lp, fit.mode.p, fit.mode.sigma2, settings.level, method)?;
                bands.extend([b.lower, b.expected, b.upper]);
                obs.push(observed_counts.get(&(region, group, week)).copied());
            }
            cells.push(CellKey { region, group });
            observed.push(obs);
        }
    }
    let n_cells = cells.len();
    Ok(FitArtifact {
        format: ARTIFACT_FORMAT.into(),
        version: ARTIFACT_VERSION,
        spec_fingerprint: spec.fingerprint(),
        settings,
        n_observations: spec.n_obs(),
        hyper_summaries: hyper_marginals(&fit.mode, &fit.free, &fit.covariance),
        hyper: HyperEstimate {
            mode: fit.mode,
            free: fit.free_names(),
            covariance: fit.covariance.clone(),
            log_posterior: fit.log_posterior,
            evaluations: fit.evaluations,
            converged: fit.converged,
        },
        fixed_effects,
        blocks,
        latent_labels: latent.iter().map(|s| s.name.clone()).collect(),
        latent_mode: Payload::encode(&fit.latent.mode, vec![spec.dim()]),
        latent_sd: Payload::encode(&latent.iter().map(|s| s.sd).collect::<Vec<_>>(), vec![spec.dim()]),
        mesh: model.mesh.to_json_value(),
        week_months: model.week_months.clone(),
        cells,
        eta_mean: Payload::encode(&eta_mean, vec![n_cells, n_weeks]),
        eta_sd: Payload::encode(&eta_sd, vec![n_cells, n_weeks]),
        bands: Payload::encode(&bands, vec![n_cells, n_weeks, 3]),
        observed,
        data: data.cloned(),
    })
}

/// Artifact with decoded payloads, ready for queries.
#[derive(Debug, Clone)]
pub struct LoadedArtifact {
    pub artifact: FitArtifact,
    pub mesh: Mesh,
    pub latent_mode: Vec<f64>,
    pub latent_sd: Vec<f64>,
    cell_index: BTreeMap<CellKey, usize>,
    eta_mean: Vec<f64>,
    eta_sd: Vec<f64>,
    bands: Vec<f64>,
}

impl FitArtifact {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Artifact(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: FitArtifact = serde_json::from_str(text).map_err(|e| Error::Artifact(format!("malformed artifact: {e}")))?;
        if a.format != ARTIFACT_FORMAT || a.version != ARTIFACT_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported artifact {} v{} (expected {ARTIFACT_FORMAT} v{ARTIFACT_VERSION})",
                a.format, a.version
            )));
        }
        Ok(a)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn n_weeks(&self) -> usize {
        self.week_months.len()
    }

    pub fn load(self) -> Result<LoadedArtifact> {
        let mesh = Mesh::from_parts(
            self.mesh.projection,
            self.mesh.vertices_km.clone(),
            self.mesh.triangles.clone(),
            self.mesh.boundary.clone(),
            self.mesh.input_vertices,
        )?;
        let latent_mode = self.latent_mode.decode()?;
        let latent_sd = self.latent_sd.decode()?;
        let eta_mean = self.eta_mean.decode()?;
        let eta_sd = self.eta_sd.decode()?;
        let bands = self.bands.decode()?;
        let expected = self.cells.len() * self.n_weeks();
        if eta_mean.len() != expected || eta_sd.len() != expected || bands.len() != 3 * expected || self.observed.len() != self.cells.len() {
            return Err(Error::Artifact("cell payloads do not match the cell list".into()));
        }
        if latent_mode.len() != self.latent_labels.len() || latent_sd.len() != self.latent_labels.len() {
            return Err(Error::Artifact("latent payloads do not match the labels".into()));
        }
        let cell_index = self.cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(LoadedArtifact {
            artifact: self,
            mesh,
            latent_mode,
            latent_sd,
            cell_index,
            eta_mean,
            eta_sd,
            bands,
        })
    }
}

impl LoadedArtifact {
    pub fn n_weeks(&self) -> usize {
        self.artifact.n_weeks()
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.artifact.hyper.mode
    }

    /// Position of a cell in the artifact's cell list.
    pub fn cell_position(&self, region: RegionCode, group: SpeciesGroup) -> Result<usize> {
        self.cell(region, group)
    }

    /// Stored chart bands of a cell when `level` is the stored level.
    pub fn stored_bands(&self, region: RegionCode, group: SpeciesGroup, level: f64) -> Result<Option<Vec<Band>>> {
        let c = self.cell(region, group)?;
        if level != self.artifact.settings.level {
            return Ok(None);
        }
        let w = self.n_weeks();
        Ok(Some(
            self.bands[3 * c * w..3 * (c + 1) * w]
                .chunks_exact(3)
                .map(|b| Band {
                    lower: b[0],
                    expected: b[1],
                    upper: b[2],
                })
                .collect(),
        ))
    }

    fn cell(&self, region: RegionCode, group: SpeciesGroup) -> Result<usize> {
        self.cell_index
            .get(&CellKey { region, group })
            .copied()
            .ok_or_else(|| Error::Lookup(format!("no fitted cell for region {region}, group {group}")))
    }

    pub fn has_cell(&self, region: RegionCode, group: SpeciesGroup) -> bool {
        self.cell(region, group).is_ok()
    }

    /// Linear predictor of each week 1..=n_weeks of a cell.
    pub fn linear_predictors(&self, region: RegionCode, group: SpeciesGroup) -> Result<Vec<LinearPredictor>> {
        let c = self.cell(region, group)?;
        let w = self.n_weeks();
        Ok((c * w..(c + 1) * w)
            .map(|k| LinearPredictor {
                mean: self.eta_mean[k],
                sd: self.eta_sd[k],
            })
            .collect())
    }

    pub fn observed(&self, region: RegionCode, group: SpeciesGroup) -> Result<&[Option<f64>]> {
        Ok(&self.artifact.observed[self.cell(region, group)?])
    }

    /// Posterior mean of the spatial field at the mesh vertices for a 1-based month.
    pub fn field_at_vertices(&self, month: u32) -> Result<Vec<f64>> {
        let block = self
            .artifact
            .blocks
            .iter()
            .find(|b| b.name == BLOCK_SPATIAL)
            .ok_or_else(|| Error::Lookup("artifact has no spatial field".into()))?;
        let nv = self.mesh.n_vertices();
        let months = block.dim / nv.max(1);
        if month == 0 || month as usize > months {
            return Err(Error::Lookup(format!("month {month} outside 1..={months}")));
        }
        let start = block.offset + (month as usize - 1) * nv;
        Ok(self.latent_mode[start..start + nv].to_vec())
    }
}
