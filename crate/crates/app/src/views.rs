//! JSON documents served by the HTTP service and printed by the CLI. Both paths call these
//! functions and serialize with [`to_json`], so they agree byte for byte.

use carcasswatch_core::gmrf::MeshJson;
use carcasswatch_core::inference::{LoadedArtifact, BLOCK_SPATIAL};
use carcasswatch_core::ingest::{
    AgeClass, CumulativeSeries, DatasetSummary, Gender, RegionCode, SeriesFilter, SpeciesGroup, SummaryBy,
};
use carcasswatch_core::monitor::{alert_report, all_charts, build_chart, AlertReport, ControlChart};
use carcasswatch_core::{Error, Result};
use serde::Serialize;

/// Canonical serialization shared by every output path.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("view serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactInfo {
    pub format: String,
    pub version: u32,
    pub spec_fingerprint: String,
    pub n_observations: usize,
    pub cells: usize,
    pub weeks: usize,
    pub level: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub artifact: ArtifactInfo,
}

pub fn health(a: &LoadedArtifact) -> Health {
    let art = &a.artifact;
    Health {
        status: "ok",
        artifact: ArtifactInfo {
            format: art.format.clone(),
            version: art.version,
            spec_fingerprint: art.spec_fingerprint.clone(),
            n_observations: art.n_observations,
            cells: art.cells.len(),
            weeks: art.n_weeks(),
            level: art.settings.level,
            converged: art.hyper.converged,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionEntry {
    pub code: RegionCode,
    pub name: &'static str,
    /// Groups with a fitted control chart in this region.
    pub groups: Vec<SpeciesGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupEntry {
    pub code: SpeciesGroup,
    pub label: &'static str,
}

/// Vocabularies of every filter the service accepts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vocabulary {
    pub regions: Vec<RegionEntry>,
    pub groups: Vec<GroupEntry>,
    pub ages: Vec<AgeClass>,
    pub genders: Vec<Gender>,
    pub weeks: usize,
    pub months: Vec<u32>,
    pub level: f64,
}

pub fn regions(a: &LoadedArtifact) -> Vocabulary {
    let mut months: Vec<u32> = a.artifact.week_months.clone();
    months.sort_unstable();
    months.dedup();
    Vocabulary {
        regions: RegionCode::ALL
            .iter()
            .map(|&code| RegionEntry {
                code,
                name: code.name(),
                groups: SpeciesGroup::ALL.into_iter().filter(|&g| a.has_cell(code, g)).collect(),
            })
            .collect(),
        groups: SpeciesGroup::ALL
            .iter()
            .map(|&code| GroupEntry {
                code,
                label: code.label(),
            })
            .collect(),
        ages: AgeClass::ALL.to_vec(),
        genders: Gender::ALL.to_vec(),
        weeks: a.n_weeks(),
        months,
        level: a.artifact.settings.level,
    }
}

fn dataset(a: &LoadedArtifact) -> Result<&DatasetSummary> {
    a.artifact
        .data
        .as_ref()
        .ok_or_else(|| Error::Lookup("the artifact carries no descriptive data".into()))
}

pub fn summary(a: &LoadedArtifact, by: SummaryBy) -> Result<serde_json::Value> {
    Ok(dataset(a)?.table_json(by))
}

pub fn series(a: &LoadedArtifact, filter: &SeriesFilter) -> Result<CumulativeSeries> {
    Ok(dataset(a)?.series(filter))
}

/// Chart at `level`, or at the artifact's stored level.
pub fn chart(a: &LoadedArtifact, region: RegionCode, group: SpeciesGroup, level: Option<f64>) -> Result<ControlChart> {
    build_chart(a, region, group, level.unwrap_or(a.artifact.settings.level))
}

pub fn alerts(a: &LoadedArtifact, level: Option<f64>) -> Result<AlertReport> {
    Ok(alert_report(&all_charts(a, level.unwrap_or(a.artifact.settings.level))?))
}

/// Posterior spatial field of one month on a regular lon/lat grid. Row `j` holds latitude
/// `lat_min + j * step_deg`; cells outside the mesh are `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRaster {
    pub month: u32,
    pub step_deg: f64,
    pub lon_min: f64,
    pub lat_min: f64,
    pub nx: usize,
    pub ny: usize,
    pub mean: Vec<Option<f64>>,
    pub sd: Vec<Option<f64>>,
}

pub fn field(a: &LoadedArtifact, month: u32, step_deg: f64) -> Result<FieldRaster> {
    if !(step_deg > 0.0 && step_deg.is_finite()) {
        return Err(Error::Domain(format!("raster step must be positive, got {step_deg}")));
    }
    let mean = a.field_at_vertices(month)?;
    let nv = a.mesh.n_vertices();
    let block = a
        .artifact
        .blocks
        .iter()
        .find(|b| b.name == BLOCK_SPATIAL)
        .expect("field_at_vertices found the spatial block");
    let start = block.offset + (month as usize - 1) * nv;
    let sd = &a.latent_sd[start..start + nv];

    let hull: Vec<(f64, f64)> = a.mesh.boundary.iter().map(|&v| a.mesh.vertex_lonlat(v)).collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| hull.iter().map(pick).fold(init, f);
    let snap_down = |v: f64| (v / step_deg).floor() * step_deg;
    let lon_min = snap_down(fold(f64::min, f64::INFINITY, |p| p.0));
    let lat_min = snap_down(fold(f64::min, f64::INFINITY, |p| p.1));
    let lon_max = fold(f64::max, f64::NEG_INFINITY, |p| p.0);
    let lat_max = fold(f64::max, f64::NEG_INFINITY, |p| p.1);
    let nx = ((lon_max - lon_min) / step_deg).floor() as usize + 1;
    let ny = ((lat_max - lat_min) / step_deg).floor() as usize + 1;

    let mut mean_grid = Vec::with_capacity(nx * ny);
    let mut sd_grid = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let lat = lat_min + j as f64 * step_deg;
        for i in 0..nx {
            let lon = lon_min + i as f64 * step_deg;
            let p = a.mesh.projection.forward(lon, lat);
            mean_grid.push(a.mesh.interpolate(&mean, p));
            sd_grid.push(a.mesh.interpolate(sd, p));
        }
    }
    Ok(FieldRaster {
        month,
        step_deg,
        lon_min,
        lat_min,
        nx,
        ny,
        mean: mean_grid,
        sd: sd_grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshView<'a> {
    pub mesh: &'a MeshJson,
    /// Outer boundary as (lon, lat), counter-clockwise.
    pub hull: Vec<[f64; 2]>,
}

pub fn mesh(a: &LoadedArtifact) -> MeshView<'_> {
    MeshView {
        mesh: &a.artifact.mesh,
        hull: a
            .mesh
            .boundary
            .iter()
            .map(|&v| {
                let (lon, lat) = a.mesh.vertex_lonlat(v);
                [lon, lat]
            })
            .collect(),
    }
}
