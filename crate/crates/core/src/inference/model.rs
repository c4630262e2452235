//! The stranding model: fixed effects from the species × region design, an SPDE field
//! grouped by month, an AR(1) week effect and a per-region RW(1) over months.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::hyper::HyperPriors;
use super::spec::{LatentBlock, Likelihood, ModelSpec};
use crate::error::{Error, Result};
use crate::gmrf::{build_mesh, Mesh, MeshParams, SpdeOperator};
use crate::ingest::{DesignMatrix, RegionCode, SpeciesGroup, WeeklyPanel};

/// Prior sd of the fixed effects.
pub const FIXED_EFFECT_SD: f64 = 10.0;

pub const BLOCK_FIXED: &str = "fixed";
pub const BLOCK_SPATIAL: &str = "spatial";
pub const BLOCK_WEEK: &str = "week";
pub const BLOCK_REGION_MONTH: &str = "region_month";

/// One modelled count: a (region, group, week) cell at a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellObservation {
    pub region: RegionCode,
    pub group: SpeciesGroup,
    pub week: u32,
    pub month: u32,
    pub longitude: f64,
    pub latitude: f64,
    pub count: f64,
}

/// Model specification plus the bookkeeping needed to build predictor rows for any cell.
#[derive(Debug, Clone)]
pub struct SurveillanceModel {
    pub spec: ModelSpec,
    pub design: DesignMatrix,
    pub mesh: Arc<Mesh>,
    pub observations: Vec<CellObservation>,
    /// Month index (1-based) of each week 1..=n_weeks.
    pub week_months: Vec<u32>,
    pub n_months: u32,
}

impl SurveillanceModel {
    /// One observation per nonempty panel cell, located at the cell's mean coordinates.
    pub fn from_panel(panel: &WeeklyPanel, mesh_params: &MeshParams) -> Result<Self> {
        let obs: Vec<_> = panel
            .entries
            .iter()
            .map(|e| CellObservation {
                region: e.region,
                group: e.group,
                week: e.week,
                month: e.month,
                longitude: e.mean_longitude,
                latitude: e.mean_latitude,
                count: e.count as f64,
            })
            .collect();
        Self::from_observations(obs, panel.week_months.clone(), mesh_params)
    }

    pub fn from_observations(obs: Vec<CellObservation>, week_months: Vec<u32>, mesh_params: &MeshParams) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::Spec("cannot fit a model to zero observations".into()));
        }
        let locations: Vec<_> = obs.iter().map(|o| (o.longitude, o.latitude)).collect();
        let mesh = build_mesh(&locations, mesh_params)?;
        Self::with_mesh(obs, week_months, Arc::new(mesh))
    }

    pub fn with_mesh(obs: Vec<CellObservation>, week_months: Vec<u32>, mesh: Arc<Mesh>) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::Spec("cannot fit a model to zero observations".into()));
        }
        let n_weeks = week_months.len() as u32;
        let n_months = week_months.iter().copied().max().unwrap_or(0);
        for o in &obs {
            if o.week == 0 || o.week > n_weeks {
                return Err(Error::Spec(format!("week {} outside 1..={n_weeks}", o.week)));
            }
            if o.month != week_months[o.week as usize - 1] {
                return Err(Error::Spec(format!("week {} is not in month {}", o.week, o.month)));
            }
        }
        let cells: Vec<_> = obs.iter().map(|o| (o.region, o.group)).collect();
        let design = DesignMatrix::from_cells(&cells)?;
        let operator = Arc::new(SpdeOperator::new(&mesh)?);
        let mut blocks = vec![
            LatentBlock::fixed(&design.column_names, 1.0 / (FIXED_EFFECT_SD * FIXED_EFFECT_SD)),
            LatentBlock::spatial(BLOCK_SPATIAL, operator, n_months as usize),
            LatentBlock::ar1(BLOCK_WEEK, n_weeks as usize),
        ];
        if n_months >= 2 {
            let labels = RegionCode::ALL
                .iter()
                .flat_map(|r| (1..=n_months).map(move |m| format!("{BLOCK_REGION_MONTH}[Region_{r}][{m}]")))
                .collect();
            blocks.push(LatentBlock::rw1(BLOCK_REGION_MONTH, n_months as usize, labels));
        }
        let diameter = data_diameter(&mesh, &obs);
        let priors = HyperPriors::new((diameter / 5.0).max(1.0));
        let y = obs.iter().map(|o| o.count).collect();
        let mut model = SurveillanceModel {
            spec: ModelSpec::new(Likelihood::Tweedie, blocks, Vec::new(), Vec::new(), priors)?,
            design,
            mesh,
            observations: Vec::new(),
            week_months,
            n_months,
        };
        let rows = obs
            .iter()
            .map(|o| model.row_at(o.region, o.group, o.week, (o.longitude, o.latitude)))
            .collect::<Result<Vec<_>>>()?;
        model.spec = ModelSpec::new(Likelihood::Tweedie, model.spec.blocks.clone(), rows, y, priors)?;
        model.observations = obs;
        Ok(model)
    }

    /// Same cells and mesh with new counts, one per observation.
    pub fn with_counts(&self, counts: &[f64]) -> Result<Self> {
        if counts.len() != self.observations.len() {
            return Err(Error::Spec(format!("{} counts for {} observations", counts.len(), self.observations.len())));
        }
        let mut next = self.clone();
        next.spec = self.spec.with_response(counts.to_vec())?;
        for (o, &c) in next.observations.iter_mut().zip(counts) {
            o.count = c;
        }
        Ok(next)
    }

    pub fn n_weeks(&self) -> u32 {
        self.week_months.len() as u32
    }

    fn block_offset(&self, name: &str) -> Option<usize> {
        self.spec.block_index(name).map(|b| self.spec.offset(b))
    }

    /// Predictor row of a cell at an explicit location.
    pub fn row_at(&self, region: RegionCode, group: SpeciesGroup, week: u32, lonlat: (f64, f64)) -> Result<Vec<(usize, f64)>> {
        if week == 0 || week > self.n_weeks() {
            return Err(Error::Lookup(format!("week {week} outside 1..={}", self.n_weeks())));
        }
        let month = self.week_months[week as usize - 1] as usize;
        let fixed = self.block_offset(BLOCK_FIXED).expect("fixed block");
        let mut row: Vec<(usize, f64)> = self
            .design
            .row_for(region, group)?
            .into_iter()
            .map(|c| (fixed + c, 1.0))
            .collect();
        let (tri, w) = self
            .mesh
            .locate_lonlat(lonlat.0, lonlat.1)
            .ok_or_else(|| Error::Mesh(format!("location ({}, {}) is outside the mesh", lonlat.0, lonlat.1)))?;
        let spatial = self.block_offset(BLOCK_SPATIAL).expect("spatial block") + (month - 1) * self.mesh.n_vertices();
        for (k, &v) in self.mesh.triangles[tri].iter().enumerate() {
            if w[k] != 0.0 {
                row.push((spatial + v, w[k]));
            }
        }
        row.push((self.block_offset(BLOCK_WEEK).expect("week block") + week as usize - 1, 1.0));
        if let Some(off) = self.block_offset(BLOCK_REGION_MONTH) {
            row.push((off + region.ordinal() * self.n_months as usize + month - 1, 1.0));
        }
        Ok(row)
    }

    /// Representative location of a (region, group) cell: the mean location of its
    /// observations, or of the region's observations when the group was never seen there.
    pub fn cell_location(&self, region: RegionCode, group: SpeciesGroup) -> Result<(f64, f64)> {
        let mean = |f: &dyn Fn(&CellObservation) -> bool| {
            let sel: Vec<_> = self.observations.iter().filter(|o| f(o)).collect();
            (!sel.is_empty()).then(|| {
                let n = sel.len() as f64;
                (
                    sel.iter().map(|o| o.longitude).sum::<f64>() / n,
                    sel.iter().map(|o| o.latitude).sum::<f64>() / n,
                )
            })
        };
        mean(&|o| o.region == region && o.group == group)
            .or_else(|| mean(&|o| o.region == region))
            .ok_or_else(|| Error::Lookup(format!("region {region} has no observations")))
    }

    /// Predictor row of a (region, group, week) cell at its representative location.
    pub fn predictor_row(&self, region: RegionCode, group: SpeciesGroup, week: u32) -> Result<Vec<(usize, f64)>> {
        let loc = self.cell_location(region, group)?;
        self.row_at(region, group, week, loc)
    }

    /// Observed total per (region, group, week) cell.
    pub fn observed_counts(&self) -> BTreeMap<(RegionCode, SpeciesGroup, u32), f64> {
        let mut m = BTreeMap::new();
        for o in &self.observations {
            *m.entry((o.region, o.group, o.week)).or_insert(0.0) += o.count;
        }
        m
    }
}

fn data_diameter(mesh: &Mesh, obs: &[CellObservation]) -> f64 {
    let pts: Vec<[f64; 2]> = obs
        .iter()
        .map(|o| mesh.projection.forward(o.longitude, o.latitude))
        .collect();
    let hull = crate::gmrf::convex_hull(&pts);
    let mut d: f64 = 0.0;
    for a in &hull {
        for b in &hull {
            d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
    }
    d
}
