//! Dummy-coded fixed-effect design: intercept, species group, region and their interaction,
//! with BI in region 1 as the baseline.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::panel::WeeklyPanel;
use super::record::{RegionCode, SpeciesGroup};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DesignColumn {
    Intercept,
    Species(SpeciesGroup),
    Region(RegionCode),
    Interaction(SpeciesGroup, RegionCode),
}

impl DesignColumn {
    pub fn name(&self) -> String {
        match self {
            DesignColumn::Intercept => "Intercept".to_owned(),
            DesignColumn::Species(g) => format!("Species_{g}"),
            DesignColumn::Region(r) => format!("Region_{r}"),
            DesignColumn::Interaction(g, r) => format!("{g}:Region_{r}"),
        }
    }

    /// Full column list before dropping empty interactions: 1 + 5 + 14 + 5·14 = 90.
    pub fn full_set() -> Vec<DesignColumn> {
        let groups: Vec<_> = SpeciesGroup::ALL
            .into_iter()
            .filter(|&g| g != SpeciesGroup::BASELINE)
            .collect();
        let regions: Vec<_> = RegionCode::ALL
            .into_iter()
            .filter(|&r| r != RegionCode::BASELINE)
            .collect();
        let mut cols = vec![DesignColumn::Intercept];
        cols.extend(groups.iter().map(|&g| DesignColumn::Species(g)));
        cols.extend(regions.iter().map(|&r| DesignColumn::Region(r)));
        for &r in &regions {
            for &g in &groups {
                cols.push(DesignColumn::Interaction(g, r));
            }
        }
        cols
    }
}

/// Active columns of a (species, region) cell in the full column set, baseline levels omitted.
fn active_columns(group: SpeciesGroup, region: RegionCode) -> Vec<DesignColumn> {
    let mut cols = vec![DesignColumn::Intercept];
    if group != SpeciesGroup::BASELINE {
        cols.push(DesignColumn::Species(group));
    }
    if region != RegionCode::BASELINE {
        cols.push(DesignColumn::Region(region));
    }
    if group != SpeciesGroup::BASELINE && region != RegionCode::BASELINE {
        cols.push(DesignColumn::Interaction(group, region));
    }
    cols
}

/// Binary design matrix stored as the active column indices of each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub columns: Vec<DesignColumn>,
    pub column_names: Vec<String>,
    /// Active (value 1) column indices per row, ascending.
    pub rows: Vec<Vec<usize>>,
    /// Interaction columns removed because no row activates them.
    pub dropped: Vec<DesignColumn>,
}

impl DesignMatrix {
    /// Build the design for a list of (region, group) observation cells.
    pub fn from_cells(cells: &[(RegionCode, SpeciesGroup)]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Spec("cannot build a design for zero observations".into()));
        }
        let observed: BTreeSet<DesignColumn> = cells
            .iter()
            .flat_map(|&(r, g)| active_columns(g, r))
            .collect();
        let mut columns = Vec::new();
        let mut dropped = Vec::new();
        for col in DesignColumn::full_set() {
            match col {
                DesignColumn::Interaction(..) if !observed.contains(&col) => dropped.push(col),
                _ => columns.push(col),
            }
        }
        if !dropped.is_empty() {
            log::warn!(
                "dropping {} species x region interaction columns with no observations",
                dropped.len()
            );
        }
        let mut design = DesignMatrix {
            column_names: columns.iter().map(DesignColumn::name).collect(),
            columns,
            rows: Vec::with_capacity(cells.len()),
            dropped,
        };
        for &(r, g) in cells {
            let row = design.row_for(r, g)?;
            design.rows.push(row);
        }
        Ok(design)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, col: &DesignColumn) -> Option<usize> {
        self.columns.iter().position(|c| c == col)
    }

    /// Active columns for a (region, group) cell. Dropped interactions contribute nothing;
    /// main effects are always present.
    pub fn row_for(&self, region: RegionCode, group: SpeciesGroup) -> Result<Vec<usize>> {
        let mut idx = Vec::with_capacity(4);
        for col in active_columns(group, region) {
            match self.column_index(&col) {
                Some(i) => idx.push(i),
                None if matches!(col, DesignColumn::Interaction(..)) => {}
                None => {
                    return Err(Error::Coding(format!(
                        "column {} missing from design",
                        col.name()
                    )))
                }
            }
        }
        idx.sort_unstable();
        Ok(idx)
    }

    /// Recover (group, region) from a row's active columns.
    pub fn decode_row(&self, row: usize) -> Result<(SpeciesGroup, RegionCode)> {
        let active = self
            .rows
            .get(row)
            .ok_or_else(|| Error::Lookup(format!("design row {row} out of range")))?;
        let mut group = SpeciesGroup::BASELINE;
        let mut region = RegionCode::BASELINE;
        for &c in active {
            match self.columns[c] {
                DesignColumn::Species(g) => group = g,
                DesignColumn::Region(r) => region = r,
                _ => {}
            }
        }
        Ok((group, region))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows(), self.n_cols());
        for (i, row) in self.rows.iter().enumerate() {
            for &c in row {
                m[(i, c)] = 1.0;
            }
        }
        m
    }
}

/// Design with one row per panel entry, in panel order.
pub fn build_design(panel: &WeeklyPanel) -> Result<DesignMatrix> {
    let cells: Vec<_> = panel.entries.iter().map(|e| (e.region, e.group)).collect();
    DesignMatrix::from_cells(&cells)
}
