//! Descriptive tables: region ranking, per-group distribution, species ranking and
//! cumulative series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::panel::WeeklyPanel;
use super::record::{AgeClass, Gender, RegionCode, SpeciesGroup, SurveillanceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummaryRow {
    pub region: RegionCode,
    pub name: String,
    pub total: u64,
    /// Animals per field visit (source row).
    pub weekly_mean: f64,
    /// Largest single visit.
    pub max: u32,
    /// Number of field visits.
    pub visits: usize,
}

/// Region totals and per-visit means, sorted by descending total.
pub fn region_summary(panel: &WeeklyPanel) -> Vec<RegionSummaryRow> {
    let mut acc: BTreeMap<RegionCode, (u64, usize, u32)> = BTreeMap::new();
    for e in &panel.entries {
        let slot = acc.entry(e.region).or_default();
        slot.0 += e.count;
        slot.1 += e.visits.len();
        slot.2 = slot.2.max(e.visits.iter().map(|v| v.count).max().unwrap_or(0));
    }
    let mut rows: Vec<_> = acc
        .into_iter()
        .map(|(region, (total, visits, max))| RegionSummaryRow {
            region,
            name: region.name().to_owned(),
            total,
            weekly_mean: if visits == 0 { 0.0 } else { total as f64 / visits as f64 },
            max,
            visits,
        })
        .collect();
    rows.sort_by(|a, b| b.total.cmp(&a.total).then(a.region.cmp(&b.region)));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummaryRow {
    pub group: SpeciesGroup,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
    pub total: u64,
    pub visits: usize,
}

/// Sample quantile with linear interpolation between order statistics (R's type 7).
/// `sorted` must be ascending and nonempty.
pub fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-number summary, mean and total of the per-visit counts of each group present, sorted by
/// descending total.
pub fn group_summary(panel: &WeeklyPanel) -> Vec<GroupSummaryRow> {
    let mut values: BTreeMap<SpeciesGroup, Vec<f64>> = BTreeMap::new();
    for e in &panel.entries {
        values
            .entry(e.group)
            .or_default()
            .extend(e.visits.iter().map(|v| f64::from(v.count)));
    }
    let mut rows: Vec<_> = values
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(group, mut v)| {
            v.sort_by(f64::total_cmp);
            let total: f64 = v.iter().sum();
            GroupSummaryRow {
                group,
                min: v[0],
                q1: quantile_type7(&v, 0.25),
                median: quantile_type7(&v, 0.5),
                mean: total / v.len() as f64,
                q3: quantile_type7(&v, 0.75),
                max: v[v.len() - 1],
                total: total as u64,
                visits: v.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.total.cmp(&a.total).then(a.group.cmp(&b.group)));
    rows
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeciesTotal {
    pub species_name: String,
    pub total: u64,
}

/// Label used for records without a species name.
pub const UNDEFINED_SPECIES: &str = "Undefined";

pub fn species_ranking(records: &[SurveillanceRecord]) -> Vec<SpeciesTotal> {
    let mut acc: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records {
        let name = if r.species_name.trim().is_empty() {
            UNDEFINED_SPECIES
        } else {
            r.species_name.trim()
        };
        *acc.entry(name).or_default() += u64::from(r.count);
    }
    let mut rows: Vec<_> = acc
        .into_iter()
        .map(|(name, total)| SpeciesTotal {
            species_name: name.to_owned(),
            total,
        })
        .collect();
    rows.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.species_name.cmp(&b.species_name)));
    rows
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesFilter {
    pub region: Option<RegionCode>,
    pub group: Option<SpeciesGroup>,
    pub age: Option<AgeClass>,
    pub gender: Option<Gender>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeSeries {
    pub filter: SeriesFilter,
    pub weeks: Vec<u32>,
    pub weekly: Vec<u64>,
    pub cumulative: Vec<u64>,
    /// Cumulative count at the end of each month.
    pub monthly_cumulative: Vec<u64>,
    /// `monthly_cumulative[m + 1] / monthly_cumulative[m]` for months with a nonzero base.
    pub month_ratios: Vec<f64>,
    /// Harmonic mean of `month_ratios`.
    pub harmonic_mean_ratio: Option<f64>,
    /// Geometric mean of `month_ratios`.
    pub geometric_mean_ratio: Option<f64>,
}

impl CumulativeSeries {
    pub fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }
}

pub fn cumulative_series(panel: &WeeklyPanel, filter: &SeriesFilter) -> CumulativeSeries {
    let n_weeks = panel.n_weeks as usize;
    let mut weekly = vec![0u64; n_weeks];
    for e in &panel.entries {
        if filter.region.is_some_and(|r| r != e.region) || filter.group.is_some_and(|g| g != e.group) {
            continue;
        }
        weekly[e.week as usize - 1] += e.filtered_count(filter.age, filter.gender);
    }
    let cumulative: Vec<u64> = weekly
        .iter()
        .scan(0u64, |s, &w| {
            *s += w;
            Some(*s)
        })
        .collect();

    let mut monthly_cumulative = vec![0u64; panel.n_months as usize];
    for (i, &c) in cumulative.iter().enumerate() {
        let m = panel.month_of_week(i as u32 + 1) as usize;
        if m > 0 {
            monthly_cumulative[m - 1] = c;
        }
    }
    let month_ratios: Vec<f64> = monthly_cumulative
        .windows(2)
        .filter(|w| w[0] > 0)
        .map(|w| w[1] as f64 / w[0] as f64)
        .collect();
    let (harmonic_mean_ratio, geometric_mean_ratio) = if month_ratios.is_empty() {
        (None, None)
    } else {
        let n = month_ratios.len() as f64;
        (
            Some(n / month_ratios.iter().map(|r| 1.0 / r).sum::<f64>()),
            Some((month_ratios.iter().map(|r| r.ln()).sum::<f64>() / n).exp()),
        )
    };

    CumulativeSeries {
        filter: *filter,
        weeks: (1..=panel.n_weeks).collect(),
        weekly,
        cumulative,
        monthly_cumulative,
        month_ratios,
        harmonic_mean_ratio,
        geometric_mean_ratio,
    }
}

/// Everything the descriptive tables are computed from: the weekly panel plus species totals,
/// which the panel does not keep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub panel: WeeklyPanel,
    pub species: Vec<SpeciesTotal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryBy {
    Region,
    Group,
    Species,
}

impl std::str::FromStr for SummaryBy {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "region" => Ok(SummaryBy::Region),
            "group" => Ok(SummaryBy::Group),
            "species" => Ok(SummaryBy::Species),
            other => Err(crate::error::Error::Coding(format!("unknown summary table `{other}` (region, group or species)"))),
        }
    }
}

impl DatasetSummary {
    pub fn from_records(records: &[SurveillanceRecord]) -> crate::error::Result<Self> {
        Ok(DatasetSummary {
            panel: super::panel::aggregate_weekly(records)?,
            species: species_ranking(records),
        })
    }

    pub fn regions(&self) -> Vec<RegionSummaryRow> {
        region_summary(&self.panel)
    }

    pub fn groups(&self) -> Vec<GroupSummaryRow> {
        group_summary(&self.panel)
    }

    pub fn series(&self, filter: &SeriesFilter) -> CumulativeSeries {
        cumulative_series(&self.panel, filter)
    }

    /// One table as JSON rows.
    pub fn table_json(&self, by: SummaryBy) -> serde_json::Value {
        match by {
            SummaryBy::Region => serde_json::to_value(self.regions()),
            SummaryBy::Group => serde_json::to_value(self.groups()),
            SummaryBy::Species => serde_json::to_value(&self.species),
        }
        .expect("summary rows serialize")
    }

    /// One table as CSV with a header row.
    pub fn table_csv(&self, by: SummaryBy) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let result = match by {
            SummaryBy::Region => self.regions().iter().try_for_each(|r| w.serialize(r)),
            SummaryBy::Group => self.groups().iter().try_for_each(|r| w.serialize(r)),
            SummaryBy::Species => self.species.iter().try_for_each(|r| w.serialize(r)),
        };
        result.expect("summary rows serialize");
        let mut text = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv");
        if text.is_empty() {
            text = match by {
                SummaryBy::Region => "region,name,total,weekly_mean,max,visits\n",
                SummaryBy::Group => "group,min,q1,median,mean,q3,max,total,visits\n",
                SummaryBy::Species => "species_name,total\n",
            }
            .into();
        }
        text
    }
}
