//! Weekly aggregation of stranding records into the (region, group, week) panel.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::record::{AgeClass, Gender, RegionCode, SpeciesGroup, SurveillanceRecord};
use crate::error::{Error, Result};

/// Weeks in one semester panel.
pub const PANEL_WEEKS: u32 = 26;
pub const PANEL_REGIONS: usize = 15;
pub const PANEL_GROUPS: usize = 6;

/// One source row folded into a panel cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub count: u32,
    pub age: AgeClass,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelEntry {
    pub region: RegionCode,
    pub group: SpeciesGroup,
    /// 1-based week index within the panel.
    pub week: u32,
    /// 1-based month index derived from the week (see [`WeeklyPanel::month_of_week`]).
    pub month: u32,
    pub count: u64,
    /// Count-weighted mean coordinates of the aggregated records.
    pub mean_latitude: f64,
    pub mean_longitude: f64,
    /// Aggregated rows in input order.
    pub visits: Vec<Visit>,
}

impl PanelEntry {
    pub fn visit_count(&self) -> usize {
        self.visits.len()
    }

    /// Animals matching the optional age and gender filters.
    pub fn filtered_count(&self, age: Option<AgeClass>, gender: Option<Gender>) -> u64 {
        self.visits
            .iter()
            .filter(|v| age.is_none_or(|a| v.age == a) && gender.is_none_or(|g| v.gender == g))
            .map(|v| u64::from(v.count))
            .sum()
    }
}

/// Weekly counts indexed by (region, species group, week).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyPanel {
    /// Sorted by (region, group, week); one entry per nonempty cell.
    pub entries: Vec<PanelEntry>,
    /// Monday of panel week 1; `None` for an empty panel.
    pub origin: Option<NaiveDate>,
    pub n_weeks: u32,
    /// Month index of each week 1..=n_weeks.
    pub week_months: Vec<u32>,
    pub n_months: u32,
}

impl WeeklyPanel {
    pub fn empty() -> Self {
        WeeklyPanel {
            entries: Vec::new(),
            origin: None,
            n_weeks: PANEL_WEEKS,
            week_months: Vec::new(),
            n_months: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Month index of a 1-based week; 0 when the panel is empty or the week is out of range.
    pub fn month_of_week(&self, week: u32) -> u32 {
        week.checked_sub(1)
            .and_then(|i| self.week_months.get(i as usize))
            .copied()
            .unwrap_or(0)
    }

    /// Thursday of a panel week.
    pub fn week_thursday(&self, week: u32) -> Option<NaiveDate> {
        self.origin
            .map(|o| o + Duration::days(7 * (i64::from(week) - 1) + 3))
    }

    pub fn regions(&self) -> Vec<RegionCode> {
        let mut v: Vec<_> = self.entries.iter().map(|e| e.region).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Expand back to one record per visit, placed on the Thursday of its week at the cell's
    /// mean coordinates.
    pub fn to_records(&self) -> Vec<SurveillanceRecord> {
        let mut out = Vec::new();
        for e in &self.entries {
            let date = self.week_thursday(e.week).expect("nonempty panel has an origin");
            for v in &e.visits {
                let mut r = SurveillanceRecord::new(
                    e.region,
                    e.mean_latitude,
                    e.mean_longitude,
                    date,
                    e.group,
                    v.count,
                );
                r.age = v.age;
                r.gender = v.gender;
                out.push(r);
            }
        }
        out
    }
}

fn iso_monday(date: NaiveDate) -> NaiveDate {
    date - Duration::days(i64::from(date.weekday().num_days_from_monday()))
}

fn month_number(date: NaiveDate) -> i64 {
    i64::from(date.year()) * 12 + i64::from(date.month0())
}

/// Week→month map: a week belongs to the month of its Thursday; months are renumbered from the
/// month of week 1.
pub fn week_month_map(origin: NaiveDate, n_weeks: u32) -> Vec<u32> {
    let first = month_number(origin + Duration::days(3));
    (0..n_weeks)
        .map(|w| {
            let thursday = origin + Duration::days(7 * i64::from(w) + 3);
            (month_number(thursday) - first + 1) as u32
        })
        .collect()
}

#[derive(Default)]
struct CellAcc {
    count: u64,
    lat_sum: f64,
    lon_sum: f64,
    visits: Vec<Visit>,
}

/// Aggregate records into ISO weeks, renumbered 1..=26 from the first week with data.
pub fn aggregate_weekly(records: &[SurveillanceRecord]) -> Result<WeeklyPanel> {
    let Some(first) = records.iter().map(|r| r.sample_time).min() else {
        return Ok(WeeklyPanel::empty());
    };
    let origin = iso_monday(first);
    let last = records.iter().map(|r| r.sample_time).max().expect("nonempty");
    let span = (iso_monday(last) - origin).num_days() / 7 + 1;
    if span > i64::from(PANEL_WEEKS) {
        return Err(Error::Range(format!(
            "records span {span} ISO weeks ({first} .. {last}); a panel holds at most {PANEL_WEEKS}"
        )));
    }

    let week_months = week_month_map(origin, PANEL_WEEKS);
    let mut cells: BTreeMap<(RegionCode, SpeciesGroup, u32), CellAcc> = BTreeMap::new();
    for r in records {
        let week = ((iso_monday(r.sample_time) - origin).num_days() / 7 + 1) as u32;
        let acc = cells.entry((r.region, r.species_group, week)).or_default();
        let c = f64::from(r.count);
        acc.count += u64::from(r.count);
        acc.lat_sum += c * r.latitude;
        acc.lon_sum += c * r.longitude;
        acc.visits.push(Visit {
            count: r.count,
            age: r.age,
            gender: r.gender,
        });
    }

    let entries = cells
        .into_iter()
        .map(|((region, group, week), acc)| PanelEntry {
            region,
            group,
            week,
            month: week_months[week as usize - 1],
            count: acc.count,
            mean_latitude: acc.lat_sum / acc.count as f64,
            mean_longitude: acc.lon_sum / acc.count as f64,
            visits: acc.visits,
        })
        .collect();

    Ok(WeeklyPanel {
        entries,
        origin: Some(origin),
        n_weeks: PANEL_WEEKS,
        n_months: week_months.iter().copied().max().unwrap_or(0),
        week_months,
    })
}
