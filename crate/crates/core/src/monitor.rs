//! Statistical process control charts from the fitted model: weekly predictive bands per
//! (region, species group) cell, out-of-control flags and alert reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{LinearPredictor, LoadedArtifact, PredictiveMethod, PredictiveMixture};
use crate::ingest::{RegionCode, SpeciesGroup};

pub const DEFAULT_LEVEL: f64 = 0.80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeekFlag {
    InControl,
    AboveBand,
    BelowBand,
    /// No field visit that week.
    Gap,
}

impl WeekFlag {
    pub fn classify(observed: Option<f64>, lower: f64, upper: f64) -> Self {
        match observed {
            None => WeekFlag::Gap,
            Some(o) if o > upper => WeekFlag::AboveBand,
            Some(o) if o < lower => WeekFlag::BelowBand,
            Some(_) => WeekFlag::InControl,
        }
    }
}

/// Lower, median and upper predictive quantiles of one week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub expected: f64,
    pub upper: f64,
}

pub fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("band level must lie in (0, 1), got {level}")))
    }
}

/// Monte Carlo seed of one chart week, so that every week draws its own stream.
pub fn week_seed(seed: u64, cell: usize, week: u32) -> u64 {
    seed ^ (cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ u64::from(week).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Central predictive band at `level` and the median.
pub fn predictive_band(eta: LinearPredictor, p: f64, sigma2: f64, level: f64, method: PredictiveMethod) -> Result<Band> {
    check_level(level)?;
    let q = PredictiveMixture::new(eta, p, sigma2, method)?.quantiles(&[(1.0 - level) / 2.0, 0.5, (1.0 + level) / 2.0])?;
    Ok(Band {
        lower: q[0],
        expected: q[1],
        upper: q[2],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlChart {
    pub region: RegionCode,
    #[serde(rename = "species")]
    pub group: SpeciesGroup,
    pub level: f64,
    pub weeks: Vec<u32>,
    pub expected: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `None` for weeks without field visits.
    pub observed: Vec<Option<f64>>,
    pub flags: Vec<WeekFlag>,
}

impl ControlChart {
    pub fn from_bands(region: RegionCode, group: SpeciesGroup, level: f64, bands: &[Band], observed: Vec<Option<f64>>) -> Result<Self> {
        check_level(level)?;
        if bands.len() != observed.len() {
            return Err(Error::domain(format!("{} bands for {} observed weeks", bands.len(), observed.len())));
        }
        let flags = bands
            .iter()
            .zip(&observed)
            .map(|(b, &o)| WeekFlag::classify(o, b.lower, b.upper))
            .collect();
        Ok(ControlChart {
            region,
            group,
            level,
            weeks: (1..=bands.len() as u32).collect(),
            expected: bands.iter().map(|b| b.expected).collect(),
            lower: bands.iter().map(|b| b.lower).collect(),
            upper: bands.iter().map(|b| b.upper).collect(),
            observed,
            flags,
        })
    }

    pub fn count(&self, flag: WeekFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }
}

/// Weekly chart of a fitted cell. Bands at the artifact's stored level are read back; other
/// levels are computed from the stored linear predictors.
pub fn build_chart(artifact: &LoadedArtifact, region: RegionCode, group: SpeciesGroup, level: f64) -> Result<ControlChart> {
    check_level(level)?;
    let observed = artifact.observed(region, group)?.to_vec();
    let bands = match artifact.stored_bands(region, group, level)? {
        Some(b) => b,
        None => compute_bands(artifact, region, group, level)?,
    };
    ControlChart::from_bands(region, group, level, &bands, observed)
}

/// Bands of every week of a cell, computed from the linear predictors.
pub fn compute_bands(artifact: &LoadedArtifact, region: RegionCode, group: SpeciesGroup, level: f64) -> Result<Vec<Band>> {
    let etas = artifact.linear_predictors(region, group)?;
    let cell = artifact.cell_position(region, group)?;
    let h = artifact.hyper();
    let settings = &artifact.artifact.settings;
    etas.iter()
        .enumerate()
        .map(|(w, &eta)| {
            let method = seeded(settings.predictive, week_seed(settings.seed, cell, w as u32 + 1));
            predictive_band(eta, h.p, h.sigma2, level, method)
        })
        .collect()
}

/// The predictive method with its Monte Carlo seed replaced.
pub fn seeded(method: PredictiveMethod, seed: u64) -> PredictiveMethod {
    match method {
        PredictiveMethod::MonteCarlo { draws, .. } => PredictiveMethod::MonteCarlo { draws, seed },
        m => m,
    }
}

/// Charts of every fitted cell, in cell order.
pub fn all_charts(artifact: &LoadedArtifact, level: f64) -> Result<Vec<ControlChart>> {
    artifact
        .artifact
        .cells
        .iter()
        .map(|c| build_chart(artifact, c.region, c.group, level))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub region: RegionCode,
    pub species: SpeciesGroup,
    pub week: u32,
    pub observed: f64,
    pub upper: f64,
    /// `observed / upper`; `None` when the upper bound is zero.
    pub exceedance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertReport {
    pub alerts: Vec<Alert>,
}

/// Above-band weeks of all charts, one row per (region, species, week), most severe first.
pub fn alert_report(charts: &[ControlChart]) -> AlertReport {
    let mut alerts: Vec<Alert> = Vec::new();
    for c in charts {
        for (k, &flag) in c.flags.iter().enumerate() {
            if flag != WeekFlag::AboveBand {
                continue;
            }
            let observed = c.observed[k].expect("above-band weeks are observed");
            let upper = c.upper[k];
            alerts.push(Alert {
                region: c.region,
                species: c.group,
                week: c.weeks[k],
                observed,
                upper,
                exceedance: (upper > 0.0).then(|| observed / upper),
            });
        }
    }
    let severity = |a: &Alert| a.exceedance.unwrap_or(f64::INFINITY);
    alerts.sort_by(|a, b| {
        severity(b)
            .total_cmp(&severity(a))
            .then((a.region, a.species, a.week).cmp(&(b.region, b.species, b.week)))
    });
    let mut seen = std::collections::BTreeSet::new();
    alerts.retain(|a| seen.insert((a.region, a.species, a.week)));
    AlertReport { alerts }
}

impl AlertReport {
    pub fn len(&self) -> usize {
        self.alerts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alerts.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["region", "species", "week", "observed", "upper", "exceedance"])
            .map_err(|e| Error::Artifact(e.to_string()))?;
        for a in &self.alerts {
            w.write_record([
                a.region.to_string(),
                a.species.to_string(),
                a.week.to_string(),
                a.observed.to_string(),
                a.upper.to_string(),
                a.exceedance.map(|e| e.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| Error::Artifact(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Artifact(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// True when the wider-level chart's band contains the narrower one in every week.
pub fn band_monotonicity_check(a: &ControlChart, b: &ControlChart) -> bool {
    let (narrow, wide) = if a.level <= b.level { (a, b) } else { (b, a) };
    narrow.region == wide.region
        && narrow.group == wide.group
        && narrow.weeks == wide.weeks
        && (0..narrow.weeks.len()).all(|k| wide.lower[k] <= narrow.lower[k] && narrow.upper[k] <= wide.upper[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(lower: f64, expected: f64, upper: f64) -> Band {
        Band { lower, expected, upper }
    }

    fn chart(observed: Vec<Option<f64>>) -> ControlChart {
        let bands = vec![band(1.0, 3.0, 6.0); observed.len()];
        ControlChart::from_bands(RegionCode::new(15).unwrap(), SpeciesGroup::PI, 0.8, &bands, observed).unwrap()
    }

    #[test]
    fn flags_follow_the_band() {
        let c = chart(vec![Some(3.0), Some(7.0), Some(6.0), Some(0.5), None, Some(1.0)]);
        assert_eq!(
            c.flags,
            vec![
                WeekFlag::InControl,
                WeekFlag::AboveBand,
                WeekFlag::InControl,
                WeekFlag::BelowBand,
                WeekFlag::Gap,
                WeekFlag::InControl
            ]
        );
        assert_eq!(c.weeks, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn median_observations_are_in_control() {
        let c = chart(vec![Some(3.0); 26]);
        assert_eq!(c.count(WeekFlag::InControl), 26);
    }

    #[test]
    fn report_counts_and_orders_alerts() {
        assert!(alert_report(&[chart(vec![Some(3.0); 5])]).is_empty());
        let a = chart(vec![Some(7.0), Some(2.0)]);
        let mut b = chart(vec![Some(12.0), Some(9.0), Some(1.0)]);
        b.region = RegionCode::new(2).unwrap();
        let r = alert_report(&[a.clone(), b]);
        assert_eq!(r.len(), 3);
        let ex: Vec<f64> = r.alerts.iter().map(|x| x.exceedance.unwrap()).collect();
        assert_eq!(ex, vec![2.0, 1.5, 7.0 / 6.0]);
        assert_eq!(alert_report(&[a.clone(), a]).len(), 1);
        let csv = r.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("region,species,week,observed,upper,exceedance\n2,PI,1,12,6,2\n"));
    }

    #[test]
    fn zero_upper_bound_sorts_first_without_ratio() {
        let bands = vec![band(0.0, 0.0, 0.0), band(1.0, 3.0, 6.0)];
        let c = ControlChart::from_bands(RegionCode::new(1).unwrap(), SpeciesGroup::CE, 0.8, &bands, vec![Some(0.5), Some(9.0)]).unwrap();
        let r = alert_report(&[c]);
        assert_eq!(r.alerts[0].exceedance, None);
        assert_eq!(r.alerts[0].week, 1);
        assert!(serde_json::to_string(&r).unwrap().contains("\"exceedance\":null"));
    }

    #[test]
    fn wider_levels_contain_narrower_bands() {
        let eta = LinearPredictor { mean: 1.3, sd: 0.4 };
        let method = PredictiveMethod::default();
        let mut last: Option<Band> = None;
        for level in [0.2, 0.5, 0.8, 0.95] {
            let b = predictive_band(eta, 1.8, 0.6, level, method).unwrap();
            assert!(b.lower <= b.expected && b.expected <= b.upper);
            if let Some(prev) = last {
                assert!(b.lower <= prev.lower && prev.upper <= b.upper);
                assert_eq!(b.expected, prev.expected);
            }
            last = Some(b);
        }
        assert!(predictive_band(eta, 1.8, 0.6, 1.0, method).is_err());
    }

    #[test]
    fn monotonicity_check_compares_levels() {
        let region = RegionCode::new(3).unwrap();
        let obs = vec![Some(2.0); 2];
        let narrow = ControlChart::from_bands(region, SpeciesGroup::BI, 0.5, &[band(2.0, 3.0, 4.0); 2], obs.clone()).unwrap();
        let wide = ControlChart::from_bands(region, SpeciesGroup::BI, 0.8, &[band(1.0, 3.0, 6.0); 2], obs.clone()).unwrap();
        assert!(band_monotonicity_check(&narrow, &wide));
        assert!(band_monotonicity_check(&wide, &narrow));
        assert!(band_monotonicity_check(&narrow, &narrow));
        let broken = ControlChart::from_bands(region, SpeciesGroup::BI, 0.8, &[band(2.5, 3.0, 6.0); 2], obs).unwrap();
        assert!(!band_monotonicity_check(&narrow, &broken));
    }
}
