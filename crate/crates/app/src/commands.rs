//! The CLI commands. Each returns what it wrote so callers and tests can inspect it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use carcasswatch_core::inference::{fit_model, FitArtifact, LoadedArtifact, SurveillanceModel};
use carcasswatch_core::ingest::{parse_csv, DatasetSummary, ParseOutcome, RegionCode, SeriesFilter, SpeciesGroup, SummaryBy};
use carcasswatch_core::monitor::ControlChart;
use serde::Serialize;

use crate::config::{RunConfig, REJECTED_FILE, REPORT_FILE};
use crate::error::AppError;
use crate::report::fit_report;
use crate::views;

/// Files staged under temporary names and renamed into place together; dropped stages are
/// deleted, so a failed command leaves no partial output behind.
struct Staged {
    files: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl Staged {
    fn new() -> Self {
        Staged {
            files: Vec::new(),
            committed: false,
        }
    }

    fn write(&mut self, path: PathBuf, contents: &[u8]) -> Result<(), AppError> {
        let name = path.file_name().expect("output path has a file name").to_string_lossy();
        let tmp = path.with_file_name(format!(".{name}.partial"));
        std::fs::write(&tmp, contents).map_err(|e| AppError::internal("write", format!("{}: {e}", tmp.display())))?;
        self.files.push((tmp, path));
        Ok(())
    }

    fn commit(mut self) -> Result<Vec<PathBuf>, AppError> {
        for (tmp, path) in &self.files {
            std::fs::rename(tmp, path).map_err(|e| AppError::internal("write", format!("{}: {e}", path.display())))?;
        }
        self.committed = true;
        Ok(self.files.iter().map(|(_, p)| p.clone()).collect())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, path) in &self.files {
                let _ = std::fs::remove_file(tmp);
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::usage(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn ingest(cfg: &RunConfig) -> Result<ParseOutcome, AppError> {
    let input = cfg.require_input()?;
    let columns = cfg.column_map()?;
    parse_csv(input, &columns).map_err(AppError::stage("ingest"))
}

#[derive(Debug)]
pub struct FitOutcome {
    pub artifact: FitArtifact,
    pub written: Vec<PathBuf>,
    pub report: String,
}

/// Ingest, build the model, fit it and write the artifact, report and rejected rows.
pub fn fit(cfg: &RunConfig) -> Result<FitOutcome, AppError> {
    let mut staged = Staged::new();
    let parsed = ingest(cfg)?;
    if parsed.records.is_empty() {
        return Err(AppError::input("ingest", "no valid records to fit"));
    }
    let data = DatasetSummary::from_records(&parsed.records).map_err(AppError::stage("ingest"))?;
    let model = SurveillanceModel::from_panel(&data.panel, &cfg.mesh).map_err(AppError::stage("design"))?;
    let artifact = fit_model(&model, Some(&data), cfg.fit_settings(), &cfg.optimize_options()).map_err(AppError::stage("fit"))?;
    let report = fit_report(&artifact, parsed.records.len(), parsed.rejected.len());

    ensure_dir(&cfg.output_dir)?;
    staged.write(cfg.artifact_path(), artifact.to_json().map_err(AppError::stage("write"))?.as_bytes())?;
    staged.write(cfg.output_dir.join(REPORT_FILE), report.as_bytes())?;
    staged.write(cfg.output_dir.join(REJECTED_FILE), parsed.rejected_jsonl().as_bytes())?;
    Ok(FitOutcome {
        artifact,
        written: staged.commit()?,
        report,
    })
}

#[derive(Debug)]
pub struct SummarizeOutcome {
    pub data: DatasetSummary,
    pub written: Vec<PathBuf>,
}

pub const SUMMARY_TABLES: [(SummaryBy, &str); 3] = [
    (SummaryBy::Region, "summary_region"),
    (SummaryBy::Group, "summary_group"),
    (SummaryBy::Species, "summary_species"),
];

fn series_csv(s: &carcasswatch_core::ingest::CumulativeSeries) -> String {
    let mut out = String::from("week,weekly,cumulative\n");
    for ((w, n), c) in s.weeks.iter().zip(&s.weekly).zip(&s.cumulative) {
        out.push_str(&format!("{w},{n},{c}\n"));
    }
    out
}

/// Descriptive tables and the country-wide cumulative series, as CSV and JSON.
pub fn summarize(cfg: &RunConfig) -> Result<SummarizeOutcome, AppError> {
    let mut staged = Staged::new();
    let parsed = ingest(cfg)?;
    let data = DatasetSummary::from_records(&parsed.records).map_err(AppError::stage("ingest"))?;
    ensure_dir(&cfg.output_dir)?;
    for (by, stem) in SUMMARY_TABLES {
        staged.write(cfg.output_dir.join(format!("{stem}.csv")), data.table_csv(by).as_bytes())?;
        staged.write(cfg.output_dir.join(format!("{stem}.json")), views::to_json(&data.table_json(by)).as_bytes())?;
    }
    let series = data.series(&SeriesFilter::default());
    staged.write(cfg.output_dir.join("series.csv"), series_csv(&series).as_bytes())?;
    staged.write(cfg.output_dir.join("series.json"), views::to_json(&series).as_bytes())?;
    Ok(SummarizeOutcome {
        data,
        written: staged.commit()?,
    })
}

pub fn load_artifact(path: &Path) -> Result<LoadedArtifact, AppError> {
    FitArtifact::read(path)
        .and_then(FitArtifact::load)
        .map_err(AppError::stage("artifact"))
}

pub fn parse_region(raw: &str) -> Result<RegionCode, AppError> {
    raw.trim()
        .parse::<u8>()
        .map_err(|_| AppError::usage(format!("region must be a numeric region code, got `{raw}`")))
        .and_then(|c| RegionCode::new(c).map_err(|e| AppError::usage(e.to_string())))
}

pub fn parse_group(raw: &str) -> Result<SpeciesGroup, AppError> {
    raw.parse::<SpeciesGroup>().map_err(|e| AppError::usage(e.to_string()))
}

pub fn chart(artifact: &LoadedArtifact, region: &str, group: &str, level: Option<f64>) -> Result<ControlChart, AppError> {
    let region = parse_region(region)?;
    let group = parse_group(group)?;
    views::chart(artifact, region, group, level).map_err(AppError::stage("chart"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub input: PathBuf,
    pub input_rows: usize,
    pub records: usize,
    pub rejected: usize,
    pub total_animals: u64,
    /// Rejected rows per reason code.
    pub reasons: BTreeMap<String, usize>,
}

/// Ingest-only dry run.
pub fn validate(cfg: &RunConfig) -> Result<ValidationReport, AppError> {
    let parsed = ingest(cfg)?;
    let mut reasons = BTreeMap::new();
    for r in &parsed.rejected {
        let key = serde_json::to_value(r.reason)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_else(|| format!("{:?}", r.reason));
        *reasons.entry(key).or_insert(0) += 1;
    }
    Ok(ValidationReport {
        input: cfg.require_input()?.to_path_buf(),
        input_rows: parsed.input_rows,
        records: parsed.records.len(),
        rejected: parsed.rejected.len(),
        total_animals: parsed.total_animals(),
        reasons,
    })
}
