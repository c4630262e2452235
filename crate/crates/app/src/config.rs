//! Run configuration: a TOML file plus `CARCASSWATCH_*` environment overrides.

use std::path::{Path, PathBuf};

use carcasswatch_core::gmrf::MeshParams;
use carcasswatch_core::inference::{FitSettings, OptimizeOptions, PredictiveMethod, DEFAULT_DRAWS, DEFAULT_NODES};
use carcasswatch_core::ingest::{ColumnMap, Field};
use serde::Deserialize;

use crate::error::AppError;

pub const ENV_PREFIX: &str = "CARCASSWATCH_";
/// Names the config file when `--config` is absent.
pub const ENV_CONFIG: &str = "CARCASSWATCH_CONFIG";
pub const ARTIFACT_FILE: &str = "fit.json";
pub const REPORT_FILE: &str = "fit_report.txt";
pub const REJECTED_FILE: &str = "rejected.jsonl";

const SECTIONS: [&str; 3] = ["mesh", "predictive", "optimizer"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictiveKind {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictiveConfig {
    pub kind: PredictiveKind,
    pub nodes: usize,
    pub draws: usize,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        PredictiveConfig {
            kind: PredictiveKind::Quadrature,
            nodes: DEFAULT_NODES,
            draws: DEFAULT_DRAWS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_evaluations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_evaluations: OptimizeOptions::default().simplex.max_evals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MeshSection {
    max_edge_km: f64,
    outer_max_edge_km: f64,
    extension_km: f64,
    cutoff_km: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        let m = MeshParams::default();
        MeshSection {
            max_edge_km: m.max_edge_km,
            outer_max_edge_km: m.outer_max_edge_km,
            extension_km: m.extension_km,
            cutoff_km: m.cutoff_km,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    input: Option<PathBuf>,
    output_dir: PathBuf,
    columns: Option<PathBuf>,
    level: f64,
    seed: u64,
    port: u16,
    raster_deg: f64,
    mesh: MeshSection,
    predictive: PredictiveConfig,
    optimizer: OptimizerConfig,
}

impl Default for RawConfig {
    fn default() -> Self {
        let fit = FitSettings::default();
        RawConfig {
            input: None,
            output_dir: PathBuf::from("out"),
            columns: None,
            level: fit.level,
            seed: fit.seed,
            port: 8080,
            raster_deg: 0.25,
            mesh: MeshSection::default(),
            predictive: PredictiveConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Header-to-field map file; the built-in aliases apply when absent.
    pub columns: Option<PathBuf>,
    pub level: f64,
    pub seed: u64,
    pub port: u16,
    /// Cell size in degrees of the `/field` raster.
    pub raster_deg: f64,
    pub mesh: MeshParams,
    pub predictive: PredictiveConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_raw(RawConfig::default()).expect("defaults are valid")
    }
}

/// Parse an environment value as a TOML scalar, falling back to a bare string.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

fn apply_env(table: &mut toml::Table, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), AppError> {
    for (name, value) in vars {
        let Some(key) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        if name == ENV_CONFIG {
            continue;
        }
        let key = key.to_ascii_lowercase();
        let value = env_value(&value);
        match SECTIONS.iter().find(|s| key.starts_with(&format!("{s}_"))) {
            Some(section) => {
                let sub = table
                    .entry(section.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                let toml::Value::Table(sub) = sub else {
                    return Err(AppError::usage(format!("config key `{section}` must be a table")));
                };
                sub.insert(key[section.len() + 1..].to_owned(), value);
            }
            None => {
                table.insert(key, value);
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Load `path` (if any), then apply overrides from `vars`. Relative paths in the file are
    /// taken relative to the file's directory.
    pub fn load(path: Option<&Path>, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, AppError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| AppError::usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| AppError::usage(format!("malformed config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let base = path.and_then(Path::parent).map(Path::to_path_buf);
        let mut file_raw: RawConfig = toml::Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| AppError::usage(format!("invalid config: {e}")))?;
        if let Some(base) = &base {
            file_raw.input = file_raw.input.map(|p| base.join(p));
            file_raw.output_dir = base.join(&file_raw.output_dir);
            file_raw.columns = file_raw.columns.map(|p| base.join(p));
            for (key, value) in [("input", &file_raw.input), ("columns", &file_raw.columns)] {
                if let Some(v) = value {
                    table.insert(key.into(), toml::Value::String(v.to_string_lossy().into_owned()));
                }
            }
            table.insert("output_dir".into(), toml::Value::String(file_raw.output_dir.to_string_lossy().into_owned()));
        }
        apply_env(&mut table, vars)?;
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| AppError::usage(format!("invalid config: {e}")))?;
        RunConfig::from_raw(raw)
    }

    /// Load from `--config`, else `CARCASSWATCH_CONFIG`, with the process environment applied.
    pub fn from_env(path: Option<&Path>) -> Result<Self, AppError> {
        let env_path = std::env::var_os(ENV_CONFIG).map(PathBuf::from);
        RunConfig::load(path.or(env_path.as_deref()), std::env::vars())
    }

    fn from_raw(raw: RawConfig) -> Result<Self, AppError> {
        if !(raw.level > 0.0 && raw.level < 1.0) {
            return Err(AppError::usage(format!("level must lie in (0, 1), got {}", raw.level)));
        }
        if raw.port == 0 {
            return Err(AppError::usage("port must lie in 1..=65535"));
        }
        if !(raw.raster_deg > 0.0 && raw.raster_deg.is_finite()) {
            return Err(AppError::usage(format!("raster_deg must be positive, got {}", raw.raster_deg)));
        }
        let m = &raw.mesh;
        let mesh = MeshParams {
            max_edge_km: m.max_edge_km,
            outer_max_edge_km: m.outer_max_edge_km,
            extension_km: m.extension_km,
            cutoff_km: m.cutoff_km,
        };
        if ![mesh.max_edge_km, mesh.outer_max_edge_km, mesh.extension_km].iter().all(|v| *v > 0.0 && v.is_finite())
            || !(mesh.cutoff_km >= 0.0)
        {
            return Err(AppError::usage(format!("mesh parameters must be positive, got {mesh:?}")));
        }
        if raw.predictive.nodes == 0 || raw.predictive.draws == 0 {
            return Err(AppError::usage("predictive nodes and draws must be positive"));
        }
        if raw.optimizer.max_evaluations == 0 {
            return Err(AppError::usage("optimizer max_evaluations must be positive"));
        }
        Ok(RunConfig {
            input: raw.input,
            output_dir: raw.output_dir,
            columns: raw.columns,
            level: raw.level,
            seed: raw.seed,
            port: raw.port,
            raster_deg: raw.raster_deg,
            mesh,
            predictive: raw.predictive,
            optimizer: raw.optimizer,
        })
    }

    /// The input file, which must exist.
    pub fn require_input(&self) -> Result<&Path, AppError> {
        let path = self
            .input
            .as_deref()
            .ok_or_else(|| AppError::usage("no input file configured (set `input` or CARCASSWATCH_INPUT)"))?;
        if !path.is_file() {
            return Err(AppError::input("ingest", format!("input file {} not found", path.display())));
        }
        Ok(path)
    }

    pub fn artifact_path(&self) -> PathBuf {
        self.output_dir.join(ARTIFACT_FILE)
    }

    pub fn column_map(&self) -> Result<ColumnMap, AppError> {
        match &self.columns {
            Some(p) => load_column_map(p),
            None => Ok(ColumnMap::default()),
        }
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            mesh: self.mesh,
            predictive: match self.predictive.kind {
                PredictiveKind::Quadrature => PredictiveMethod::Quadrature { nodes: self.predictive.nodes },
                PredictiveKind::MonteCarlo => PredictiveMethod::MonteCarlo {
                    draws: self.predictive.draws,
                    seed: self.seed,
                },
            },
            seed: self.seed,
            level: self.level,
        }
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        let mut opts = OptimizeOptions::default();
        opts.simplex.max_evals = self.optimizer.max_evaluations;
        opts
    }
}

/// A column map file: `"header spelling" = "canonical_field"` pairs added to the built-in aliases.
pub fn load_column_map(path: &Path) -> Result<ColumnMap, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::usage(format!("cannot read column map {}: {e}", path.display())))?;
    parse_column_map(&text).map_err(|e| AppError::usage(format!("column map {}: {e}", path.display())))
}

pub fn parse_column_map(text: &str) -> Result<ColumnMap, String> {
    let table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    let mut map = ColumnMap::default();
    for (header, field) in table {
        let name = field.as_str().ok_or_else(|| format!("value for `{header}` must be a field name"))?;
        let field = Field::from_canonical(name).ok_or_else(|| format!("unknown field `{name}` for header `{header}`"))?;
        map.insert(&header, field);
    }
    Ok(map)
}
