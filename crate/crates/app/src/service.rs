//! Read-only JSON service over one loaded artifact.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use carcasswatch_core::inference::LoadedArtifact;
use carcasswatch_core::ingest::{AgeClass, Gender, RegionCode, SeriesFilter, SpeciesGroup, SummaryBy};
use carcasswatch_core::monitor::check_level;
use carcasswatch_core::Error as CoreError;
use serde::Serialize;

use crate::error::AppError;
use crate::views;

pub struct AppState {
    pub artifact: LoadedArtifact,
    pub raster_deg: f64,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match e {
            CoreError::Lookup(_) => StatusCode::NOT_FOUND,
            CoreError::Domain(_) | CoreError::Coding(_) | CoreError::Range(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    status: u16,
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = views::to_json(&ErrorBody {
            status: self.status.as_u16(),
            error: &self.message,
        });
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], views::to_json(value)).into_response()
}

type Params = Result<Query<BTreeMap<String, String>>, QueryRejection>;

/// Query parameters restricted to `allowed`.
fn params(q: Params, allowed: &[&str]) -> Result<BTreeMap<String, String>, ApiError> {
    let Query(map) = q?;
    if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ApiError::bad_request(format!("unknown query parameter `{k}` (allowed: {})", allowed.join(", "))));
    }
    Ok(map)
}

fn level_param(map: &BTreeMap<String, String>) -> Result<Option<f64>, ApiError> {
    map.get("level")
        .map(|raw| {
            let level: f64 = raw
                .parse()
                .map_err(|_| ApiError::bad_request(format!("level must be a number, got `{raw}`")))?;
            check_level(level).map_err(|e| ApiError::bad_request(e.to_string()))?;
            Ok(level)
        })
        .transpose()
}

/// Region from a path segment or query value: malformed codes are a bad request, well-formed
/// codes that are not regions are not found.
fn region_code(raw: &str, malformed: fn(String) -> ApiError) -> Result<RegionCode, ApiError> {
    let code: u8 = raw
        .trim()
        .parse()
        .map_err(|_| malformed(format!("region must be a numeric code, got `{raw}`")))?;
    RegionCode::new(code).map_err(|_| ApiError::not_found(format!("unknown region {code}")))
}

fn group_code(raw: &str) -> Result<SpeciesGroup, ApiError> {
    raw.parse::<SpeciesGroup>()
        .map_err(|_| ApiError::not_found(format!("unknown species group `{raw}`")))
}

/// Enum value by its serialized name.
fn vocabulary<T: Serialize + Copy>(raw: &str, all: &[T], what: &str) -> Result<T, ApiError> {
    let key = raw.trim().to_ascii_lowercase();
    all.iter()
        .copied()
        .find(|v| serde_json::to_value(v).ok().and_then(|j| j.as_str().map(str::to_owned)).as_deref() == Some(key.as_str()))
        .ok_or_else(|| ApiError::bad_request(format!("unknown {what} `{raw}`")))
}

async fn health(State(s): State<Arc<AppState>>) -> Response {
    json(&views::health(&s.artifact))
}

async fn regions(State(s): State<Arc<AppState>>) -> Response {
    json(&views::regions(&s.artifact))
}

async fn summary(State(s): State<Arc<AppState>>, q: Params) -> Result<Response, ApiError> {
    let map = params(q, &["by"])?;
    let by = match map.get("by") {
        Some(raw) => raw.parse::<SummaryBy>().map_err(|e| ApiError::bad_request(e.to_string()))?,
        None => SummaryBy::Region,
    };
    Ok(json(&views::summary(&s.artifact, by)?))
}

async fn series(State(s): State<Arc<AppState>>, q: Params) -> Result<Response, ApiError> {
    let map = params(q, &["region", "group", "age", "gender"])?;
    let present = |k: &str| map.get(k).filter(|v| !v.trim().is_empty());
    let filter = SeriesFilter {
        region: present("region").map(|r| region_code(r, ApiError::bad_request)).transpose()?,
        group: present("group").map(|g| group_code(g)).transpose()?,
        age: present("age").map(|a| vocabulary(a, &AgeClass::ALL, "age class")).transpose()?,
        gender: present("gender").map(|g| vocabulary(g, &Gender::ALL, "gender")).transpose()?,
    };
    Ok(json(&views::series(&s.artifact, &filter)?))
}

async fn chart(
    State(s): State<Arc<AppState>>,
    Path((region, group)): Path<(String, String)>,
    q: Params,
) -> Result<Response, ApiError> {
    let map = params(q, &["level"])?;
    let level = level_param(&map)?;
    let region = region_code(&region, ApiError::not_found)?;
    let group = group_code(&group)?;
    Ok(json(&views::chart(&s.artifact, region, group, level)?))
}

async fn alerts(State(s): State<Arc<AppState>>, q: Params) -> Result<Response, ApiError> {
    let map = params(q, &["level", "format"])?;
    let level = level_param(&map)?;
    let report = views::alerts(&s.artifact, level)?;
    match map.get("format").map(String::as_str) {
        None | Some("json") => Ok(json(&report)),
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], report.to_csv()?).into_response()),
        Some(other) => Err(ApiError::bad_request(format!("format must be json or csv, got `{other}`"))),
    }
}

async fn field(State(s): State<Arc<AppState>>, Path(month): Path<String>, q: Params) -> Result<Response, ApiError> {
    params(q, &[])?;
    let month: u32 = month
        .parse()
        .map_err(|_| ApiError::bad_request(format!("month must be a positive integer, got `{month}`")))?;
    Ok(json(&views::field(&s.artifact, month, s.raster_deg)?))
}

async fn mesh(State(s): State<Arc<AppState>>) -> Response {
    json(&views::mesh(&s.artifact))
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/regions", get(regions))
        .route("/summary", get(summary))
        .route("/series", get(series))
        .route("/chart/{region}/{group}", get(chart))
        .route("/alerts", get(alerts))
        .route("/field/{month}", get(field))
        .route("/mesh", get(mesh))
        .fallback(fallback)
        .with_state(state)
}

pub async fn serve(state: AppState, port: u16) -> Result<(), AppError> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::usage(format!("cannot bind {addr}: {e}")))?;
    eprintln!("serving on http://{addr}");
    axum::serve(listener, router(Arc::new(state)))
        .await
        .map_err(|e| AppError::internal("serve", e.to_string()))
}
