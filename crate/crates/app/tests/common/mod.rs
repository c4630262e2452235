#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use carcasswatch::commands;
use carcasswatch::service::{router, AppState};
use carcasswatch::RunConfig;
use carcasswatch_core::inference::LoadedArtifact;
use http_body_util::BodyExt;
use tower::ServiceExt;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// The bundled toy config with outputs redirected to `out`.
pub fn toy_config(out: &Path) -> RunConfig {
    RunConfig::load(
        Some(&fixture("toy.toml")),
        [("CARCASSWATCH_OUTPUT_DIR".to_string(), out.to_string_lossy().into_owned())],
    )
    .unwrap()
}

/// The CLI binary with a clean `CARCASSWATCH_*` environment.
pub fn cli() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_carcasswatch"));
    for (k, _) in std::env::vars() {
        if k.starts_with("CARCASSWATCH_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub struct ToyFit {
    pub dir: tempfile::TempDir,
    pub config: RunConfig,
    pub artifact: LoadedArtifact,
}

/// One fit of the toy fixture shared by every test of a binary.
pub fn toy_fit() -> &'static ToyFit {
    static FIT: OnceLock<ToyFit> = OnceLock::new();
    FIT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        commands::fit(&config).unwrap();
        let artifact = commands::load_artifact(&config.artifact_path()).unwrap();
        ToyFit { dir, config, artifact }
    })
}

pub fn toy_router() -> axum::Router {
    let fit = toy_fit();
    router(Arc::new(AppState {
        artifact: fit.artifact.clone(),
        raster_deg: fit.config.raster_deg,
    }))
}

pub async fn get(app: &axum::Router, uri: &str) -> (StatusCode, String) {
    let response = app
        .clone()
        .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}
