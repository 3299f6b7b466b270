//! HTTP service and command line for the circuit workbench.
//!
//! [`api`] serves every engine capability over JSON, streaming large
//! counts as NDJSON chunks; [`cli`] exposes the same operations as
//! composable `qwb` subcommands.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod ops;
pub mod pipeline;
pub mod store;
#[doc(hidden)]
pub mod testing;

use std::path::Path;

use axum::Router;
use tokio::net::TcpListener;

use crate::api::{router, AppState};
use crate::config::ServiceConfig;
use crate::store::JobStore;

/// Loads machines and the job store and builds the application.
/// `machines_dir` defaults to `<data_dir>/machines` when that exists.
pub fn app(config: ServiceConfig, machines_dir: Option<&Path>) -> Result<Router, String> {
    config.validate().map_err(|e| e.to_string())?;
    let mut machines = qwb_core::machine::builtin_registry();
    let default_dir = config.machines_dir();
    let dir = machines_dir.or(default_dir.is_dir().then_some(default_dir.as_path()));
    if let Some(dir) = dir {
        machines.load_dir(dir).map_err(|e| e.to_string())?;
    }
    let store = JobStore::open(config.jobs_dir()).map_err(|e| format!("job store: {}", e.message))?;
    Ok(router(AppState::new(machines, store, config)))
}

/// Binds the configured address and returns the listener with the app.
pub async fn bind(config: ServiceConfig, machines_dir: Option<&Path>) -> Result<(TcpListener, Router), String> {
    let addr = format!("{}:{}", config.bind, config.port);
    let app = app(config, machines_dir)?;
    let listener = TcpListener::bind(&addr).await.map_err(|e| format!("cannot bind {addr}: {e}"))?;
    Ok((listener, app))
}
