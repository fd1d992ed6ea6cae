//! Server side of the flexgui workbench: an AMF remoting gateway in front
//! of authentication, layout/settings persistence, action log, chat and
//! record search, backed by a file store.

pub mod clock;
pub mod fault;
pub mod gateway;
pub mod search;
pub mod server;
pub mod services;
pub mod store;

use std::path::PathBuf;
use std::sync::Arc;

use log::info;
use thiserror::Error;

use crate::clock::Clock;
use crate::gateway::{ConfigError, Gateway, ServiceRegistry};
use crate::services::{AppServices, ServiceConfig};
use crate::store::{Store, StoreError};

/// Demo records loaded when the store has none and no seed file is given.
pub const BUNDLED_SEED: &str = include_str!("../fixtures/records.csv");

pub const ROUTES_FILE: &str = "routes.conf";

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("routes: {0}")]
    Routes(#[from] ConfigError),
}

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub data_dir: PathBuf,
    pub seed_file: Option<PathBuf>,
    /// Defaults to `routes.conf` inside the data directory.
    pub routes_file: Option<PathBuf>,
    pub services: ServiceConfig,
}

impl AppConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        AppConfig {
            data_dir: data_dir.into(),
            seed_file: None,
            routes_file: None,
            services: ServiceConfig::default(),
        }
    }

    pub fn routes_path(&self) -> PathBuf {
        self.routes_file
            .clone()
            .unwrap_or_else(|| self.data_dir.join(ROUTES_FILE))
    }
}

/// Opens the store, seeds records and loads routes.
pub fn build_gateway(config: &AppConfig, clock: Arc<dyn Clock>) -> Result<Gateway, StartupError> {
    let store = Arc::new(Store::open(&config.data_dir)?);
    if let Some(seed) = &config.seed_file {
        let n = store.ingest_seed(seed)?;
        info!("loaded {n} records from {}", seed.display());
    } else if store.records().is_empty() {
        let n = store.ingest_seed_reader(BUNDLED_SEED.as_bytes())?;
        info!("loaded {n} bundled demo records");
    }
    let routes_path = config.routes_path();
    let registry = ServiceRegistry::load(&routes_path)?;
    info!("{} routes (from {})", registry.len(), routes_path.display());
    let services = AppServices::new(store, clock, config.services.clone());
    Ok(Gateway::new(registry, Arc::new(services)))
}
