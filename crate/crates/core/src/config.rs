//! TOML run configuration. Keys mirror [`RunConfig`] and
//! [`EpisodeConfig`](crate::engine::EpisodeConfig); anything omitted keeps
//! its default.
//!
//! ```toml
//! formation = "asymmetric"
//! schedulers = ["maf", "mv"]
//! episodes = 20
//! seed = 42
//! dt = 1e-4
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::engine::{EpisodeConfig, RunConfig};
use crate::error::{Error, Result};

/// Keys that belong to the batch rather than to a single episode.
const RUN_KEYS: [&str; 5] = ["episodes", "seed", "schedulers", "workers", "burn_in"];

/// Parses a run configuration. Batch and episode keys are deserialized
/// separately so errors name the offending key.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let (run, episode): (toml::Table, toml::Table) =
        table.into_iter().partition(|(k, _)| RUN_KEYS.contains(&k.as_str()));
    let run: RunConfig = from_table(run)?;
    let episode: EpisodeConfig = from_table(episode)?;
    Ok(RunConfig { episode, ..run })
}

fn from_table<T: DeserializeOwned>(table: toml::Table) -> Result<T> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("{path}: {}", e.into_inner().message()))
    })
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_run_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
