use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::error::{Result, SimError};

/// A (trial, sweep point) left out of the aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub trial: usize,
    pub seed: u64,
    pub x: f64,
    pub reason: String,
}

/// Sidecar written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub scenario: ScenarioKind,
    pub crate_version: String,
    pub generator: String,
    pub generator_version: String,
    pub seed: u64,
    pub trials: usize,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub output_file: String,
    pub rows: usize,
    pub excluded: Vec<Exclusion>,
    pub details: serde_json::Value,
}

impl RunMetadata {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            scenario: cfg.scenario,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            generator: d2dprice::model::GENERATOR_FAMILY.to_string(),
            generator_version: d2dprice::model::GENERATOR_VERSION.to_string(),
            seed: cfg.topology.seed,
            trials: cfg.trials(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            output_file: cfg.output_path.clone(),
            rows: 0,
            excluded: Vec::new(),
            details: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub csv: Vec<u8>,
    pub metadata: RunMetadata,
}

impl ScenarioOutput {
    pub fn metadata_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        s.push('\n');
        s
    }

    pub fn csv_text(&self) -> &str {
        std::str::from_utf8(&self.csv).expect("csv is utf-8")
    }
}

/// Sidecar path: `foo.csv` becomes `foo.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes the CSV and its metadata sidecar, returning both paths.
pub fn write_output(out: &ScenarioOutput, dir: Option<&Path>) -> Result<(PathBuf, PathBuf)> {
    let rel = Path::new(&out.metadata.output_file);
    let csv_path = match dir {
        Some(d) => d.join(rel),
        None => rel.to_path_buf(),
    };
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| SimError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(&csv_path, &out.csv).map_err(|source| SimError::Io {
        path: csv_path.clone(),
        source,
    })?;
    let meta_path = metadata_path(&csv_path);
    fs::write(&meta_path, out.metadata_json()).map_err(|source| SimError::Io {
        path: meta_path.clone(),
        source,
    })?;
    Ok((csv_path, meta_path))
}

/// Shortest round-trip decimal form.
pub(crate) fn num(x: f64) -> String {
    format!("{x}")
}
