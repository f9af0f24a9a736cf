//! Seeded experiment harness for the D2D pricing library: scenario configs,
//! Monte Carlo runners and CSV / metadata output.

pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;

pub use config::{preset, ScenarioConfig, ScenarioKind, Sweep, PRESETS};
pub use error::{Result, SimError};
pub use output::{write_output, RunMetadata, ScenarioOutput};
pub use scenarios::run;
