//! Scenario-driven front end: JSON configs, bundled presets and output files.
//!
//! Every CSV written here starts with a `# ssh-sim <version> config_hash=<hash>`
//! line; JSON outputs carry the same data under a `provenance` key.

mod config;
mod presets;
mod run;

use std::path::Path;

use serde_json::Value;

pub use config::{
    parse_config, ChiralSweep, DisorderObservable, DisorderParams, FitParams, QuenchParams,
    Scenario, ScenarioConfig, SpectrumParams, MAX_CELLS, MEASURED_RATE_SETS,
};
pub use presets::{preset, PRESETS};
pub use run::{config_hash, output_prefix, run_scenario, RunSummary, OUT_DIR_ENV, TOOL, VERSION};

use crate::error::{Error, Result};

/// Parses config text into its raw value and the validated scenario.
pub fn load_config_str(text: &str, origin: &str) -> Result<(Value, ScenarioConfig)> {
    let raw: Value = serde_json::from_str(text).map_err(|source| Error::Json {
        what: origin.to_string(),
        source,
    })?;
    let config = parse_config(&raw).map_err(Error::Config)?;
    Ok((raw, config))
}

pub fn load_config(path: &Path) -> Result<(Value, ScenarioConfig)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_config_str(&text, &path.display().to_string())
}

/// Full validation without running; lists every violation.
pub fn validate_config(path: &Path) -> Result<()> {
    load_config(path).map(|_| ())
}
