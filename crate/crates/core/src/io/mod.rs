//! Scenario files, run artifacts and the bundled scenarios.

mod export;
mod scenario;

use std::path::{Path, PathBuf};

pub use export::{
    all_formats, export_run, fixed, geojson, kml, parse_formats, step_log, summary, Format,
    GEOJSON_FILE, KML_FILE, STEP_LOG_FILE, STEP_LOG_HEADER, SUMMARY_FILE,
};
pub use scenario::{load_scenario, parse_scenario, scenario_to_toml};

use crate::error::{Error, Result};

/// Overrides the default output directory of the command-line tool.
pub const OUT_DIR_ENV: &str = "PURSUIT_RL_OUT";

/// `(file name, contents)` of the scenarios shipped with the tool.
pub const BUNDLED_SCENARIOS: [(&str, &str); 3] = [
    (
        "scenario1.toml",
        include_str!("../../scenarios/scenario1.toml"),
    ),
    (
        "scenario2.toml",
        include_str!("../../scenarios/scenario2.toml"),
    ),
    (
        "scenario3.toml",
        include_str!("../../scenarios/scenario3.toml"),
    ),
];

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// Writes the bundled scenario files into `dir`.
pub fn ship_scenarios(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    BUNDLED_SCENARIOS
        .iter()
        .map(|(name, contents)| {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
