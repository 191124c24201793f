//! Genesis configuration files (TOML).
//!
//! ```toml
//! date = "2026-10-14"
//!
//! [[accounts]]
//! address = "0x…"
//! balance = "1000000000000000000"
//!
//! [gas]          # optional; defaults to the calibrated schedule
//! deploy = 3277000
//!
//! [market]       # optional
//! voltages = [5, 9, 12, 24, 36, 48]
//! offer_window_days = 2
//! ```

use std::fs;
use std::path::Path;

use anka_core::chain::GenesisConfig;

#[derive(Debug, thiserror::Error)]
pub enum GenesisFileError {
    #[error("genesis {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("genesis {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
}

pub fn load(path: &Path) -> Result<GenesisConfig, GenesisFileError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| GenesisFileError::Io { path: p.clone(), source })?;
    parse(&text).map_err(|source| GenesisFileError::Parse { path: p, source })
}

pub fn parse(text: &str) -> Result<GenesisConfig, toml::de::Error> {
    toml::from_str(text)
}

pub fn render(config: &GenesisConfig) -> String {
    toml::to_string_pretty(config).expect("genesis serializes")
}
