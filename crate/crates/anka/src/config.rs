//! Node and CLI configuration files.
//!
//! Both are optional TOML documents. Environment variables override file
//! values; command-line flags override both (clap reads the same variables).

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub const ENV_LISTEN: &str = "ANKA_LISTEN";
pub const ENV_GENESIS: &str = "ANKA_GENESIS";
pub const ENV_NODE_URL: &str = "ANKA_NODE_URL";
pub const ENV_KEYSTORE: &str = "ANKA_KEYSTORE";

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8545";
pub const DEFAULT_NODE_URL: &str = "http://127.0.0.1:8545";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("{var}: {message}")]
    Env { var: &'static str, message: String },
}

/// How the sequencer advances the chain date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "date")]
pub enum Clock {
    /// Date stays put until `set_date` moves it. Tests and demos.
    Fixed(Option<NaiveDate>),
    /// Follows the host's UTC date.
    System,
}

impl Default for Clock {
    fn default() -> Self {
        Clock::Fixed(None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NodeConfig {
    pub listen: SocketAddr,
    /// Genesis TOML. Without one the node starts a dev chain with the
    /// faucet account funded.
    pub genesis: Option<PathBuf>,
    /// Append every submission to this JSON-lines log.
    pub log: Option<PathBuf>,
    pub clock: Clock,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            listen: DEFAULT_LISTEN.parse().expect("valid default"),
            genesis: None,
            log: None,
            clock: Clock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub node_url: String,
    pub keystore: Option<PathBuf>,
    /// Default postal code for `market browse`.
    pub postal: Option<String>,
    /// Default offer and browse date; the chain's date when unset.
    pub date: Option<NaiveDate>,
    pub format: OutputFormat,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            node_url: DEFAULT_NODE_URL.to_string(),
            keystore: None,
            postal: None,
            date: None,
            format: OutputFormat::Table,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Table,
    Json,
}

fn read_toml<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T, ConfigError> {
    let Some(path) = path else { return Ok(T::default()) };
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse { path: p, source })
}

type Env<'a> = &'a dyn Fn(&str) -> Option<String>;

fn process_env(var: &str) -> Option<String> {
    std::env::var(var).ok().filter(|v| !v.is_empty())
}

impl NodeConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c: Self = read_toml(path)?;
        c.apply_env(&process_env)?;
        Ok(c)
    }

    pub fn apply_env(&mut self, env: Env) -> Result<(), ConfigError> {
        if let Some(v) = env(ENV_LISTEN) {
            self.listen = v.parse().map_err(|e| ConfigError::Env { var: ENV_LISTEN, message: format!("{e}") })?;
        }
        if let Some(v) = env(ENV_GENESIS) {
            self.genesis = Some(v.into());
        }
        Ok(())
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c: Self = read_toml(path)?;
        c.apply_env(&process_env);
        Ok(c)
    }

    pub fn apply_env(&mut self, env: Env) {
        if let Some(v) = env(ENV_NODE_URL) {
            self.node_url = v;
        }
        if let Some(v) = env(ENV_KEYSTORE) {
            self.keystore = Some(v.into());
        }
    }
}
