//! Server configuration loaded from a TOML file. Every section is optional
//! and falls back to its defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::ScoringConfig;
use crate::showdown::TimerSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerSection,
    pub lobby: LobbyConfig,
    pub miboard: MiBoardConfig,
    pub showdown: ShowdownConfig,
    pub scoring: ScoringConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.miboard.validate()?;
        self.showdown.validate()?;
        self.scoring
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub zone: String,
    /// Base seed for per-room RNGs.
    pub seed: u64,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            zone: "default".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LobbyConfig {
    /// Seconds a MiBoard room with at least three players waits for a fourth.
    pub miboard_fill_timeout_secs: u32,
}

impl Default for LobbyConfig {
    fn default() -> Self {
        LobbyConfig {
            miboard_fill_timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiBoardConfig {
    pub board_length: u32,
    pub die_sides: u32,
    pub discussion_secs: u32,
    pub turn_timeout_secs: u32,
}

impl Default for MiBoardConfig {
    fn default() -> Self {
        MiBoardConfig {
            board_length: 30,
            die_sides: 6,
            discussion_secs: 60,
            turn_timeout_secs: 300,
        }
    }
}

impl MiBoardConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.board_length == 0 {
            return Err(ConfigError::Invalid("miboard.board_length must be > 0".into()));
        }
        if self.die_sides < 2 {
            return Err(ConfigError::Invalid("miboard.die_sides must be >= 2".into()));
        }
        if self.discussion_secs == 0 || self.turn_timeout_secs == 0 {
            return Err(ConfigError::Invalid("miboard timer durations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShowdownConfig {
    pub reading_secs: TimerSpec,
    pub composing_secs: TimerSpec,
    pub round_result_secs: TimerSpec,
    /// Fixed number of regular rounds; defaults to one per target sentence.
    pub round_count: Option<u32>,
    pub max_bonus_rounds: u32,
}

impl Default for ShowdownConfig {
    fn default() -> Self {
        ShowdownConfig {
            reading_secs: TimerSpec::DEFAULT_READING,
            composing_secs: TimerSpec::DEFAULT_COMPOSING,
            round_result_secs: TimerSpec::DEFAULT_ROUND_RESULT,
            round_count: None,
            max_bonus_rounds: 3,
        }
    }
}

impl ShowdownConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.round_count == Some(0) {
            return Err(ConfigError::Invalid("showdown.round_count must be > 0".into()));
        }
        Ok(())
    }
}
