use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_PLAYER_ID_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("player id must be 1..={MAX_PLAYER_ID_LEN} characters of [A-Za-z0-9_.-], got `{0}`")]
    InvalidPlayerId(String),
    #[error("unknown game type `{0}`")]
    UnknownGameType(String),
}

/// A player identifier. Restricted to a charset that is safe both as a chat
/// sender and as a control field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Result<Self, IdError> {
        let id = id.into();
        let ok = !id.is_empty()
            && id.len() <= MAX_PLAYER_ID_LEN
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
        if ok && id != SYSTEM_ACTOR {
            Ok(PlayerId(id))
        } else {
            Err(IdError::InvalidPlayerId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PlayerId {
    type Error = IdError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        PlayerId::new(value)
    }
}

impl From<PlayerId> for String {
    fn from(id: PlayerId) -> Self {
        id.0
    }
}

impl FromStr for PlayerId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlayerId::new(s)
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(String);

impl RoomId {
    pub fn new(id: impl Into<String>) -> Self {
        RoomId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GameType {
    #[serde(rename = "MIBOARD")]
    MiBoard,
    #[serde(rename = "SHOWDOWN")]
    Showdown,
}

impl GameType {
    pub fn as_str(self) -> &'static str {
        match self {
            GameType::MiBoard => "MIBOARD",
            GameType::Showdown => "SHOWDOWN",
        }
    }

    pub fn min_players(self) -> usize {
        match self {
            GameType::MiBoard => 3,
            GameType::Showdown => 2,
        }
    }

    pub fn max_players(self) -> usize {
        match self {
            GameType::MiBoard => 4,
            GameType::Showdown => 2,
        }
    }
}

impl FromStr for GameType {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MIBOARD" => Ok(GameType::MiBoard),
            "SHOWDOWN" => Ok(GameType::Showdown),
            _ => Err(IdError::UnknownGameType(s.to_string())),
        }
    }
}

impl fmt::Display for GameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const SYSTEM_ACTOR: &str = "SYSTEM";

/// Who caused a transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Actor {
    Player(PlayerId),
    System,
}

impl Actor {
    pub fn as_str(&self) -> &str {
        match self {
            Actor::Player(p) => p.as_str(),
            Actor::System => SYSTEM_ACTOR,
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
