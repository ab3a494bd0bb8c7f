//! Pieces shared by the two game engines.
//!
//! Both engines are event-sourced. A request is validated against the current
//! state and turned into a list of broadcast control messages; each message is
//! applied to the state through the same `apply` entry point a passive replica
//! uses. The authoritative engine and a replica fed its broadcasts therefore
//! walk through identical states.

use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::config::Config;
use crate::content::Content;
use crate::evaluator::Scorer;
use crate::miboard::{MiBoardAction, MiBoardEngine};
use crate::protocol::{ControlMessage, Opcode};
use crate::showdown::{ShowdownAction, ShowdownEngine};
use crate::types::{GameType, PlayerId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("action not allowed in phase {0}")]
    WrongPhase(&'static str),
    #[error("only the Reader may do that")]
    NotReader,
    #[error("only a Guesser may do that")]
    NotGuesser,
    #[error("self-explanation is empty")]
    EmptySe,
    #[error("identification already submitted this turn")]
    DuplicateIdent,
    #[error("self-explanation already submitted this round")]
    DuplicateSubmission,
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("reason `{reason}` does not belong to strategy `{strategy}`")]
    InvalidReason { strategy: String, reason: String },
    #[error("highlight [{start}, {end}) is not a non-empty span of a {len}-character text")]
    InvalidHighlight { start: usize, end: usize, len: usize },
    #[error("`{0}` is not the strategy on the drawn card")]
    NotDrawnStrategy(String),
    #[error("the game is finished")]
    GameFinished,
    #[error("player {0} is not active in this game")]
    NotActive(String),
    #[error("expected {expected} players, got {got}")]
    WrongPlayerCount { expected: String, got: usize },
    #[error("text has no target sentences")]
    EmptyText,
    #[error("unknown text `{0}`")]
    UnknownText(String),
    #[error("timer epoch {got} is stale (current {current})")]
    StaleTimer { got: u64, current: u64 },
    #[error("unsupported request: {0}")]
    BadRequest(String),
    #[error("malformed event {opcode}: {detail}")]
    MalformedEvent { opcode: &'static str, detail: String },
    #[error("replica out of sync: {0}")]
    Desync(String),
}

impl GameError {
    /// Stable code used in `ERROR` frames.
    pub fn code(&self) -> &'static str {
        match self {
            GameError::WrongPhase(_) => "WRONG_PHASE",
            GameError::NotReader => "NOT_READER",
            GameError::NotGuesser => "NOT_GUESSER",
            GameError::EmptySe => "EMPTY_SE",
            GameError::DuplicateIdent => "DUPLICATE_IDENT",
            GameError::DuplicateSubmission => "DUPLICATE_SUBMISSION",
            GameError::UnknownStrategy(_) => "UNKNOWN_STRATEGY",
            GameError::InvalidReason { .. } => "INVALID_REASON",
            GameError::InvalidHighlight { .. } => "INVALID_HIGHLIGHT",
            GameError::NotDrawnStrategy(_) => "NOT_DRAWN_STRATEGY",
            GameError::GameFinished => "GAME_FINISHED",
            GameError::NotActive(_) => "NOT_ACTIVE",
            GameError::WrongPlayerCount { .. } => "WRONG_PLAYER_COUNT",
            GameError::EmptyText => "EMPTY_TEXT",
            GameError::UnknownText(_) => "UNKNOWN_TEXT",
            GameError::StaleTimer { .. } => "STALE_TIMER",
            GameError::BadRequest(_) => "BAD_REQUEST",
            GameError::MalformedEvent { .. } => "MALFORMED_EVENT",
            GameError::Desync(_) => "DESYNC",
        }
    }
}

/// The timer currently running in a game. A timeout is only accepted when it
/// quotes the current epoch, so a timer that raced with a player action is
/// dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveTimer {
    pub phase: &'static str,
    pub epoch: u64,
    pub secs: u32,
}

pub(crate) const TIMER_START: &str = "START";
pub(crate) const TIMER_EXPIRED: &str = "EXPIRED";
pub(crate) const TIMER_ACK: &str = "ACK";

pub(crate) fn timer_start(phase: &str, secs: u32) -> ControlMessage {
    ControlMessage::new(
        Opcode::TimerTick,
        [phase.to_string(), TIMER_START.into(), secs.to_string()],
    )
}

pub(crate) fn timer_expired(phase: &str) -> ControlMessage {
    ControlMessage::new(Opcode::TimerTick, [phase, TIMER_EXPIRED])
}

/// Positional field access for applying broadcast events.
pub(crate) struct Fields<'a> {
    msg: &'a ControlMessage,
    opcode: &'static str,
}

impl<'a> Fields<'a> {
    pub(crate) fn of(msg: &'a ControlMessage) -> Self {
        Fields {
            msg,
            opcode: msg.opcode.as_str(),
        }
    }

    pub(crate) fn malformed(&self, detail: impl Into<String>) -> GameError {
        GameError::MalformedEvent {
            opcode: self.opcode,
            detail: detail.into(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.msg.fields.len()
    }

    pub(crate) fn expect_len(&self, n: usize) -> Result<(), GameError> {
        if self.len() == n {
            Ok(())
        } else {
            Err(self.malformed(format!("expected {n} fields, got {}", self.len())))
        }
    }

    pub(crate) fn expect_min_len(&self, n: usize) -> Result<(), GameError> {
        if self.len() >= n {
            Ok(())
        } else {
            Err(self.malformed(format!("expected at least {n} fields, got {}", self.len())))
        }
    }

    pub(crate) fn str(&self, i: usize) -> Result<&'a str, GameError> {
        self.msg
            .field(i)
            .ok_or_else(|| self.malformed(format!("missing field {i}")))
    }

    pub(crate) fn parse<T: FromStr>(&self, i: usize) -> Result<T, GameError> {
        let raw = self.str(i)?;
        raw.parse()
            .map_err(|_| self.malformed(format!("field {i} `{raw}` does not parse")))
    }

    pub(crate) fn player(&self, i: usize) -> Result<PlayerId, GameError> {
        self.parse(i)
    }
}

/// Checks a replica's own draw against the value the authority broadcast.
pub(crate) fn check_draw<T: PartialEq + std::fmt::Debug>(what: &str, local: T, broadcast: T) -> Result<(), GameError> {
    if local == broadcast {
        Ok(())
    } else {
        Err(GameError::Desync(format!(
            "{what}: local draw {local:?} but broadcast {broadcast:?}"
        )))
    }
}

/// Either engine behind one interface, for code that hosts rooms of both kinds.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Game {
    MiBoard(MiBoardEngine),
    Showdown(ShowdownEngine),
}

impl Game {
    /// Starts an authoritative game and returns its opening broadcasts.
    pub fn start(
        game_type: GameType,
        config: &Config,
        content: Arc<Content>,
        scorer: Arc<dyn Scorer>,
        text_id: &str,
        seed: u64,
        players: &[PlayerId],
    ) -> Result<(Game, Vec<ControlMessage>), GameError> {
        match game_type {
            GameType::MiBoard => MiBoardEngine::start(config.miboard.clone(), content, text_id, seed, players)
                .map(|(e, ev)| (Game::MiBoard(e), ev)),
            GameType::Showdown => {
                ShowdownEngine::start(config.showdown.clone(), content, scorer, text_id, seed, players)
                    .map(|(e, ev)| (Game::Showdown(e), ev))
            }
        }
    }

    /// A passive replica built from a `START` broadcast.
    pub fn replica(config: &Config, content: Arc<Content>, start: &ControlMessage) -> Result<Game, GameError> {
        let kind: GameType = Fields::of(start).parse(0)?;
        match kind {
            GameType::MiBoard => MiBoardEngine::replica(config.miboard.clone(), content, start).map(Game::MiBoard),
            GameType::Showdown => ShowdownEngine::replica(config.showdown.clone(), content, start).map(Game::Showdown),
        }
    }

    pub fn game_type(&self) -> GameType {
        match self {
            Game::MiBoard(_) => GameType::MiBoard,
            Game::Showdown(_) => GameType::Showdown,
        }
    }

    /// Parses and runs a client request.
    pub fn request(&mut self, player: &PlayerId, msg: &ControlMessage) -> Result<Vec<ControlMessage>, GameError> {
        match self {
            Game::MiBoard(e) => {
                let action = MiBoardAction::from_request(player, msg)?;
                e.step(action)
            }
            Game::Showdown(e) => {
                let action = ShowdownAction::from_request(player, msg)?;
                e.step(action)
            }
        }
    }

    pub fn timeout(&mut self, epoch: u64) -> Result<Vec<ControlMessage>, GameError> {
        match self {
            Game::MiBoard(e) => e.step(MiBoardAction::Timeout(epoch)),
            Game::Showdown(e) => e.step(ShowdownAction::Timeout(epoch)),
        }
    }

    pub fn leave(&mut self, players: Vec<PlayerId>) -> Result<Vec<ControlMessage>, GameError> {
        match self {
            Game::MiBoard(e) => e.step(MiBoardAction::Leave(players)),
            Game::Showdown(e) => e.step(ShowdownAction::Leave(players)),
        }
    }

    pub fn apply(&mut self, msg: &ControlMessage) -> Result<(), GameError> {
        match self {
            Game::MiBoard(e) => e.apply(msg),
            Game::Showdown(e) => e.apply(msg),
        }
    }

    pub fn timer(&self) -> Option<ActiveTimer> {
        match self {
            Game::MiBoard(e) => e.timer(),
            Game::Showdown(e) => e.timer(),
        }
    }

    pub fn is_finished(&self) -> bool {
        match self {
            Game::MiBoard(e) => e.state().is_finished(),
            Game::Showdown(e) => e.state().is_finished(),
        }
    }

    pub fn has_available_action(&self, player: &PlayerId) -> bool {
        match self {
            Game::MiBoard(e) => e.state().has_available_action(player),
            Game::Showdown(e) => e.state().has_available_action(player),
        }
    }

    /// Current MiBoard turn or Showdown round number.
    pub fn period(&self) -> u32 {
        match self {
            Game::MiBoard(e) => e.state().turn_no,
            Game::Showdown(e) => e.state().round_no,
        }
    }

    /// Full MiBoard rounds (every active player has read once) or Showdown
    /// rounds played to a result.
    pub fn rounds_completed(&self) -> u32 {
        match self {
            Game::MiBoard(e) => e.state().rounds_completed,
            Game::Showdown(e) => e.state().history.len() as u32,
        }
    }

    /// Players still in the game, in join order.
    pub fn active_players(&self) -> Vec<PlayerId> {
        match self {
            Game::MiBoard(e) => e
                .state()
                .players
                .iter()
                .filter(|p| p.active)
                .map(|p| p.id.clone())
                .collect(),
            Game::Showdown(e) => e
                .state()
                .players
                .iter()
                .filter(|p| p.active)
                .map(|p| p.id.clone())
                .collect(),
        }
    }

    /// All players the game started with, in join order.
    pub fn players(&self) -> Vec<PlayerId> {
        match self {
            Game::MiBoard(e) => e.state().players.iter().map(|p| p.id.clone()).collect(),
            Game::Showdown(e) => e.state().players.iter().map(|p| p.id.clone()).collect(),
        }
    }

    /// Name of the current phase.
    pub fn phase(&self) -> &'static str {
        match self {
            Game::MiBoard(e) => e.state().phase.as_str(),
            Game::Showdown(e) => e.state().phase.as_str(),
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        match self {
            Game::MiBoard(e) => e.state().check_invariants(),
            Game::Showdown(e) => e.state().check_invariants(),
        }
    }

    /// Canonical serialization of the state, for bit-level comparisons.
    pub fn state_json(&self) -> String {
        match self {
            Game::MiBoard(e) => serde_json::to_string(e.state()),
            Game::Showdown(e) => serde_json::to_string(e.state()),
        }
        .expect("state serializes")
    }
}
