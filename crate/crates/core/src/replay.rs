//! Rebuilds games from the event log.
//!
//! A room's records are fed one at a time to a passive replica. Lobby traffic
//! (`JOIN`, `CHAT`, lobby-time `LEAVE`) is skipped; everything from `START`
//! onward is applied exactly as the clients received it.

use std::sync::Arc;

use thiserror::Error;

use crate::config::Config;
use crate::content::Content;
use crate::event_log::{LogRecord, CHAT_OPCODE};
use crate::game::{Game, GameError};
use crate::protocol::{ControlMessage, Message, Opcode, ProtocolError};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("record {seq}: {source}")]
    Protocol { seq: u64, source: ProtocolError },
    #[error("record {seq}: {source}")]
    Game { seq: u64, source: GameError },
    #[error("record {seq} has sequence number out of order (expected {expected})")]
    OutOfOrder { seq: u64, expected: u64 },
    #[error("the log contains no START record")]
    NotStarted,
}

/// A replica advanced record by record.
#[derive(Debug)]
pub struct Replayer {
    config: Config,
    content: Arc<Content>,
    game: Option<Game>,
    next_seq: u64,
}

impl Replayer {
    pub fn new(config: Config, content: Arc<Content>) -> Replayer {
        Replayer {
            config,
            content,
            game: None,
            next_seq: 1,
        }
    }

    pub fn game(&self) -> Option<&Game> {
        self.game.as_ref()
    }

    /// Applies one record. Returns `true` if it changed the game.
    pub fn feed(&mut self, record: &LogRecord) -> Result<bool, ReplayError> {
        let seq = record.seq;
        if seq != self.next_seq {
            return Err(ReplayError::OutOfOrder {
                seq,
                expected: self.next_seq,
            });
        }
        self.next_seq += 1;
        if record.opcode == CHAT_OPCODE {
            return Ok(false);
        }
        let msg = match record
            .message()
            .map_err(|source| ReplayError::Protocol { seq, source })?
        {
            Message::Control(c) => c,
            Message::Chat(_) => return Ok(false),
        };
        match (&mut self.game, msg.opcode) {
            (None, Opcode::Start) => {
                let game = Game::replica(&self.config, self.content.clone(), &msg)
                    .map_err(|source| ReplayError::Game { seq, source })?;
                self.game = Some(game);
                Ok(true)
            }
            (None, _) => Ok(false),
            (Some(_), Opcode::Join) => Ok(false),
            (Some(game), _) => {
                game.apply(&msg).map_err(|source| ReplayError::Game { seq, source })?;
                Ok(true)
            }
        }
    }

    pub fn finish(self) -> Result<Game, ReplayError> {
        self.game.ok_or(ReplayError::NotStarted)
    }
}

/// Replays a whole room and returns the final game.
pub fn replay_room(config: &Config, content: Arc<Content>, records: &[LogRecord]) -> Result<Game, ReplayError> {
    let mut r = Replayer::new(config.clone(), content);
    for rec in records {
        r.feed(rec)?;
    }
    r.finish()
}

/// The control messages a room broadcast from `START` on, in order.
pub fn game_events(records: &[LogRecord]) -> Result<Vec<ControlMessage>, ReplayError> {
    let mut out = Vec::new();
    for rec in records {
        if rec.opcode == CHAT_OPCODE {
            continue;
        }
        if let Message::Control(c) = rec
            .message()
            .map_err(|source| ReplayError::Protocol { seq: rec.seq, source })?
        {
            if (c.opcode == Opcode::Start || !out.is_empty()) && c.opcode != Opcode::Join {
                out.push(c);
            }
        }
    }
    Ok(out)
}
