//! Zones, rooms and first-fit matchmaking.
//!
//! A zone keeps its rooms in creation order. Joining picks the earliest room
//! of the requested game type that has not started and still has a free
//! seat; otherwise a new room is created. Starting a room locks it.

use serde::Serialize;
use thiserror::Error;

use crate::types::{GameType, PlayerId, RoomId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LobbyError {
    #[error("player {0} is already in room {1}")]
    AlreadyInRoom(PlayerId, RoomId),
    #[error("room {0} has already started")]
    AlreadyStarted(RoomId),
    #[error("player {0} is not in room {1}")]
    NotInRoom(PlayerId, RoomId),
    #[error("no room {0}")]
    UnknownRoom(RoomId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Room {
    pub id: RoomId,
    pub game_type: GameType,
    /// Join order.
    pub players: Vec<PlayerId>,
    pub started: bool,
    pub min_players: usize,
    pub max_players: usize,
    /// 1-based creation counter within the zone.
    pub number: u64,
}

impl Room {
    fn new(number: u64, game_type: GameType) -> Room {
        Room {
            id: RoomId::new(format!("room-{number}")),
            game_type,
            players: Vec::new(),
            started: false,
            min_players: game_type.min_players(),
            max_players: game_type.max_players(),
            number,
        }
    }

    pub fn is_open(&self) -> bool {
        !self.started && self.players.len() < self.max_players
    }

    pub fn is_full(&self) -> bool {
        self.players.len() >= self.max_players
    }

    pub fn can_start(&self) -> bool {
        !self.started && self.players.len() >= self.min_players
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeaveOutcome {
    /// Removed from an unstarted room that still has players.
    Left,
    /// The unstarted room became empty and was deleted.
    RoomDeleted,
    /// The room has started; the game engine must handle the departure.
    DelegatedToEngine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Zone {
    pub name: String,
    rooms: Vec<Room>,
    rooms_created: u64,
}

impl Zone {
    pub fn new(name: impl Into<String>) -> Zone {
        Zone {
            name: name.into(),
            rooms: Vec::new(),
            rooms_created: 0,
        }
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn room(&self, id: &RoomId) -> Option<&Room> {
        self.rooms.iter().find(|r| &r.id == id)
    }

    fn room_mut(&mut self, id: &RoomId) -> Result<&mut Room, LobbyError> {
        self.rooms
            .iter_mut()
            .find(|r| &r.id == id)
            .ok_or_else(|| LobbyError::UnknownRoom(id.clone()))
    }

    pub fn room_of(&self, player: &PlayerId) -> Option<&Room> {
        self.rooms.iter().find(|r| r.players.contains(player))
    }

    pub fn find_or_create_room(&mut self, game_type: GameType, player: PlayerId) -> Result<RoomId, LobbyError> {
        if let Some(room) = self.room_of(&player) {
            return Err(LobbyError::AlreadyInRoom(player, room.id.clone()));
        }
        let index = match self.rooms.iter().position(|r| r.game_type == game_type && r.is_open()) {
            Some(i) => i,
            None => {
                self.rooms_created += 1;
                self.rooms.push(Room::new(self.rooms_created, game_type));
                self.rooms.len() - 1
            }
        };
        let room = &mut self.rooms[index];
        room.players.push(player);
        Ok(room.id.clone())
    }

    /// Starts the room when it has enough players. Returns whether it started.
    pub fn try_start(&mut self, id: &RoomId) -> Result<bool, LobbyError> {
        let room = self.room_mut(id)?;
        if room.started {
            return Err(LobbyError::AlreadyStarted(id.clone()));
        }
        if room.players.len() >= room.min_players {
            room.started = true;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn leave_room(&mut self, id: &RoomId, player: &PlayerId) -> Result<LeaveOutcome, LobbyError> {
        let room = self.room_mut(id)?;
        let pos = room
            .players
            .iter()
            .position(|p| p == player)
            .ok_or_else(|| LobbyError::NotInRoom(player.clone(), id.clone()))?;
        room.players.remove(pos);
        if room.started {
            return Ok(LeaveOutcome::DelegatedToEngine);
        }
        if room.players.is_empty() {
            self.rooms.retain(|r| &r.id != id);
            return Ok(LeaveOutcome::RoomDeleted);
        }
        Ok(LeaveOutcome::Left)
    }

    /// Removes a room whose game has ended, releasing its players.
    pub fn close_room(&mut self, id: &RoomId) -> Option<Room> {
        let pos = self.rooms.iter().position(|r| &r.id == id)?;
        Some(self.rooms.remove(pos))
    }
}
