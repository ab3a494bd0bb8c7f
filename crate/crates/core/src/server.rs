//! Transport-free game server.
//!
//! The server owns the zone, every room's game and the event log. It is
//! driven entirely by calls: connections open and close, frames arrive, and
//! the clock advances. Each call returns the frames to deliver. Time is an
//! input (milliseconds), so the same server runs under a wall clock in the
//! network front end and under a simulated clock in the bot harness.
//!
//! Every game transition is computed on a copy of the room's engine, written
//! to the log, and only then committed and broadcast. If the log write fails
//! the room pauses: players get `ERROR|LOG_UNAVAILABLE`, and timer-driven
//! transitions retry every second until the log accepts them.
//!
//! A connection's first frame must be `JOIN|<player>|<MIBOARD|SHOWDOWN>`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use crate::config::Config;
use crate::content::Content;
use crate::evaluator::Scorer;
use crate::event_log::{EventLog, LogError, LogRecord, CHAT_OPCODE};
use crate::game::{Game, GameError};
use crate::lobby::{LeaveOutcome, Zone};
use crate::protocol::{decode_frame, encode_chat, encode_control, ChatMessage, ControlMessage, Frame, Message, Opcode};
use crate::rng::derive_seed;
use crate::types::{Actor, GameType, PlayerId, RoomId};

pub type ConnId = u64;

/// Retry interval for transitions the log refused.
pub const LOG_RETRY_MS: u64 = 1_000;

/// How many finished games stay inspectable after their rooms close.
pub const FINISHED_GAMES_KEPT: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub conn: ConnId,
    pub frame: Frame,
}

#[derive(Debug, Default)]
struct Conn {
    player: Option<PlayerId>,
    room: Option<RoomId>,
}

#[derive(Debug)]
struct RoomRuntime {
    game_type: GameType,
    number: u64,
    game: Option<Game>,
    /// `(epoch, due_ms)` of the running phase timer.
    timer: Option<(u64, u64)>,
    /// When to attempt starting the game.
    start_at: Option<u64>,
    /// Departures the engine has not yet recorded because the log was down.
    pending_leaves: Vec<PlayerId>,
    retry_at: Option<u64>,
    paused: bool,
    /// Showdown submissions shown only to their author until composing
    /// closes, as `(author connection, frame)`.
    sealed: Vec<(Option<ConnId>, Frame)>,
}

enum Due {
    Timer(RoomId, u64),
    Start(RoomId),
    Retry(RoomId),
}

pub struct Server {
    config: Config,
    content: Arc<Content>,
    scorer: Arc<dyn Scorer>,
    zone: Zone,
    log: EventLog,
    conns: BTreeMap<ConnId, Conn>,
    players: HashMap<PlayerId, ConnId>,
    rooms: BTreeMap<RoomId, RoomRuntime>,
    next_conn: ConnId,
    finished: VecDeque<(RoomId, Game)>,
    /// Every phase duration scheduled so far, in seconds, by game type.
    scheduled: Vec<(GameType, &'static str, u32)>,
}

impl std::fmt::Debug for Server {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Server")
            .field("conns", &self.conns.len())
            .field("rooms", &self.rooms.len())
            .finish_non_exhaustive()
    }
}

fn error_frame(code: &str, detail: impl Into<String>) -> Frame {
    encode_control(&ControlMessage::new(Opcode::Error, [code.to_string(), detail.into()]))
}

impl Server {
    pub fn new(config: Config, content: Arc<Content>, scorer: Arc<dyn Scorer>, log: EventLog) -> Server {
        Server {
            zone: Zone::new(config.server.zone.clone()),
            config,
            content,
            scorer,
            log,
            conns: BTreeMap::new(),
            players: HashMap::new(),
            rooms: BTreeMap::new(),
            next_conn: 1,
            finished: VecDeque::new(),
            scheduled: Vec::new(),
        }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn content(&self) -> &Arc<Content> {
        &self.content
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn zone(&self) -> &Zone {
        &self.zone
    }

    /// The live game in `room`, if it has started and not yet closed.
    pub fn game(&self, room: &RoomId) -> Option<&Game> {
        self.rooms.get(room).and_then(|r| r.game.as_ref())
    }

    /// Final authoritative state of a recently finished game.
    pub fn finished_game(&self, room: &RoomId) -> Option<&Game> {
        self.finished.iter().find(|(r, _)| r == room).map(|(_, g)| g)
    }

    pub fn is_paused(&self, room: &RoomId) -> bool {
        self.rooms.get(room).is_some_and(|r| r.paused)
    }

    pub fn room_of(&self, player: &PlayerId) -> Option<&RoomId> {
        let conn = self.players.get(player)?;
        self.conns.get(conn)?.room.as_ref()
    }

    /// Phase durations scheduled so far, as `(game, phase, seconds)`.
    pub fn scheduled_durations(&self) -> &[(GameType, &'static str, u32)] {
        &self.scheduled
    }

    pub fn connect(&mut self) -> ConnId {
        let id = self.next_conn;
        self.next_conn += 1;
        self.conns.insert(id, Conn::default());
        id
    }

    /// Earliest time at which [`Server::advance_to`] has work to do.
    pub fn next_deadline(&self) -> Option<u64> {
        self.rooms
            .values()
            .flat_map(|r| [r.timer.map(|(_, at)| at), r.start_at, r.retry_at])
            .flatten()
            .min()
    }

    pub fn handle_frame(&mut self, now: u64, conn: ConnId, line: &str) -> Vec<Outgoing> {
        let mut out = Vec::new();
        if !self.conns.contains_key(&conn) {
            return out;
        }
        let msg = match decode_frame(line) {
            Ok(m) => m,
            Err(e) => {
                out.push(Outgoing {
                    conn,
                    frame: error_frame("PROTOCOL", e.to_string()),
                });
                return out;
            }
        };
        let conn_state = &self.conns[&conn];
        let player = conn_state.player.clone();
        let room = conn_state.room.clone();
        match (msg, player, room) {
            (Message::Control(c), _, None) if c.opcode == Opcode::Join => self.join(now, conn, &c, &mut out),
            (_, _, None) => out.push(Outgoing {
                conn,
                frame: error_frame("NOT_IN_ROOM", "send JOIN|<player>|<game type> first"),
            }),
            (Message::Chat(chat), Some(p), Some(room)) => self.chat(now, conn, &p, &room, chat, &mut out),
            (Message::Control(c), Some(p), Some(room)) => {
                if c.opcode == Opcode::Leave {
                    self.leave(now, &[(p, room)], &mut out, true);
                } else {
                    self.game_request(now, conn, &p, &room, &c, &mut out);
                }
            }
            (_, None, Some(_)) => unreachable!("a connection only enters a room after naming its player"),
        }
        out
    }

    /// Connections that dropped together, for example when a process dies.
    pub fn disconnect(&mut self, now: u64, conns: &[ConnId]) -> Vec<Outgoing> {
        let mut out = Vec::new();
        let mut leaving = Vec::new();
        for c in conns {
            if let Some(conn) = self.conns.remove(c) {
                if let Some(p) = conn.player {
                    self.players.remove(&p);
                    if let Some(room) = conn.room {
                        leaving.push((p, room));
                    }
                }
            }
        }
        self.leave(now, &leaving, &mut out, false);
        out
    }

    /// Fires every deadline up to and including `now`, each at its own time.
    pub fn advance_to(&mut self, now: u64) -> Vec<Outgoing> {
        let mut out = Vec::new();
        while let Some((at, due)) = self.earliest_due() {
            if at > now {
                break;
            }
            match due {
                Due::Timer(room, epoch) => self.fire_timer(at, &room, epoch, &mut out),
                Due::Start(room) => self.start_room(at, &room, &mut out),
                Due::Retry(room) => self.retry_leaves(at, &room, &mut out),
            }
        }
        out
    }

    fn earliest_due(&self) -> Option<(u64, Due)> {
        let mut best: Option<(u64, Due)> = None;
        for (id, r) in &self.rooms {
            let candidates = [
                r.start_at.map(|at| (at, Due::Start(id.clone()))),
                r.retry_at.map(|at| (at, Due::Retry(id.clone()))),
                r.timer.map(|(epoch, at)| (at, Due::Timer(id.clone(), epoch))),
            ];
            for (at, due) in candidates.into_iter().flatten() {
                if best.as_ref().is_none_or(|(b, _)| at < *b) {
                    best = Some((at, due));
                }
            }
        }
        best
    }

    fn members(&self, room: &RoomId) -> Vec<ConnId> {
        self.zone
            .room(room)
            .map(|r| r.players.iter().filter_map(|p| self.players.get(p).copied()).collect())
            .unwrap_or_default()
    }

    fn broadcast(&self, to: &[ConnId], frame: &Frame, out: &mut Vec<Outgoing>) {
        for &conn in to {
            out.push(Outgoing {
                conn,
                frame: frame.clone(),
            });
        }
    }

    fn record(&self, room: &RoomId, now: u64, actor: &Actor, seq: u64, opcode: &str, fields: Vec<String>) -> LogRecord {
        LogRecord {
            seq,
            wall_time_ms: now as i64,
            room_id: room.clone(),
            actor: actor.to_string(),
            opcode: opcode.to_string(),
            fields,
        }
    }

    /// Writes control events for `room` to the log.
    fn log_events(
        &mut self,
        room: &RoomId,
        now: u64,
        actor: &Actor,
        events: &[ControlMessage],
    ) -> Result<(), LogError> {
        let first = self.log.next_seq(room);
        let records = events
            .iter()
            .enumerate()
            .map(|(i, e)| self.record(room, now, actor, first + i as u64, e.opcode.as_str(), e.fields.clone()))
            .collect();
        self.log.append_batch(records)
    }

    fn log_failed(&mut self, room: &RoomId, err: &LogError, out: &mut Vec<Outgoing>) {
        tracing::error!(%room, %err, "event log append failed; pausing room");
        if let Some(r) = self.rooms.get_mut(room) {
            r.paused = true;
        }
        let frame = error_frame("LOG_UNAVAILABLE", err.to_string());
        let members = self.members(room);
        self.broadcast(&members, &frame, out);
    }

    fn join(&mut self, now: u64, conn: ConnId, msg: &ControlMessage, out: &mut Vec<Outgoing>) {
        let reply = |out: &mut Vec<Outgoing>, code: &str, detail: String| {
            out.push(Outgoing {
                conn,
                frame: error_frame(code, detail),
            })
        };
        let (player, game_type) = match (msg.field(0), msg.field(1), msg.fields.len()) {
            (Some(p), Some(g), 2) => match (p.parse::<PlayerId>(), g.parse::<GameType>()) {
                (Ok(p), Ok(g)) => (p, g),
                (Err(e), _) => return reply(out, "BAD_JOIN", e.to_string()),
                (_, Err(e)) => return reply(out, "BAD_JOIN", e.to_string()),
            },
            _ => return reply(out, "BAD_JOIN", "expected JOIN|<player>|<game type>".into()),
        };
        let bound = self.conns[&conn].player.clone();
        if bound.as_ref().is_some_and(|b| b != &player) {
            return reply(out, "BAD_JOIN", format!("this connection plays as {}", bound.unwrap()));
        }
        if bound.is_none() && self.players.contains_key(&player) {
            return reply(out, "NAME_TAKEN", player.to_string());
        }
        let mut zone = self.zone.clone();
        let room = match zone.find_or_create_room(game_type, player.clone()) {
            Ok(r) => r,
            Err(e) => return reply(out, "BAD_JOIN", e.to_string()),
        };
        let joined = ControlMessage::new(Opcode::Join, [room.to_string(), player.to_string()]);
        if let Err(e) = self.log_events(
            &room,
            now,
            &Actor::Player(player.clone()),
            std::slice::from_ref(&joined),
        ) {
            return reply(out, "LOG_UNAVAILABLE", e.to_string());
        }
        self.zone = zone;
        let info = self.zone.room(&room).expect("just joined").clone();
        self.rooms.entry(room.clone()).or_insert_with(|| RoomRuntime {
            game_type,
            number: info.number,
            game: None,
            timer: None,
            start_at: None,
            pending_leaves: Vec::new(),
            retry_at: None,
            paused: false,
            sealed: Vec::new(),
        });
        let c = self.conns.get_mut(&conn).expect("checked");
        c.player = Some(player.clone());
        c.room = Some(room.clone());
        self.players.insert(player.clone(), conn);

        for other in info.players.iter().filter(|p| **p != player) {
            let f = encode_control(&ControlMessage::new(
                Opcode::Join,
                [room.to_string(), other.to_string()],
            ));
            out.push(Outgoing { conn, frame: f });
        }
        let members = self.members(&room);
        self.broadcast(&members, &encode_control(&joined), out);

        let n = info.players.len();
        let rt = self.rooms.get_mut(&room).expect("inserted");
        if n >= info.max_players {
            rt.start_at = Some(now);
        } else if n >= info.min_players && rt.start_at.is_none() {
            let wait = u64::from(self.config.lobby.miboard_fill_timeout_secs) * 1000;
            rt.start_at = Some(now + wait);
        }
        if rt.start_at == Some(now) {
            self.start_room(now, &room, out);
        }
    }

    fn start_room(&mut self, now: u64, room: &RoomId, out: &mut Vec<Outgoing>) {
        let Some(info) = self.zone.room(room).cloned() else {
            self.rooms.remove(room);
            return;
        };
        let rt = self.rooms.get_mut(room).expect("runtime exists for zone room");
        rt.start_at = None;
        if info.started || !info.can_start() {
            return;
        }
        let texts = &self.content.texts;
        let text_id = texts[(rt.number as usize - 1) % texts.len()].id.clone();
        let seed = derive_seed(self.config.server.seed, rt.number);
        let started = Game::start(
            rt.game_type,
            &self.config,
            self.content.clone(),
            self.scorer.clone(),
            &text_id,
            seed,
            &info.players,
        );
        let (game, events) = match started {
            Ok(v) => v,
            Err(e) => {
                tracing::error!(%room, %e, "game failed to start");
                let members = self.members(room);
                self.broadcast(&members, &error_frame(e.code(), e.to_string()), out);
                return;
            }
        };
        if let Err(e) = self.log_events(room, now, &Actor::System, &events) {
            self.rooms.get_mut(room).expect("exists").start_at = Some(now + LOG_RETRY_MS);
            return self.log_failed(room, &e, out);
        }
        self.zone.try_start(room).expect("room checked startable");
        self.rooms.get_mut(room).expect("exists").game = Some(game);
        self.commit_broadcast(now, room, &events, out);
    }

    /// After a successful log write: reschedule timers, broadcast, close
    /// finished rooms.
    ///
    /// While a Showdown round is still composing, each `SE_SUBMIT` goes to its
    /// author alone. The held frames reach the other members at the start of
    /// the first batch committed after composing ends, so every stream still
    /// follows log order. Returns how many of the pushed frames were released
    /// held frames.
    fn commit_broadcast(
        &mut self,
        now: u64,
        room: &RoomId,
        events: &[ControlMessage],
        out: &mut Vec<Outgoing>,
    ) -> usize {
        let members = self.members(room);
        let rt = self.rooms.get_mut(room).expect("exists");
        let composing = rt
            .game
            .as_ref()
            .is_some_and(|g| g.game_type() == GameType::Showdown && g.phase() == "COMPOSING");
        let mut released = 0;
        if !composing {
            for (author, frame) in std::mem::take(&mut rt.sealed) {
                for &c in members.iter().filter(|&&c| Some(c) != author) {
                    out.push(Outgoing {
                        conn: c,
                        frame: frame.clone(),
                    });
                    released += 1;
                }
            }
        }
        for e in events {
            let frame = encode_control(e);
            if composing && e.opcode == Opcode::SeSubmit {
                let author = e
                    .field(0)
                    .and_then(|p| PlayerId::new(p).ok())
                    .and_then(|p| self.players.get(&p).copied());
                if let Some(c) = author {
                    out.push(Outgoing {
                        conn: c,
                        frame: frame.clone(),
                    });
                }
                self.rooms.get_mut(room).expect("exists").sealed.push((author, frame));
            } else {
                self.broadcast(&members, &frame, out);
            }
        }
        let rt = self.rooms.get_mut(room).expect("exists");
        rt.paused = false;
        let game = rt.game.as_ref().expect("started");
        match game.timer() {
            Some(t) if rt.timer.map(|(epoch, _)| epoch) != Some(t.epoch) => {
                rt.timer = Some((t.epoch, now + u64::from(t.secs) * 1000));
                self.scheduled.push((rt.game_type, t.phase, t.secs));
            }
            Some(_) => {}
            None => rt.timer = None,
        }
        if game.is_finished() {
            self.close_room(room);
        }
        released
    }

    fn close_room(&mut self, room: &RoomId) {
        if let Some(info) = self.zone.close_room(room) {
            for p in info.players {
                if let Some(c) = self.players.get(&p).and_then(|c| self.conns.get_mut(c)) {
                    c.room = None;
                }
            }
        }
        if let Some(game) = self.rooms.remove(room).and_then(|rt| rt.game) {
            if self.finished.len() == FINISHED_GAMES_KEPT {
                self.finished.pop_front();
            }
            self.finished.push_back((room.clone(), game));
        }
    }

    /// Runs `f` against a copy of the room's game and commits it if the log
    /// accepts the resulting events.
    fn transact(
        &mut self,
        now: u64,
        room: &RoomId,
        actor: &Actor,
        f: impl FnOnce(&mut Game) -> Result<Vec<ControlMessage>, GameError>,
        out: &mut Vec<Outgoing>,
    ) -> Result<usize, TransactError> {
        let Some(game) = self.rooms.get(room).and_then(|r| r.game.as_ref()) else {
            return Err(TransactError::Game(GameError::WrongPhase("LOBBY")));
        };
        let mut next = game.clone();
        let events = f(&mut next).map_err(TransactError::Game)?;
        if let Err(e) = self.log_events(room, now, actor, &events) {
            self.log_failed(room, &e, out);
            return Err(TransactError::Log);
        }
        self.rooms.get_mut(room).expect("exists").game = Some(next);
        Ok(self.commit_broadcast(now, room, &events, out))
    }

    fn game_request(
        &mut self,
        now: u64,
        conn: ConnId,
        player: &PlayerId,
        room: &RoomId,
        msg: &ControlMessage,
        out: &mut Vec<Outgoing>,
    ) {
        if self.game(room).is_none() {
            out.push(Outgoing {
                conn,
                frame: error_frame("NOT_STARTED", "the game has not started"),
            });
            return;
        }
        let actor = Actor::Player(player.clone());
        match self.transact(now, room, &actor, |g| g.request(player, msg), out) {
            Ok(_) => {}
            Err(TransactError::Game(e)) => out.push(Outgoing {
                conn,
                frame: error_frame(e.code(), e.to_string()),
            }),
            Err(TransactError::Log) => out.push(Outgoing {
                conn,
                frame: error_frame("LOG_UNAVAILABLE", "request not applied; retry later"),
            }),
        }
    }

    fn fire_timer(&mut self, at: u64, room: &RoomId, epoch: u64, out: &mut Vec<Outgoing>) {
        match self.transact(at, room, &Actor::System, |g| g.timeout(epoch), out) {
            Ok(_) => {}
            Err(TransactError::Log) => {
                if let Some(rt) = self.rooms.get_mut(room) {
                    rt.timer = Some((epoch, at + LOG_RETRY_MS));
                }
            }
            Err(TransactError::Game(e)) => {
                tracing::debug!(%room, %e, "dropping timer");
                if let Some(rt) = self.rooms.get_mut(room) {
                    if rt.timer == Some((epoch, at)) {
                        rt.timer = None;
                    }
                }
            }
        }
    }

    fn chat(
        &mut self,
        now: u64,
        conn: ConnId,
        player: &PlayerId,
        room: &RoomId,
        chat: ChatMessage,
        out: &mut Vec<Outgoing>,
    ) {
        if chat.sender != player.as_str() {
            out.push(Outgoing {
                conn,
                frame: error_frame("BAD_SENDER", format!("you are {player}")),
            });
            return;
        }
        let seq = self.log.next_seq(room);
        let record = self.record(
            room,
            now,
            &Actor::Player(player.clone()),
            seq,
            CHAT_OPCODE,
            vec![chat.text.clone()],
        );
        if let Err(e) = self.log.append(record) {
            return self.log_failed(room, &e, out);
        }
        let frame = encode_chat(&chat).expect("decoded chat re-encodes");
        let members = self.members(room);
        self.broadcast(&members, &frame, out);
    }

    /// Removes players from their rooms. Players leaving the same started room
    /// in one call are handed to the engine together.
    fn leave(&mut self, now: u64, leaving: &[(PlayerId, RoomId)], out: &mut Vec<Outgoing>, notify_leaver: bool) {
        let mut by_room: BTreeMap<RoomId, Vec<PlayerId>> = BTreeMap::new();
        for (p, r) in leaving {
            by_room.entry(r.clone()).or_default().push(p.clone());
        }
        for (room, players) in by_room {
            let mut audience = self.members(&room);
            let mut delegated = Vec::new();
            for p in &players {
                if let Some(c) = self.players.get(p).and_then(|c| self.conns.get_mut(c)) {
                    c.room = None;
                }
                match self.zone.leave_room(&room, p) {
                    Ok(LeaveOutcome::DelegatedToEngine) => delegated.push(p.clone()),
                    Ok(_) => {
                        let msg = ControlMessage::new(Opcode::Leave, [p.as_str()]);
                        let _ = self
                            .log_events(&room, now, &Actor::Player(p.clone()), std::slice::from_ref(&msg))
                            .map_err(|e| tracing::warn!(%room, %e, "lobby departure not logged"));
                        let rest = self.members(&room);
                        self.broadcast(&rest, &encode_control(&msg), out);
                    }
                    Err(e) => tracing::warn!(%room, %e, "leave for player not in room"),
                }
            }
            if !notify_leaver {
                audience.retain(|c| self.conns.contains_key(c));
            }
            match self.zone.room(&room) {
                None => {
                    self.rooms.remove(&room);
                }
                Some(info) if !info.started && info.players.len() < info.min_players => {
                    if let Some(rt) = self.rooms.get_mut(&room) {
                        rt.start_at = None;
                    }
                }
                _ => {}
            }
            if !delegated.is_empty() {
                if let Some(rt) = self.rooms.get_mut(&room) {
                    rt.pending_leaves.extend(delegated);
                }
                let leaver_conns: Vec<ConnId> = audience
                    .iter()
                    .copied()
                    .filter(|c| !self.members(&room).contains(c))
                    .collect();
                self.flush_leaves(now, &room, &leaver_conns, out);
            }
        }
    }

    fn flush_leaves(&mut self, now: u64, room: &RoomId, extra: &[ConnId], out: &mut Vec<Outgoing>) {
        let Some(rt) = self.rooms.get_mut(room) else { return };
        let pending = std::mem::take(&mut rt.pending_leaves);
        if pending.is_empty() {
            return;
        }
        let actor = match pending.as_slice() {
            [one] => Actor::Player(one.clone()),
            _ => Actor::System,
        };
        let start = out.len();
        match self.transact(now, room, &actor, |g| g.leave(pending.clone()), out) {
            Ok(released) => {
                // The leavers themselves also see their departure confirmed.
                let frames: Vec<Frame> = out[start + released..].iter().map(|o| o.frame.clone()).collect();
                let mut seen = std::collections::BTreeSet::new();
                for f in frames {
                    if seen.insert(f.as_str().to_string()) {
                        for &c in extra {
                            out.push(Outgoing {
                                conn: c,
                                frame: f.clone(),
                            });
                        }
                    }
                }
                if let Some(rt) = self.rooms.get_mut(room) {
                    rt.retry_at = None;
                }
            }
            Err(TransactError::Log) => {
                if let Some(rt) = self.rooms.get_mut(room) {
                    rt.pending_leaves = pending;
                    rt.retry_at = Some(now + LOG_RETRY_MS);
                }
            }
            Err(TransactError::Game(e)) => tracing::warn!(%room, %e, "engine refused departure"),
        }
    }

    fn retry_leaves(&mut self, at: u64, room: &RoomId, out: &mut Vec<Outgoing>) {
        if let Some(rt) = self.rooms.get_mut(room) {
            rt.retry_at = None;
        }
        self.flush_leaves(at, room, &[], out);
    }
}

enum TransactError {
    Game(GameError),
    Log,
}
