//! MiBoard: the Reader/Guesser board game.
//!
//! A turn runs through the phases
//!
//! ```text
//! AWAITING_SE -> IDENTIFICATION -> VERIFICATION -> [DISCUSSION] -> ROLL_MOVE -> EVENT
//! ```
//!
//! after which control passes round-robin to the next active player, or the
//! game ends once a token reaches the last board square. The Reader writes a
//! self-explanation using the strategy on a drawn card; every Guesser submits
//! a structured argument naming the strategy, a reason and a highlighted span.
//! Each Guesser who names the drawn strategy earns a point. Any miss sends the
//! table into a timed discussion before the Reader rolls.
//!
//! Every phase has a timer. When it runs out the server either skips ahead
//! (an abandoned explanation passes control, missing identifications are
//! dropped) or performs the Reader's action on their behalf.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::MiBoardConfig;
use crate::content::{Content, PracticeText, StrategyDef};
use crate::game::{check_draw, timer_expired, timer_start, ActiveTimer, Fields, GameError, TIMER_EXPIRED, TIMER_START};
use crate::protocol::{ControlMessage, Opcode};
use crate::rng::{Deck, GameRng};
use crate::types::{GameType, PlayerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MiBoardPhase {
    AwaitingSe,
    Identification,
    Verification,
    Discussion,
    RollMove,
    Event,
    Finished,
}

impl MiBoardPhase {
    pub const ALL: [MiBoardPhase; 7] = [
        MiBoardPhase::AwaitingSe,
        MiBoardPhase::Identification,
        MiBoardPhase::Verification,
        MiBoardPhase::Discussion,
        MiBoardPhase::RollMove,
        MiBoardPhase::Event,
        MiBoardPhase::Finished,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MiBoardPhase::AwaitingSe => "AWAITING_SE",
            MiBoardPhase::Identification => "IDENTIFICATION",
            MiBoardPhase::Verification => "VERIFICATION",
            MiBoardPhase::Discussion => "DISCUSSION",
            MiBoardPhase::RollMove => "ROLL_MOVE",
            MiBoardPhase::Event => "EVENT",
            MiBoardPhase::Finished => "FINISHED",
        }
    }
}

impl FromStr for MiBoardPhase {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        MiBoardPhase::ALL.into_iter().find(|p| p.as_str() == s).ok_or(())
    }
}

impl fmt::Display for MiBoardPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A Guesser's structured argument. The highlight is a half-open span of
/// character (not byte) offsets into the self-explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmbArgument {
    pub strategy: String,
    pub reason: String,
    pub start: usize,
    pub end: usize,
}

impl CmbArgument {
    pub fn validate(&self, strategies: &[StrategyDef], se: &str) -> Result<(), GameError> {
        let def = strategies
            .iter()
            .find(|s| s.id == self.strategy)
            .ok_or_else(|| GameError::UnknownStrategy(self.strategy.clone()))?;
        if def.reason(&self.reason).is_none() {
            return Err(GameError::InvalidReason {
                strategy: self.strategy.clone(),
                reason: self.reason.clone(),
            });
        }
        let len = se.chars().count();
        if !(self.start < self.end && self.end <= len) {
            return Err(GameError::InvalidHighlight {
                start: self.start,
                end: self.end,
                len,
            });
        }
        Ok(())
    }

    /// The highlighted characters of `se`.
    pub fn highlighted<'a>(&self, se: &'a str) -> &'a str {
        let mut idx = se.char_indices().map(|(i, _)| i).chain([se.len()]);
        let start = idx.clone().nth(self.start).unwrap_or(se.len());
        let end = idx.nth(self.end).unwrap_or(se.len());
        &se[start..end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiBoardPlayer {
    pub id: PlayerId,
    pub position: u32,
    pub points: u32,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameOverReason {
    /// A token reached the last square.
    BoardEnd,
    /// Everyone else left.
    LastPlayer,
    /// Nobody is left.
    Abandoned,
}

impl GameOverReason {
    pub fn as_str(self) -> &'static str {
        match self {
            GameOverReason::BoardEnd => "board_end",
            GameOverReason::LastPlayer => "last_player",
            GameOverReason::Abandoned => "abandoned",
        }
    }
}

impl FromStr for GameOverReason {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "board_end" => GameOverReason::BoardEnd,
            "last_player" => GameOverReason::LastPlayer,
            "abandoned" => GameOverReason::Abandoned,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameOver {
    pub winner: Option<PlayerId>,
    pub reason: GameOverReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiBoardState {
    /// Join order. Departed players stay listed with `active == false`.
    pub players: Vec<MiBoardPlayer>,
    /// Index into `players`; always an active player while the game runs.
    pub reader: usize,
    pub phase: MiBoardPhase,
    /// 0 before the first turn.
    pub turn_no: u32,
    pub sentence_index: usize,
    pub current_card: Option<String>,
    pub current_se: Option<String>,
    pub pending_idents: BTreeMap<PlayerId, CmbArgument>,
    pub strategy_deck: Deck,
    pub event_deck: Deck,
    pub rng: GameRng,
    pub seed: u64,
    pub text_id: String,
    pub board_length: u32,
    pub timer_epoch: u64,
    pub timer_secs: u32,
    /// Control passes that wrapped back to an earlier seat.
    pub rounds_completed: u32,
    pub outcome: Option<GameOver>,
}

impl MiBoardState {
    pub fn player(&self, id: &PlayerId) -> Option<&MiBoardPlayer> {
        self.players.iter().find(|p| &p.id == id)
    }

    fn index_of(&self, id: &PlayerId) -> Option<usize> {
        self.players.iter().position(|p| &p.id == id)
    }

    pub fn reader_id(&self) -> &PlayerId {
        &self.players[self.reader].id
    }

    pub fn active_count(&self) -> usize {
        self.players.iter().filter(|p| p.active).count()
    }

    pub fn is_active(&self, id: &PlayerId) -> bool {
        self.player(id).is_some_and(|p| p.active)
    }

    pub fn is_guesser(&self, id: &PlayerId) -> bool {
        self.is_active(id) && id != self.reader_id()
    }

    pub fn guessers(&self) -> impl Iterator<Item = &PlayerId> {
        let reader = self.reader;
        self.players
            .iter()
            .enumerate()
            .filter(move |(i, p)| p.active && *i != reader)
            .map(|(_, p)| &p.id)
    }

    fn all_guessers_submitted(&self) -> bool {
        self.guessers().all(|g| self.pending_idents.contains_key(g))
    }

    /// Next active seat after `from` in join order, wrapping.
    pub fn next_active_after(&self, from: usize) -> Option<usize> {
        let n = self.players.len();
        (1..=n).map(|k| (from + k) % n).find(|&i| self.players[i].active)
    }

    pub fn is_finished(&self) -> bool {
        self.phase == MiBoardPhase::Finished
    }

    /// Whether `player` currently has a move to make.
    pub fn has_available_action(&self, player: &PlayerId) -> bool {
        if !self.is_active(player) {
            return false;
        }
        let is_reader = player == self.reader_id();
        match self.phase {
            MiBoardPhase::AwaitingSe | MiBoardPhase::Verification | MiBoardPhase::RollMove | MiBoardPhase::Event => {
                is_reader
            }
            MiBoardPhase::Identification => !is_reader && !self.pending_idents.contains_key(player),
            MiBoardPhase::Discussion => true,
            MiBoardPhase::Finished => false,
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let active = self.active_count();
        if !self.is_finished() {
            if !(2..=4).contains(&active) {
                return Err(format!("{active} active players while running"));
            }
            if !self.players[self.reader].active {
                return Err("reader is not active".into());
            }
        }
        if let Some(p) = self.players.iter().find(|p| p.position > self.board_length) {
            return Err(format!("{} at {} beyond {}", p.id, p.position, self.board_length));
        }
        if let Some(k) = self.pending_idents.keys().find(|k| !self.is_guesser(k)) {
            return Err(format!("identification from non-guesser {k}"));
        }
        if self.is_finished() != self.outcome.is_some() {
            return Err("outcome and phase disagree".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MiBoardAction {
    SubmitSe(PlayerId, String),
    Identify(PlayerId, CmbArgument),
    Verify(PlayerId, String),
    EndDiscussion(PlayerId),
    Roll(PlayerId),
    DrawEvent(PlayerId),
    /// The phase timer with this epoch ran out.
    Timeout(u64),
    Leave(Vec<PlayerId>),
}

impl MiBoardAction {
    /// Parses a client request frame sent by `player`.
    pub fn from_request(player: &PlayerId, msg: &ControlMessage) -> Result<MiBoardAction, GameError> {
        let p = player.clone();
        let f = &msg.fields;
        let bad = || {
            GameError::BadRequest(format!(
                "{} with {} fields is not a MiBoard request",
                msg.opcode,
                f.len()
            ))
        };
        Ok(match (msg.opcode, f.len()) {
            (Opcode::SeSubmit, 1) => MiBoardAction::SubmitSe(p, f[0].clone()),
            (Opcode::IdentSubmit, 4) => {
                let num = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| GameError::BadRequest(format!("`{s}` is not an offset")))
                };
                MiBoardAction::Identify(
                    p,
                    CmbArgument {
                        strategy: f[0].clone(),
                        reason: f[1].clone(),
                        start: num(&f[2])?,
                        end: num(&f[3])?,
                    },
                )
            }
            (Opcode::Verify, 1) => MiBoardAction::Verify(p, f[0].clone()),
            (Opcode::DiscussEnd, 0) => MiBoardAction::EndDiscussion(p),
            (Opcode::Roll, 0) => MiBoardAction::Roll(p),
            (Opcode::EventCard, 0) => MiBoardAction::DrawEvent(p),
            (Opcode::Leave, _) => MiBoardAction::Leave(vec![p]),
            _ => return Err(bad()),
        })
    }
}

pub fn start_message(seed: u64, text_id: &str, players: &[PlayerId]) -> ControlMessage {
    let mut fields = vec![
        GameType::MiBoard.as_str().to_string(),
        seed.to_string(),
        text_id.to_string(),
    ];
    fields.extend(players.iter().map(|p| p.to_string()));
    ControlMessage::new(Opcode::Start, fields)
}

#[derive(Debug, Clone)]
pub struct MiBoardEngine {
    config: MiBoardConfig,
    content: Arc<Content>,
    state: MiBoardState,
}

impl MiBoardEngine {
    pub fn start(
        config: MiBoardConfig,
        content: Arc<Content>,
        text_id: &str,
        seed: u64,
        players: &[PlayerId],
    ) -> Result<(MiBoardEngine, Vec<ControlMessage>), GameError> {
        let start = start_message(seed, text_id, players);
        let mut engine = MiBoardEngine::replica(config, content, &start)?;
        let mut out = vec![start];
        engine.begin_turn(&mut out)?;
        Ok((engine, out))
    }

    /// Builds the pre-game state a `START` broadcast describes.
    pub fn replica(
        config: MiBoardConfig,
        content: Arc<Content>,
        start: &ControlMessage,
    ) -> Result<MiBoardEngine, GameError> {
        let f = Fields::of(start);
        if start.opcode != Opcode::Start || f.str(0)? != GameType::MiBoard.as_str() {
            return Err(f.malformed("not a MiBoard start"));
        }
        f.expect_min_len(3)?;
        let seed: u64 = f.parse(1)?;
        let text_id = f.str(2)?.to_string();
        let players: Vec<PlayerId> = (3..f.len()).map(|i| f.player(i)).collect::<Result<_, _>>()?;
        if !(GameType::MiBoard.min_players()..=GameType::MiBoard.max_players()).contains(&players.len()) {
            return Err(GameError::WrongPlayerCount {
                expected: "3-4".into(),
                got: players.len(),
            });
        }
        let mut unique = players.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != players.len() {
            return Err(f.malformed("duplicate player"));
        }
        let text = content
            .text(&text_id)
            .ok_or_else(|| GameError::UnknownText(text_id.clone()))?;
        if text.targets.is_empty() {
            return Err(GameError::EmptyText);
        }
        let mut rng = GameRng::from_seed(seed);
        let strategy_deck = Deck::shuffled(content.strategies.len(), &mut rng);
        let event_deck = Deck::shuffled(content.event_cards.len(), &mut rng);
        let state = MiBoardState {
            players: players
                .into_iter()
                .map(|id| MiBoardPlayer {
                    id,
                    position: 0,
                    points: 0,
                    active: true,
                })
                .collect(),
            reader: 0,
            phase: MiBoardPhase::AwaitingSe,
            turn_no: 0,
            sentence_index: text.targets[0],
            current_card: None,
            current_se: None,
            pending_idents: BTreeMap::new(),
            strategy_deck,
            event_deck,
            rng,
            seed,
            text_id,
            board_length: config.board_length,
            timer_epoch: 0,
            timer_secs: 0,
            rounds_completed: 0,
            outcome: None,
        };
        Ok(MiBoardEngine { config, content, state })
    }

    pub fn state(&self) -> &MiBoardState {
        &self.state
    }

    pub fn content(&self) -> &Content {
        &self.content
    }

    pub fn text(&self) -> &PracticeText {
        self.content
            .text(&self.state.text_id)
            .expect("text checked at construction")
    }

    pub fn timer(&self) -> Option<ActiveTimer> {
        (!self.state.is_finished()).then(|| ActiveTimer {
            phase: self.state.phase.as_str(),
            epoch: self.state.timer_epoch,
            secs: self.state.timer_secs,
        })
    }

    /// The same game with departed players removed from the seating. Used to
    /// check that a game which lost a player plays on exactly like a game that
    /// never had them.
    pub fn compacted(&self) -> MiBoardEngine {
        let mut engine = self.clone();
        let st = &mut engine.state;
        let reader_id = st.players[st.reader].id.clone();
        st.players.retain(|p| p.active);
        st.reader = st.index_of(&reader_id).unwrap_or(0);
        engine
    }

    pub fn step(&mut self, action: MiBoardAction) -> Result<Vec<ControlMessage>, GameError> {
        let mut out = Vec::new();
        if self.state.is_finished() {
            return match action {
                MiBoardAction::Leave(_) => Ok(out),
                _ => Err(GameError::GameFinished),
            };
        }
        match action {
            MiBoardAction::SubmitSe(p, text) => {
                self.require(MiBoardPhase::AwaitingSe)?;
                self.require_reader(&p)?;
                if text.trim().is_empty() {
                    return Err(GameError::EmptySe);
                }
                self.emit(&mut out, ControlMessage::new(Opcode::SeSubmit, [p.to_string(), text]))?;
                self.schedule(&mut out, MiBoardPhase::Identification)?;
            }
            MiBoardAction::Identify(p, arg) => {
                self.require(MiBoardPhase::Identification)?;
                if !self.state.is_guesser(&p) {
                    return Err(GameError::NotGuesser);
                }
                if self.state.pending_idents.contains_key(&p) {
                    return Err(GameError::DuplicateIdent);
                }
                let se = self.state.current_se.as_deref().unwrap_or("");
                arg.validate(&self.content.strategies, se)?;
                self.emit(
                    &mut out,
                    ControlMessage::new(
                        Opcode::IdentSubmit,
                        [
                            p.to_string(),
                            arg.strategy,
                            arg.reason,
                            arg.start.to_string(),
                            arg.end.to_string(),
                        ],
                    ),
                )?;
                if self.state.all_guessers_submitted() {
                    self.schedule(&mut out, MiBoardPhase::Verification)?;
                }
            }
            MiBoardAction::Verify(p, strategy) => {
                self.require(MiBoardPhase::Verification)?;
                self.require_reader(&p)?;
                if self.content.strategy(&strategy).is_none() {
                    return Err(GameError::UnknownStrategy(strategy));
                }
                if self.state.current_card.as_deref() != Some(strategy.as_str()) {
                    return Err(GameError::NotDrawnStrategy(strategy));
                }
                self.resolve(&mut out)?;
            }
            MiBoardAction::EndDiscussion(p) => {
                self.require(MiBoardPhase::Discussion)?;
                self.require_reader(&p)?;
                self.end_discussion(&mut out)?;
            }
            MiBoardAction::Roll(p) => {
                self.require(MiBoardPhase::RollMove)?;
                self.require_reader(&p)?;
                self.roll(&mut out)?;
            }
            MiBoardAction::DrawEvent(p) => {
                self.require(MiBoardPhase::Event)?;
                self.require_reader(&p)?;
                self.draw_event(&mut out)?;
            }
            MiBoardAction::Timeout(epoch) => {
                if epoch != self.state.timer_epoch {
                    return Err(GameError::StaleTimer {
                        got: epoch,
                        current: self.state.timer_epoch,
                    });
                }
                let phase = self.state.phase;
                self.emit(&mut out, timer_expired(phase.as_str()))?;
                match phase {
                    MiBoardPhase::AwaitingSe => self.end_turn(&mut out)?,
                    MiBoardPhase::Identification => self.schedule(&mut out, MiBoardPhase::Verification)?,
                    MiBoardPhase::Verification => self.resolve(&mut out)?,
                    MiBoardPhase::Discussion => self.end_discussion(&mut out)?,
                    MiBoardPhase::RollMove => self.roll(&mut out)?,
                    MiBoardPhase::Event => self.draw_event(&mut out)?,
                    MiBoardPhase::Finished => unreachable!("checked above"),
                }
            }
            MiBoardAction::Leave(players) => {
                for p in &players {
                    if !self.state.is_active(p) {
                        return Err(GameError::NotActive(p.to_string()));
                    }
                }
                for p in &players {
                    self.emit(&mut out, ControlMessage::new(Opcode::Leave, [p.as_str()]))?;
                }
                let remaining: Vec<PlayerId> = self
                    .state
                    .players
                    .iter()
                    .filter(|p| p.active)
                    .map(|p| p.id.clone())
                    .collect();
                match remaining.as_slice() {
                    [] => self.game_over(&mut out, None, GameOverReason::Abandoned)?,
                    [w] => self.game_over(&mut out, Some(w.clone()), GameOverReason::LastPlayer)?,
                    _ if !self.state.players[self.state.reader].active => self.end_turn(&mut out)?,
                    _ if self.state.phase == MiBoardPhase::Identification && self.state.all_guessers_submitted() => {
                        self.schedule(&mut out, MiBoardPhase::Verification)?
                    }
                    _ => {}
                }
            }
        }
        Ok(out)
    }

    fn require(&self, phase: MiBoardPhase) -> Result<(), GameError> {
        if self.state.phase == phase {
            Ok(())
        } else {
            Err(GameError::WrongPhase(self.state.phase.as_str()))
        }
    }

    fn require_reader(&self, p: &PlayerId) -> Result<(), GameError> {
        if !self.state.is_active(p) {
            Err(GameError::NotActive(p.to_string()))
        } else if p != self.state.reader_id() {
            Err(GameError::NotReader)
        } else {
            Ok(())
        }
    }

    fn emit(&mut self, out: &mut Vec<ControlMessage>, msg: ControlMessage) -> Result<(), GameError> {
        self.apply(&msg)?;
        out.push(msg);
        Ok(())
    }

    fn schedule(&mut self, out: &mut Vec<ControlMessage>, phase: MiBoardPhase) -> Result<(), GameError> {
        let secs = match phase {
            MiBoardPhase::Discussion => self.config.discussion_secs,
            _ => self.config.turn_timeout_secs,
        };
        self.emit(out, timer_start(phase.as_str(), secs))
    }

    fn reader_field(&self) -> String {
        self.state.reader_id().to_string()
    }

    fn begin_turn(&mut self, out: &mut Vec<ControlMessage>) -> Result<(), GameError> {
        let turn = self.state.turn_no + 1;
        let targets = &self.text().targets;
        let sentence = targets[(turn as usize - 1) % targets.len()];
        let reader = self.reader_field();
        self.emit(
            out,
            ControlMessage::new(
                Opcode::TurnBegin,
                [turn.to_string(), reader.clone(), sentence.to_string()],
            ),
        )?;
        let (mut deck, mut rng) = (self.state.strategy_deck.clone(), self.state.rng.clone());
        let card = self.content.strategies[deck.draw(&mut rng)].id.clone();
        self.emit(out, ControlMessage::new(Opcode::StratCard, [reader, card]))?;
        self.schedule(out, MiBoardPhase::AwaitingSe)
    }

    fn resolve(&mut self, out: &mut Vec<ControlMessage>) -> Result<(), GameError> {
        let card = self.state.current_card.clone().expect("a card is drawn every turn");
        self.emit(
            out,
            ControlMessage::new(Opcode::Verify, [self.reader_field(), card.clone()]),
        )?;
        let mut fields = vec![card.clone()];
        let mut all_matched = true;
        for g in self.state.guessers() {
            let hit = self.state.pending_idents.get(g).is_some_and(|a| a.strategy == card);
            all_matched &= hit;
            fields.extend([g.to_string(), u32::from(hit).to_string()]);
        }
        self.emit(out, ControlMessage::new(Opcode::IdentResult, fields))?;
        if all_matched {
            self.schedule(out, MiBoardPhase::RollMove)
        } else {
            let secs = self.config.discussion_secs;
            self.emit(out, ControlMessage::new(Opcode::DiscussBegin, [secs.to_string()]))?;
            self.schedule(out, MiBoardPhase::Discussion)
        }
    }

    fn end_discussion(&mut self, out: &mut Vec<ControlMessage>) -> Result<(), GameError> {
        self.emit(out, ControlMessage::new(Opcode::DiscussEnd, Vec::<String>::new()))?;
        self.schedule(out, MiBoardPhase::RollMove)
    }

    fn move_reader(&mut self, out: &mut Vec<ControlMessage>, delta: i64) -> Result<(), GameError> {
        let from = self.state.players[self.state.reader].position;
        let to = (i64::from(from) + delta).clamp(0, i64::from(self.state.board_length));
        self.emit(
            out,
            ControlMessage::new(Opcode::Move, [self.reader_field(), from.to_string(), to.to_string()]),
        )
    }

    fn roll(&mut self, out: &mut Vec<ControlMessage>) -> Result<(), GameError> {
        let d = self.state.rng.clone().roll(self.config.die_sides);
        self.emit(
            out,
            ControlMessage::new(Opcode::Roll, [self.reader_field(), d.to_string()]),
        )?;
        self.move_reader(out, i64::from(d))?;
        self.schedule(out, MiBoardPhase::Event)
    }

    fn draw_event(&mut self, out: &mut Vec<ControlMessage>) -> Result<(), GameError> {
        let (mut deck, mut rng) = (self.state.event_deck.clone(), self.state.rng.clone());
        let card = self.content.event_cards[deck.draw(&mut rng)].clone();
        self.emit(
            out,
            ControlMessage::new(
                Opcode::EventCard,
                [self.reader_field(), card.label, card.delta.to_string()],
            ),
        )?;
        self.move_reader(out, i64::from(card.delta))?;
        let len = self.state.board_length;
        if let Some(w) = self.state.players.iter().find(|p| p.active && p.position == len) {
            let w = w.id.clone();
            return self.game_over(out, Some(w), GameOverReason::BoardEnd);
        }
        self.end_turn(out)
    }

    fn end_turn(&mut self, out: &mut Vec<ControlMessage>) -> Result<(), GameError> {
        let next = self
            .state
            .next_active_after(self.state.reader)
            .expect("at least two active players");
        let to = self.state.players[next].id.to_string();
        self.emit(out, ControlMessage::new(Opcode::ControlPass, [self.reader_field(), to]))?;
        self.begin_turn(out)
    }

    fn game_over(
        &mut self,
        out: &mut Vec<ControlMessage>,
        winner: Option<PlayerId>,
        reason: GameOverReason,
    ) -> Result<(), GameError> {
        let w = winner.map_or_else(|| "-".to_string(), |w| w.to_string());
        self.emit(
            out,
            ControlMessage::new(Opcode::GameOver, [w, reason.as_str().to_string()]),
        )
    }

    /// Applies one broadcast. This is the only place state changes.
    pub fn apply(&mut self, msg: &ControlMessage) -> Result<(), GameError> {
        let f = Fields::of(msg);
        let content = &self.content;
        let st = &mut self.state;
        if st.is_finished() && msg.opcode != Opcode::Error {
            return Err(GameError::GameFinished);
        }
        let in_phase = |st: &MiBoardState, phase: MiBoardPhase| {
            if st.phase == phase {
                Ok(())
            } else {
                Err(f.malformed(format!("only valid in {phase}, not {}", st.phase)))
            }
        };
        let is_reader = |st: &MiBoardState, id: &PlayerId| {
            if id == st.reader_id() {
                Ok(())
            } else {
                Err(f.malformed(format!("{id} is not the Reader")))
            }
        };
        match msg.opcode {
            Opcode::TurnBegin => {
                f.expect_len(3)?;
                let turn: u32 = f.parse(0)?;
                check_draw("turn", st.turn_no + 1, turn)?;
                is_reader(st, &f.player(1)?)?;
                let text = content.text(&st.text_id).expect("checked at construction");
                let expected = text.targets[(turn as usize - 1) % text.targets.len()];
                check_draw("sentence", expected, f.parse(2)?)?;
                st.turn_no = turn;
                st.sentence_index = expected;
                st.current_card = None;
                st.current_se = None;
                st.pending_idents.clear();
            }
            Opcode::StratCard => {
                f.expect_len(2)?;
                is_reader(st, &f.player(0)?)?;
                if st.current_card.is_some() {
                    return Err(f.malformed("card already drawn this turn"));
                }
                let idx = st.strategy_deck.draw(&mut st.rng);
                let drawn = &content.strategies[idx].id;
                check_draw("strategy card", drawn.as_str(), f.str(1)?)?;
                st.current_card = Some(drawn.clone());
            }
            Opcode::TimerTick => {
                f.expect_min_len(2)?;
                let phase: MiBoardPhase = f.str(0)?.parse().map_err(|_| f.malformed("unknown phase"))?;
                match f.str(1)? {
                    TIMER_START => {
                        f.expect_len(3)?;
                        let secs: u32 = f.parse(2)?;
                        if phase == MiBoardPhase::Finished || secs == 0 {
                            return Err(f.malformed("unschedulable timer"));
                        }
                        st.phase = phase;
                        st.timer_epoch += 1;
                        st.timer_secs = secs;
                    }
                    TIMER_EXPIRED => {
                        f.expect_len(2)?;
                        in_phase(st, phase)?;
                    }
                    other => return Err(f.malformed(format!("timer kind `{other}`"))),
                }
            }
            Opcode::SeSubmit => {
                f.expect_len(2)?;
                in_phase(st, MiBoardPhase::AwaitingSe)?;
                is_reader(st, &f.player(0)?)?;
                let text = f.str(1)?;
                if text.trim().is_empty() {
                    return Err(f.malformed("empty self-explanation"));
                }
                st.current_se = Some(text.to_string());
            }
            Opcode::IdentSubmit => {
                f.expect_len(5)?;
                in_phase(st, MiBoardPhase::Identification)?;
                let g = f.player(0)?;
                if !st.is_guesser(&g) || st.pending_idents.contains_key(&g) {
                    return Err(f.malformed(format!("{g} cannot identify now")));
                }
                let arg = CmbArgument {
                    strategy: f.str(1)?.to_string(),
                    reason: f.str(2)?.to_string(),
                    start: f.parse(3)?,
                    end: f.parse(4)?,
                };
                arg.validate(&content.strategies, st.current_se.as_deref().unwrap_or(""))
                    .map_err(|e| f.malformed(e.to_string()))?;
                st.pending_idents.insert(g, arg);
            }
            Opcode::Verify => {
                f.expect_len(2)?;
                in_phase(st, MiBoardPhase::Verification)?;
                is_reader(st, &f.player(0)?)?;
                check_draw("verified strategy", st.current_card.as_deref(), Some(f.str(1)?))?;
            }
            Opcode::IdentResult => {
                in_phase(st, MiBoardPhase::Verification)?;
                let card = st.current_card.clone();
                check_draw("result strategy", card.as_deref(), Some(f.str(0)?))?;
                let guessers: Vec<PlayerId> = st.guessers().cloned().collect();
                f.expect_len(1 + 2 * guessers.len())?;
                let mut awards = Vec::with_capacity(guessers.len());
                for (k, g) in guessers.iter().enumerate() {
                    check_draw("guesser", g, &f.player(1 + 2 * k)?)?;
                    let awarded: u32 = f.parse(2 + 2 * k)?;
                    let hit = st
                        .pending_idents
                        .get(g)
                        .is_some_and(|a| Some(&a.strategy) == card.as_ref());
                    check_draw("award", u32::from(hit), awarded)?;
                    awards.push(awarded);
                }
                for (g, a) in guessers.iter().zip(awards) {
                    let i = st.index_of(g).expect("guesser is a player");
                    st.players[i].points += a;
                }
            }
            Opcode::DiscussBegin => {
                f.expect_len(1)?;
                in_phase(st, MiBoardPhase::Verification)?;
                let _: u32 = f.parse(0)?;
            }
            Opcode::DiscussEnd => {
                f.expect_len(0)?;
                in_phase(st, MiBoardPhase::Discussion)?;
            }
            Opcode::Roll => {
                f.expect_len(2)?;
                in_phase(st, MiBoardPhase::RollMove)?;
                is_reader(st, &f.player(0)?)?;
                let d = st.rng.roll(self.config.die_sides);
                check_draw("die", d, f.parse(1)?)?;
            }
            Opcode::EventCard => {
                f.expect_len(3)?;
                in_phase(st, MiBoardPhase::Event)?;
                is_reader(st, &f.player(0)?)?;
                let idx = st.event_deck.draw(&mut st.rng);
                let card = &content.event_cards[idx];
                check_draw(
                    "event card",
                    (card.label.as_str(), card.delta),
                    (f.str(1)?, f.parse(2)?),
                )?;
            }
            Opcode::Move => {
                f.expect_len(3)?;
                let p = f.player(0)?;
                is_reader(st, &p)?;
                let from: u32 = f.parse(1)?;
                let to: u32 = f.parse(2)?;
                if to > st.board_length {
                    return Err(f.malformed("move beyond the board"));
                }
                let i = st.reader;
                check_draw("token position", st.players[i].position, from)?;
                st.players[i].position = to;
            }
            Opcode::ControlPass => {
                f.expect_len(2)?;
                is_reader(st, &f.player(0)?)?;
                let next = st
                    .next_active_after(st.reader)
                    .ok_or_else(|| f.malformed("nobody to pass to"))?;
                check_draw("next reader", &st.players[next].id, &f.player(1)?)?;
                if next <= st.reader {
                    st.rounds_completed += 1;
                }
                st.reader = next;
                st.current_card = None;
                st.current_se = None;
                st.pending_idents.clear();
            }
            Opcode::Leave => {
                f.expect_len(1)?;
                let p = f.player(0)?;
                let i = st
                    .index_of(&p)
                    .filter(|&i| st.players[i].active)
                    .ok_or_else(|| f.malformed(format!("{p} is not active")))?;
                st.players[i].active = false;
                st.pending_idents.remove(&p);
            }
            Opcode::GameOver => {
                f.expect_len(2)?;
                let winner = match f.str(0)? {
                    "-" => None,
                    _ => Some(f.player(0)?),
                };
                let reason: GameOverReason = f.str(1)?.parse().map_err(|_| f.malformed("unknown reason"))?;
                st.phase = MiBoardPhase::Finished;
                st.outcome = Some(GameOver { winner, reason });
            }
            Opcode::Error => {}
            other => {
                return Err(GameError::MalformedEvent {
                    opcode: other.as_str(),
                    detail: "not a MiBoard event".into(),
                })
            }
        }
        Ok(())
    }
}
