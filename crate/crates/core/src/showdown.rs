//! Two-player Showdown matches.
//!
//! Each round both players read a target sentence, write a self-explanation
//! at the same time, and the higher-scoring explanation wins the round's
//! stake. A tied round awards nothing and raises the next round's stake to 2;
//! a decided round resets it to 1. Every phase is bounded by a [`TimerSpec`]
//! and can end early once both players acknowledge it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ShowdownConfig;
use crate::content::{prior_text, Content, PracticeText};
use crate::evaluator::{Evaluation, Scorer};
use crate::game::{
    check_draw, timer_expired, timer_start, ActiveTimer, Fields, GameError, TIMER_ACK, TIMER_EXPIRED, TIMER_START,
};
use crate::protocol::{ControlMessage, Opcode};
use crate::types::{GameType, PlayerId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("timer durations must be a positive multiple of 2 seconds, got {0}")]
pub struct TimerSpecError(pub u32);

/// A phase duration in seconds. Construction rejects anything that is not a
/// positive multiple of 2, so every scheduled duration obeys the 2-second
/// cadence by type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct TimerSpec(u32);

impl TimerSpec {
    pub const DEFAULT_READING: TimerSpec = TimerSpec::must(60);
    pub const DEFAULT_COMPOSING: TimerSpec = TimerSpec::must(120);
    pub const DEFAULT_ROUND_RESULT: TimerSpec = TimerSpec::must(10);

    pub const fn is_valid(secs: u32) -> bool {
        secs > 0 && secs.is_multiple_of(2)
    }

    pub fn new(secs: u32) -> Result<TimerSpec, TimerSpecError> {
        if TimerSpec::is_valid(secs) {
            Ok(TimerSpec(secs))
        } else {
            Err(TimerSpecError(secs))
        }
    }

    /// Compile-time constructor; an invalid literal fails the build.
    pub const fn must(secs: u32) -> TimerSpec {
        assert!(TimerSpec::is_valid(secs), "timer must be a positive multiple of 2");
        TimerSpec(secs)
    }

    pub const fn secs(self) -> u32 {
        self.0
    }
}

const _: () = assert!(TimerSpec::is_valid(TimerSpec::DEFAULT_READING.secs()));
const _: () = assert!(TimerSpec::is_valid(TimerSpec::DEFAULT_COMPOSING.secs()));
const _: () = assert!(TimerSpec::is_valid(TimerSpec::DEFAULT_ROUND_RESULT.secs()));

impl TryFrom<u32> for TimerSpec {
    type Error = TimerSpecError;

    fn try_from(secs: u32) -> Result<Self, Self::Error> {
        TimerSpec::new(secs)
    }
}

impl From<TimerSpec> for u32 {
    fn from(spec: TimerSpec) -> u32 {
        spec.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShowdownPhase {
    Reading,
    Composing,
    Scoring,
    RoundResult,
    Finished,
}

impl ShowdownPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            ShowdownPhase::Reading => "READING",
            ShowdownPhase::Composing => "COMPOSING",
            ShowdownPhase::Scoring => "SCORING",
            ShowdownPhase::RoundResult => "ROUND_RESULT",
            ShowdownPhase::Finished => "FINISHED",
        }
    }

    fn is_timed(self) -> bool {
        matches!(
            self,
            ShowdownPhase::Reading | ShowdownPhase::Composing | ShowdownPhase::RoundResult
        )
    }
}

impl FromStr for ShowdownPhase {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "READING" => ShowdownPhase::Reading,
            "COMPOSING" => ShowdownPhase::Composing,
            "SCORING" => ShowdownPhase::Scoring,
            "ROUND_RESULT" => ShowdownPhase::RoundResult,
            "FINISHED" => ShowdownPhase::Finished,
            _ => return Err(()),
        })
    }
}

impl fmt::Display for ShowdownPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundKind {
    Regular,
    Bonus,
}

impl RoundKind {
    fn as_str(self) -> &'static str {
        match self {
            RoundKind::Regular => "REGULAR",
            RoundKind::Bonus => "BONUS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShowdownPlayer {
    pub id: PlayerId,
    pub score: u32,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub se: String,
    /// Filled in when the round is scored.
    pub evaluation: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub stake: u32,
    /// `None` for a tied round.
    pub winner: Option<PlayerId>,
    pub awarded: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchOutcome {
    Points,
    Forfeit,
    Draw,
    Abandoned,
}

impl MatchOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchOutcome::Points => "points",
            MatchOutcome::Forfeit => "forfeit",
            MatchOutcome::Draw => "draw",
            MatchOutcome::Abandoned => "abandoned",
        }
    }
}

impl FromStr for MatchOutcome {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "points" => MatchOutcome::Points,
            "forfeit" => MatchOutcome::Forfeit,
            "draw" => MatchOutcome::Draw,
            "abandoned" => MatchOutcome::Abandoned,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub winner: Option<PlayerId>,
    pub outcome: MatchOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShowdownState {
    pub players: Vec<ShowdownPlayer>,
    pub text_id: String,
    /// 0 before the first round begins.
    pub round_no: u32,
    pub kind: RoundKind,
    pub sentence_index: usize,
    pub regular_rounds_begun: u32,
    pub bonus_rounds_begun: u32,
    /// Stake of the current round, or of the next one while a result is shown.
    pub stake: u32,
    pub phase: ShowdownPhase,
    pub submissions: BTreeMap<PlayerId, Submission>,
    pub acks: BTreeSet<PlayerId>,
    pub timer_epoch: u64,
    pub timer_secs: u32,
    pub history: Vec<RoundRecord>,
    pub result: Option<MatchResult>,
}

impl ShowdownState {
    pub fn player(&self, id: &PlayerId) -> Option<&ShowdownPlayer> {
        self.players.iter().find(|p| &p.id == id)
    }

    fn player_mut(&mut self, id: &PlayerId) -> Option<&mut ShowdownPlayer> {
        self.players.iter_mut().find(|p| &p.id == id)
    }

    pub fn scores(&self) -> (u32, u32) {
        (self.players[0].score, self.players[1].score)
    }

    /// Points handed out so far, which always equals the sum of decided-round stakes.
    pub fn total_awarded(&self) -> u32 {
        self.history.iter().map(|r| r.awarded).sum()
    }

    pub fn is_finished(&self) -> bool {
        self.phase == ShowdownPhase::Finished
    }

    /// Whether `player` currently has something to do.
    pub fn has_available_action(&self, player: &PlayerId) -> bool {
        let active = self.player(player).is_some_and(|p| p.active);
        if !active {
            return false;
        }
        match self.phase {
            ShowdownPhase::Reading | ShowdownPhase::RoundResult => !self.acks.contains(player),
            ShowdownPhase::Composing => !self.submissions.contains_key(player),
            ShowdownPhase::Scoring | ShowdownPhase::Finished => false,
        }
    }

    /// Structural invariants that hold in every reachable state.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.players.len() != 2 {
            return Err(format!("{} players", self.players.len()));
        }
        let tied_last = self.history.last().is_some_and(|r| r.winner.is_none());
        if (self.stake == 2) != tied_last || !(1..=2).contains(&self.stake) {
            return Err(format!("stake {} after tied_last={tied_last}", self.stake));
        }
        let (a, b) = self.scores();
        if a + b != self.total_awarded() {
            return Err(format!("scores {a}+{b} != awarded {}", self.total_awarded()));
        }
        for r in &self.history {
            let expected = if r.winner.is_some() { r.stake } else { 0 };
            if r.awarded != expected {
                return Err(format!("round {} awarded {} at stake {}", r.round, r.awarded, r.stake));
            }
        }
        if self.phase.is_timed() && !TimerSpec::is_valid(self.timer_secs) {
            return Err(format!("timer of {} s", self.timer_secs));
        }
        if self.phase == ShowdownPhase::Finished && self.result.is_none() {
            return Err("finished without a result".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShowdownAction {
    /// Acknowledge the named phase, ending it early once both players have.
    Ack(PlayerId, ShowdownPhase),
    Submit(PlayerId, String),
    /// The phase timer with this epoch ran out.
    Timeout(u64),
    /// Players whose connections dropped together.
    Leave(Vec<PlayerId>),
}

impl ShowdownAction {
    /// Parses a client request frame sent by `player`.
    pub fn from_request(player: &PlayerId, msg: &ControlMessage) -> Result<ShowdownAction, GameError> {
        let f = &msg.fields;
        match (msg.opcode, f.len()) {
            (Opcode::SeSubmit, 0) => Ok(ShowdownAction::Submit(player.clone(), String::new())),
            (Opcode::SeSubmit, 1) => Ok(ShowdownAction::Submit(player.clone(), f[0].clone())),
            (Opcode::TimerTick, 1) => f[0]
                .parse()
                .map(|phase| ShowdownAction::Ack(player.clone(), phase))
                .map_err(|_| GameError::BadRequest(format!("unknown phase `{}`", f[0]))),
            (Opcode::Leave, _) => Ok(ShowdownAction::Leave(vec![player.clone()])),
            _ => Err(GameError::BadRequest(format!(
                "{} with {} fields is not a Showdown request",
                msg.opcode,
                f.len()
            ))),
        }
    }
}

/// One Showdown match. Built either authoritatively with [`ShowdownEngine::start`]
/// or as a replica from a `START` broadcast.
#[derive(Clone)]
pub struct ShowdownEngine {
    config: ShowdownConfig,
    content: Arc<Content>,
    scorer: Option<Arc<dyn Scorer>>,
    seed: u64,
    state: ShowdownState,
}

impl fmt::Debug for ShowdownEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShowdownEngine")
            .field("seed", &self.seed)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

pub fn start_message(seed: u64, text_id: &str, players: &[PlayerId]) -> ControlMessage {
    let mut fields = vec![
        GameType::Showdown.as_str().to_string(),
        seed.to_string(),
        text_id.to_string(),
    ];
    fields.extend(players.iter().map(|p| p.to_string()));
    ControlMessage::new(Opcode::Start, fields)
}

impl ShowdownEngine {
    pub fn start(
        config: ShowdownConfig,
        content: Arc<Content>,
        scorer: Arc<dyn Scorer>,
        text_id: &str,
        seed: u64,
        players: &[PlayerId],
    ) -> Result<(ShowdownEngine, Vec<ControlMessage>), GameError> {
        if players.len() != 2 {
            return Err(GameError::WrongPlayerCount {
                expected: "2".into(),
                got: players.len(),
            });
        }
        let text = content
            .text(text_id)
            .ok_or_else(|| GameError::UnknownText(text_id.to_string()))?;
        if text.targets.is_empty() {
            return Err(GameError::EmptyText);
        }
        let start = start_message(seed, text_id, players);
        let mut engine = ShowdownEngine::replica(config, content, &start)?;
        engine.scorer = Some(scorer);
        let mut out = vec![start];
        engine.begin_round(&mut out, 1)?;
        Ok((engine, out))
    }

    /// A passive copy that only applies broadcasts. It cannot score rounds.
    pub fn replica(
        config: ShowdownConfig,
        content: Arc<Content>,
        start: &ControlMessage,
    ) -> Result<ShowdownEngine, GameError> {
        let f = Fields::of(start);
        if start.opcode != Opcode::Start {
            return Err(f.malformed("expected START"));
        }
        f.expect_len(5)?;
        if f.str(0)? != GameType::Showdown.as_str() {
            return Err(f.malformed("not a Showdown start"));
        }
        let seed: u64 = f.parse(1)?;
        let text_id = f.str(2)?.to_string();
        let text = content
            .text(&text_id)
            .ok_or_else(|| GameError::UnknownText(text_id.clone()))?;
        if text.targets.is_empty() {
            return Err(GameError::EmptyText);
        }
        let players = vec![f.player(3)?, f.player(4)?];
        if players[0] == players[1] {
            return Err(f.malformed("duplicate player"));
        }
        let state = ShowdownState {
            players: players
                .into_iter()
                .map(|id| ShowdownPlayer {
                    id,
                    score: 0,
                    active: true,
                })
                .collect(),
            text_id,
            round_no: 0,
            kind: RoundKind::Regular,
            sentence_index: 0,
            regular_rounds_begun: 0,
            bonus_rounds_begun: 0,
            stake: 1,
            phase: ShowdownPhase::Reading,
            submissions: BTreeMap::new(),
            acks: BTreeSet::new(),
            timer_epoch: 0,
            timer_secs: 0,
            history: Vec::new(),
            result: None,
        };
        Ok(ShowdownEngine {
            config,
            content,
            scorer: None,
            seed,
            state,
        })
    }

    pub fn state(&self) -> &ShowdownState {
        &self.state
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn text(&self) -> &PracticeText {
        self.content
            .text(&self.state.text_id)
            .expect("text checked at construction")
    }

    pub fn regular_round_total(&self) -> u32 {
        self.config.round_count.unwrap_or(self.text().targets.len() as u32)
    }

    pub fn timer(&self) -> Option<ActiveTimer> {
        (self.state.phase.is_timed()).then(|| ActiveTimer {
            phase: self.state.phase.as_str(),
            epoch: self.state.timer_epoch,
            secs: self.state.timer_secs,
        })
    }

    /// Validates `action` and returns the broadcasts it produced, already applied.
    /// On error the state is unchanged only if the caller discards this engine;
    /// the server steps a clone and commits it after logging.
    pub fn step(&mut self, action: ShowdownAction) -> Result<Vec<ControlMessage>, GameError> {
        let mut out = Vec::new();
        if self.state.is_finished() {
            return match action {
                ShowdownAction::Leave(_) => Ok(out),
                _ => Err(GameError::GameFinished),
            };
        }
        match action {
            ShowdownAction::Timeout(epoch) => {
                if epoch != self.state.timer_epoch || !self.state.phase.is_timed() {
                    return Err(GameError::StaleTimer {
                        got: epoch,
                        current: self.state.timer_epoch,
                    });
                }
                let phase = self.state.phase;
                self.emit(&mut out, timer_expired(phase.as_str()))?;
                if phase == ShowdownPhase::Composing {
                    let missing: Vec<PlayerId> = self
                        .state
                        .players
                        .iter()
                        .filter(|p| !self.state.submissions.contains_key(&p.id))
                        .map(|p| p.id.clone())
                        .collect();
                    for p in missing {
                        self.emit(
                            &mut out,
                            ControlMessage::new(Opcode::SeSubmit, [p.to_string(), String::new()]),
                        )?;
                    }
                }
                self.end_phase(&mut out, phase)?;
            }
            ShowdownAction::Ack(player, phase) => {
                self.require_active(&player)?;
                if phase != self.state.phase || !matches!(phase, ShowdownPhase::Reading | ShowdownPhase::RoundResult) {
                    return Err(GameError::WrongPhase(self.state.phase.as_str()));
                }
                if self.state.acks.contains(&player) {
                    return Ok(out);
                }
                self.emit(
                    &mut out,
                    ControlMessage::new(Opcode::TimerTick, [phase.as_str(), TIMER_ACK, player.as_str()]),
                )?;
                if self.state.acks.len() == self.state.players.len() {
                    self.end_phase(&mut out, phase)?;
                }
            }
            ShowdownAction::Submit(player, text) => {
                self.require_active(&player)?;
                if self.state.phase != ShowdownPhase::Composing {
                    return Err(GameError::WrongPhase(self.state.phase.as_str()));
                }
                if self.state.submissions.contains_key(&player) {
                    return Err(GameError::DuplicateSubmission);
                }
                self.emit(
                    &mut out,
                    ControlMessage::new(Opcode::SeSubmit, [player.to_string(), text]),
                )?;
                if self.state.phase == ShowdownPhase::Scoring {
                    self.score_round(&mut out)?;
                }
            }
            ShowdownAction::Leave(players) => {
                for p in &players {
                    self.require_active(p)?;
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
                let (winner, outcome) = match remaining.as_slice() {
                    [w] => (Some(w.clone()), MatchOutcome::Forfeit),
                    _ => (None, MatchOutcome::Abandoned),
                };
                self.finish(&mut out, winner, outcome)?;
            }
        }
        Ok(out)
    }

    fn require_active(&self, player: &PlayerId) -> Result<(), GameError> {
        match self.state.player(player) {
            Some(p) if p.active => Ok(()),
            _ => Err(GameError::NotActive(player.to_string())),
        }
    }

    fn emit(&mut self, out: &mut Vec<ControlMessage>, msg: ControlMessage) -> Result<(), GameError> {
        self.apply(&msg)?;
        out.push(msg);
        Ok(())
    }

    fn end_phase(&mut self, out: &mut Vec<ControlMessage>, phase: ShowdownPhase) -> Result<(), GameError> {
        match phase {
            ShowdownPhase::Reading => {
                let secs = self.config.composing_secs;
                self.emit(out, scheduled(ShowdownPhase::Composing, secs))
            }
            ShowdownPhase::Composing => self.score_round(out),
            ShowdownPhase::RoundResult => self.advance(out),
            ShowdownPhase::Scoring | ShowdownPhase::Finished => Err(GameError::WrongPhase(phase.as_str())),
        }
    }

    fn next_round_plan(&self) -> (RoundKind, usize) {
        let text = self.text();
        if self.state.regular_rounds_begun < self.regular_round_total() {
            let k = self.state.regular_rounds_begun as usize % text.targets.len();
            (RoundKind::Regular, text.targets[k])
        } else {
            (RoundKind::Bonus, text.bonus_sentence_index())
        }
    }

    fn begin_round(&mut self, out: &mut Vec<ControlMessage>, round_no: u32) -> Result<(), GameError> {
        let (kind, sentence_index) = if round_no == self.state.round_no {
            (self.state.kind, self.state.sentence_index)
        } else {
            self.next_round_plan()
        };
        let text = self.text();
        let target = text.sentences[sentence_index].clone();
        let prior = prior_text(text, sentence_index).expect("index from the text itself");
        let begin = ControlMessage::new(
            Opcode::RoundBegin,
            [
                round_no.to_string(),
                self.state.stake.to_string(),
                sentence_index.to_string(),
                kind.as_str().to_string(),
                target,
                prior,
            ],
        );
        self.emit(out, begin)?;
        let secs = self.config.reading_secs;
        self.emit(out, scheduled(ShowdownPhase::Reading, secs))
    }

    fn score_round(&mut self, out: &mut Vec<ControlMessage>) -> Result<(), GameError> {
        let scorer = self
            .scorer
            .clone()
            .ok_or_else(|| GameError::BadRequest("replica cannot score".into()))?;
        let text = self.text();
        let target = text.sentences[self.state.sentence_index].clone();
        let prior = prior_text(text, self.state.sentence_index).expect("valid index");
        let mut evaluations = Vec::with_capacity(2);
        for p in &self.state.players {
            let se = &self.state.submissions[&p.id].se;
            match scorer.score(se, &target, &prior) {
                Ok(e) if e.score <= 3 => evaluations.push(e),
                Ok(e) => return self.void_round(out, &format!("score {} out of range", e.score)),
                Err(e) => return self.void_round(out, &e.to_string()),
            }
        }
        let (a, b) = (evaluations[0].score, evaluations[1].score);
        let stake = self.state.stake;
        let (winner, awarded) = match a.cmp(&b) {
            std::cmp::Ordering::Greater => (self.state.players[0].id.to_string(), stake),
            std::cmp::Ordering::Less => (self.state.players[1].id.to_string(), stake),
            std::cmp::Ordering::Equal => ("-".to_string(), 0),
        };
        let mut fields = vec![
            self.state.round_no.to_string(),
            stake.to_string(),
            winner,
            awarded.to_string(),
        ];
        for (p, e) in self.state.players.iter().zip(&evaluations) {
            fields.extend([p.id.to_string(), e.score.to_string(), e.to_wire()]);
        }
        self.emit(out, ControlMessage::new(Opcode::RoundResult, fields))?;
        let secs = self.config.round_result_secs;
        self.emit(out, scheduled(ShowdownPhase::RoundResult, secs))
    }

    /// The evaluator failed: void the round and replay it with the same target.
    fn void_round(&mut self, out: &mut Vec<ControlMessage>, detail: &str) -> Result<(), GameError> {
        let round = self.state.round_no;
        self.emit(
            out,
            ControlMessage::new(
                Opcode::Error,
                ["EVALUATOR_FAILURE".to_string(), round.to_string(), detail.to_string()],
            ),
        )?;
        self.begin_round(out, round)
    }

    fn advance(&mut self, out: &mut Vec<ControlMessage>) -> Result<(), GameError> {
        let next = self.state.round_no + 1;
        if self.state.regular_rounds_begun < self.regular_round_total() {
            return self.begin_round(out, next);
        }
        let (a, b) = self.state.scores();
        if a != b {
            let w = if a > b { 0 } else { 1 };
            let winner = self.state.players[w].id.clone();
            return self.finish(out, Some(winner), MatchOutcome::Points);
        }
        if self.state.bonus_rounds_begun < self.config.max_bonus_rounds {
            return self.begin_round(out, next);
        }
        self.finish(out, None, MatchOutcome::Draw)
    }

    fn finish(
        &mut self,
        out: &mut Vec<ControlMessage>,
        winner: Option<PlayerId>,
        outcome: MatchOutcome,
    ) -> Result<(), GameError> {
        let mut fields = vec![
            winner.map_or_else(|| "-".to_string(), |w| w.to_string()),
            outcome.as_str().to_string(),
        ];
        for p in &self.state.players {
            fields.extend([p.id.to_string(), p.score.to_string()]);
        }
        self.emit(out, ControlMessage::new(Opcode::MatchResult, fields))
    }

    /// Applies one broadcast. This is the only place state changes.
    pub fn apply(&mut self, msg: &ControlMessage) -> Result<(), GameError> {
        let f = Fields::of(msg);
        let st = &mut self.state;
        if st.phase == ShowdownPhase::Finished && msg.opcode != Opcode::Error {
            return Err(GameError::GameFinished);
        }
        match msg.opcode {
            Opcode::RoundBegin => {
                f.expect_len(6)?;
                let round: u32 = f.parse(0)?;
                let stake: u32 = f.parse(1)?;
                let sentence: usize = f.parse(2)?;
                let kind = match f.str(3)? {
                    "REGULAR" => RoundKind::Regular,
                    "BONUS" => RoundKind::Bonus,
                    other => return Err(f.malformed(format!("round kind `{other}`"))),
                };
                check_draw("stake", st.stake, stake)?;
                let text = self.content.text(&st.text_id).expect("text checked at construction");
                if sentence >= text.sentences.len() {
                    return Err(f.malformed("sentence index out of range"));
                }
                if round == st.round_no + 1 && st.phase != ShowdownPhase::Scoring {
                    match kind {
                        RoundKind::Regular => st.regular_rounds_begun += 1,
                        RoundKind::Bonus => st.bonus_rounds_begun += 1,
                    }
                } else if !(round == st.round_no && st.phase == ShowdownPhase::Scoring) {
                    return Err(f.malformed(format!("round {round} after round {}", st.round_no)));
                }
                st.round_no = round;
                st.kind = kind;
                st.sentence_index = sentence;
                st.submissions.clear();
                st.acks.clear();
            }
            Opcode::TimerTick => {
                f.expect_min_len(2)?;
                let phase: ShowdownPhase = f
                    .parse::<String>(0)?
                    .parse()
                    .map_err(|_| f.malformed("unknown phase"))?;
                match f.str(1)? {
                    TIMER_START => {
                        f.expect_len(3)?;
                        let secs: u32 = f.parse(2)?;
                        if !phase.is_timed() || !TimerSpec::is_valid(secs) {
                            return Err(f.malformed(format!("cannot schedule {phase} for {secs} s")));
                        }
                        st.phase = phase;
                        st.timer_epoch += 1;
                        st.timer_secs = secs;
                        st.acks.clear();
                    }
                    TIMER_EXPIRED => {
                        f.expect_len(2)?;
                        if phase != st.phase {
                            return Err(f.malformed("expiry for another phase"));
                        }
                    }
                    TIMER_ACK => {
                        f.expect_len(3)?;
                        let p = f.player(2)?;
                        if phase != st.phase || st.player(&p).is_none() {
                            return Err(f.malformed("ack does not match state"));
                        }
                        st.acks.insert(p);
                    }
                    other => return Err(f.malformed(format!("timer kind `{other}`"))),
                }
            }
            Opcode::SeSubmit => {
                f.expect_len(2)?;
                let p = f.player(0)?;
                if st.phase != ShowdownPhase::Composing || st.player(&p).is_none() {
                    return Err(f.malformed("submission outside composing"));
                }
                if st.submissions.contains_key(&p) {
                    return Err(f.malformed("duplicate submission"));
                }
                st.submissions.insert(
                    p,
                    Submission {
                        se: f.str(1)?.to_string(),
                        evaluation: None,
                    },
                );
                if st.submissions.len() == st.players.len() {
                    st.phase = ShowdownPhase::Scoring;
                }
            }
            Opcode::RoundResult => {
                f.expect_len(10)?;
                if st.phase != ShowdownPhase::Scoring {
                    return Err(f.malformed("result outside scoring"));
                }
                check_draw("round", st.round_no, f.parse(0)?)?;
                check_draw("stake", st.stake, f.parse(1)?)?;
                let winner = match f.str(2)? {
                    "-" => None,
                    _ => Some(f.player(2)?),
                };
                let awarded: u32 = f.parse(3)?;
                let mut scores = Vec::with_capacity(2);
                for (k, base) in [4usize, 7].into_iter().enumerate() {
                    let id = f.player(base)?;
                    check_draw("player order", &st.players[k].id, &id)?;
                    let score: u8 = f.parse(base + 1)?;
                    let eval = Evaluation::from_wire(f.str(base + 2)?).map_err(|e| f.malformed(e.to_string()))?;
                    if eval.score != score {
                        return Err(f.malformed("score does not match evaluation"));
                    }
                    scores.push((id, eval));
                }
                let expected_winner = match scores[0].1.score.cmp(&scores[1].1.score) {
                    std::cmp::Ordering::Greater => Some(scores[0].0.clone()),
                    std::cmp::Ordering::Less => Some(scores[1].0.clone()),
                    std::cmp::Ordering::Equal => None,
                };
                check_draw("winner", &expected_winner, &winner)?;
                let expected_award = if winner.is_some() { st.stake } else { 0 };
                check_draw("award", expected_award, awarded)?;
                for (id, eval) in scores {
                    if let Some(sub) = st.submissions.get_mut(&id) {
                        sub.evaluation = Some(eval);
                    }
                }
                if let Some(w) = &winner {
                    st.player_mut(w).expect("winner is a player").score += awarded;
                }
                st.history.push(RoundRecord {
                    round: st.round_no,
                    stake: st.stake,
                    winner: winner.clone(),
                    awarded,
                });
                st.stake = if winner.is_none() { 2 } else { 1 };
            }
            Opcode::MatchResult => {
                f.expect_len(6)?;
                let winner = match f.str(0)? {
                    "-" => None,
                    _ => Some(f.player(0)?),
                };
                let outcome: MatchOutcome = f
                    .parse::<String>(1)?
                    .parse()
                    .map_err(|_| f.malformed("unknown outcome"))?;
                for (k, base) in [2usize, 4].into_iter().enumerate() {
                    check_draw("player order", &st.players[k].id, &f.player(base)?)?;
                    check_draw("final score", st.players[k].score, f.parse(base + 1)?)?;
                }
                st.result = Some(MatchResult { winner, outcome });
                st.phase = ShowdownPhase::Finished;
                st.acks.clear();
            }
            Opcode::Leave => {
                f.expect_len(1)?;
                let p = f.player(0)?;
                match st.player_mut(&p) {
                    Some(pl) if pl.active => pl.active = false,
                    _ => return Err(f.malformed("leave by inactive player")),
                }
            }
            Opcode::Error => {}
            other => {
                return Err(GameError::MalformedEvent {
                    opcode: other.as_str(),
                    detail: "not a Showdown event".into(),
                })
            }
        }
        Ok(())
    }
}

fn scheduled(phase: ShowdownPhase, spec: TimerSpec) -> ControlMessage {
    // Runtime guard alongside the type-level one; the config is the only source.
    assert!(TimerSpec::is_valid(spec.secs()), "unschedulable timer");
    timer_start(phase.as_str(), spec.secs())
}
