//! Scripted bots playing complete games against the real server on a
//! simulated clock.
//!
//! Bots talk to [`Server`] through encoded frames exactly as network clients
//! do, keep a replica of the game built from the broadcasts, and act after a
//! configurable think time. One scheduler orders every bot action and server
//! timer, so a scenario is a pure function of its seed and scripts. Idle time
//! is then measured from the room's event log (see [`lull`]).

mod bot;
pub mod lull;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

pub use bot::{BotScript, Departure, IdentPolicy, ThinkTime, DEFAULT_SE_CORPUS};
pub use lull::{compare_lulls, IdleInterval, LullComparison, LullReport, PlayerLull};

use crate::config::Config;
use crate::content::Content;
use crate::evaluator::{Evaluator, Scorer};
use crate::event_log::{EventLog, LogRecord};
use crate::game::Game;
use crate::protocol::Frame;
use crate::replay::{replay_room, ReplayError};
use crate::rng::derive_seed;
use crate::server::{ConnId, Outgoing, Server};
use crate::types::{GameType, PlayerId, RoomId};
use bot::Bot;

/// Default simulated-time cap: six hours.
pub const DEFAULT_CAP_MS: u64 = 6 * 3600 * 1000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario still running at simulated time {at_ms} ms")]
    ScenarioTimeout { at_ms: u64 },
    #[error("protocol violation seen by {bot}: {detail}\n  frame: {frame}")]
    ProtocolViolation {
        bot: PlayerId,
        frame: String,
        detail: String,
    },
    #[error("bot {bot} replica diverged from the log\n  bot: {bot_state}\n  log: {log_state}")]
    ReplicaDiverged {
        bot: PlayerId,
        bot_state: String,
        log_state: String,
    },
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

pub struct Scenario {
    pub game_type: GameType,
    pub scripts: Vec<BotScript>,
    pub seed: u64,
    pub config: Config,
    pub content: Arc<Content>,
    pub scorer: Arc<dyn Scorer>,
    pub cap_ms: u64,
}

impl Scenario {
    /// Built-in content, default configuration and the default evaluator.
    pub fn new(game_type: GameType, scripts: Vec<BotScript>, seed: u64) -> Scenario {
        let config = Config::default();
        let scorer = Arc::new(Evaluator::new(config.scoring.clone()).expect("default scoring config is valid"));
        Scenario {
            game_type,
            scripts,
            seed,
            config,
            content: Arc::new(Content::builtin()),
            scorer,
            cap_ms: DEFAULT_CAP_MS,
        }
    }

    /// `n` bots sharing one script.
    pub fn uniform(game_type: GameType, n: usize, script: BotScript, seed: u64) -> Scenario {
        Scenario::new(game_type, vec![script; n], seed)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let n = self.scripts.len();
        if n < self.game_type.min_players() || n > self.game_type.max_players() {
            return Err(HarnessError::InvalidScenario(format!(
                "{} takes {} to {} players, got {n}",
                self.game_type,
                self.game_type.min_players(),
                self.game_type.max_players()
            )));
        }
        for (i, s) in self.scripts.iter().enumerate() {
            if !s.think.is_valid() {
                return Err(HarnessError::InvalidScenario(format!(
                    "bot {} think time must be positive",
                    i + 1
                )));
            }
            if s.se_corpus.iter().all(|se| se.trim().is_empty()) {
                return Err(HarnessError::InvalidScenario(format!(
                    "bot {} has no self-explanations",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub game_type: GameType,
    pub seed: u64,
    pub bots: Vec<(PlayerId, BotScript)>,
    pub room: RoomId,
    pub log: Vec<LogRecord>,
    /// Replayed from the log.
    pub final_game: Game,
    /// The server's own engine at the end of the game.
    pub authoritative: Game,
    pub report: LullReport,
    pub rounds_completed: u32,
    pub frames_observed: usize,
    /// `ERROR` frames bots received in reply to their own requests.
    pub rejections: Vec<(PlayerId, String)>,
    /// Phase durations the server scheduled, in seconds.
    pub scheduled: Vec<(GameType, &'static str, u32)>,
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    at: u64,
    seq: u64,
    bot: usize,
    epoch: Option<u64>,
    frame: String,
}

struct Sim {
    server: Server,
    bots: Vec<Bot>,
    conns: Vec<ConnId>,
    queue: BinaryHeap<Reverse<Pending>>,
    seq: u64,
    frames: usize,
}

impl Sim {
    fn deliver(&mut self, out: Vec<Outgoing>) -> Result<(), HarnessError> {
        for o in out {
            let Some(i) = self.conns.iter().position(|&c| c == o.conn) else {
                continue;
            };
            self.frames += 1;
            self.bots[i]
                .receive(&o.frame)
                .map_err(|detail| HarnessError::ProtocolViolation {
                    bot: self.bots[i].id.clone(),
                    frame: o.frame.as_str().to_string(),
                    detail,
                })?;
        }
        Ok(())
    }

    fn plan(&mut self, now: u64) {
        for (i, bot) in self.bots.iter_mut().enumerate() {
            if let Some(intent) = bot.decide() {
                self.seq += 1;
                self.queue.push(Reverse(Pending {
                    at: now + intent.delay_ms,
                    seq: self.seq,
                    bot: i,
                    epoch: intent.epoch,
                    frame: intent.frame.into_string(),
                }));
            }
        }
    }

    fn send(&mut self, now: u64, bot: usize, frame: &str) -> Result<(), HarnessError> {
        let out = self.server.handle_frame(now, self.conns[bot], frame);
        self.deliver(out)?;
        self.plan(now);
        Ok(())
    }
}

/// Plays one game to completion with an in-memory log.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome, HarnessError> {
    run_scenario_with_log(scenario, EventLog::in_memory())
}

/// Plays one game to completion, writing to `log`.
pub fn run_scenario_with_log(scenario: &Scenario, log: EventLog) -> Result<ScenarioOutcome, HarnessError> {
    scenario.validate()?;
    let mut config = scenario.config.clone();
    config.server.seed = scenario.seed;
    let server = Server::new(config.clone(), scenario.content.clone(), scenario.scorer.clone(), log);
    let mut sim = Sim {
        server,
        bots: Vec::new(),
        conns: Vec::new(),
        queue: BinaryHeap::new(),
        seq: 0,
        frames: 0,
    };
    for (i, script) in scenario.scripts.iter().enumerate() {
        let id = PlayerId::new(format!("bot{}", i + 1)).expect("valid id");
        let seed = derive_seed(scenario.seed, 1_000 + i as u64);
        sim.bots.push(Bot::new(
            id,
            script.clone(),
            scenario.content.clone(),
            config.clone(),
            seed,
        ));
        let conn = sim.server.connect();
        sim.conns.push(conn);
    }
    for i in 0..sim.bots.len() {
        let join = format!("#!JOIN|{}|{}", sim.bots[i].id, scenario.game_type);
        sim.send(0, i, &join)?;
    }

    loop {
        let bot_at = sim.queue.peek().map(|Reverse(p)| p.at);
        let timer_at = sim.server.next_deadline();
        let now = match (bot_at, timer_at) {
            (None, None) => break,
            (Some(b), Some(t)) => b.min(t),
            (Some(b), None) => b,
            (None, Some(t)) => t,
        };
        if now > scenario.cap_ms {
            return Err(HarnessError::ScenarioTimeout { at_ms: now });
        }
        // Player actions win ties against timers due at the same instant.
        if bot_at == Some(now) {
            let Reverse(p) = sim.queue.pop().expect("peeked");
            if sim.bots[p.bot].still_current(p.epoch) {
                sim.send(now, p.bot, &p.frame)?;
            }
        } else {
            let out = sim.server.advance_to(now);
            sim.deliver(out)?;
            sim.plan(now);
        }
    }

    let room = RoomId::new("room-1");
    let log = sim.server.log().query(&room);
    let authoritative = sim
        .server
        .finished_game(&room)
        .cloned()
        .ok_or(HarnessError::ScenarioTimeout { at_ms: scenario.cap_ms })?;
    let final_game = replay_room(&config, scenario.content.clone(), &log)?;
    let log_state = final_game.state_json();
    for bot in sim.bots.iter().filter(|b| !b.departed) {
        let bot_state = bot.replica.as_ref().map(Game::state_json).unwrap_or_default();
        if bot_state != log_state {
            return Err(HarnessError::ReplicaDiverged {
                bot: bot.id.clone(),
                bot_state,
                log_state,
            });
        }
    }
    let report = lull::measure(&config, scenario.content.clone(), &log)?;
    Ok(ScenarioOutcome {
        game_type: scenario.game_type,
        seed: scenario.seed,
        bots: sim
            .bots
            .iter()
            .zip(&scenario.scripts)
            .map(|(b, s)| (b.id.clone(), s.clone()))
            .collect(),
        room,
        rounds_completed: final_game.rounds_completed(),
        final_game,
        authoritative,
        report,
        frames_observed: sim.frames,
        rejections: sim
            .bots
            .iter()
            .flat_map(|b| b.rejections.iter().map(|r| (b.id.clone(), r.clone())))
            .collect(),
        scheduled: sim.server.scheduled_durations().to_vec(),
        log,
    })
}

/// Frames the scenario's bots observed, re-encoded from the log, for callers
/// that want to confirm every logged event is a well-formed frame.
pub fn logged_frames(log: &[LogRecord]) -> Vec<Result<Frame, String>> {
    log.iter()
        .map(|r| {
            let msg = r.message().map_err(|e| e.to_string())?;
            crate::protocol::encode(&msg).map_err(|e| e.to_string())
        })
        .collect()
}

fn secs(x: f64) -> String {
    format!("{x:.3}")
}

impl ScenarioOutcome {
    /// The plain-text report written by `harness run`.
    pub fn render(&self) -> String {
        let r = &self.report;
        let mut s = String::new();
        let _ = writeln!(s, "# segames harness report v1");
        let _ = writeln!(s, "game\t{}", self.game_type);
        let _ = writeln!(s, "seed\t{}", self.seed);
        let _ = writeln!(s, "players\t{}", self.bots.len());
        for (id, script) in &self.bots {
            let depart = script
                .depart_at
                .as_ref()
                .map(|d| {
                    format!(
                        "{}{}",
                        d.period,
                        d.phase.as_deref().map(|p| format!("@{p}")).unwrap_or_default()
                    )
                })
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "bot\t{id}\tthink={}\tpolicy={:?}\tdepart={depart}",
                script.think, script.ident_policy
            );
        }
        let _ = writeln!(s, "duration_s\t{}", secs(r.duration_secs()));
        let _ = writeln!(s, "periods\t{}", r.periods);
        let _ = writeln!(s, "rounds_completed\t{}", self.rounds_completed);
        let _ = writeln!(s, "log_records\t{}", self.log.len());
        let _ = writeln!(s, "frames_observed\t{}", self.frames_observed);
        for p in &r.players {
            let _ = writeln!(
                s,
                "player\t{}\ttotal_s={}\tmax_s={}\tintervals={}",
                p.player,
                secs(p.total_secs()),
                secs(p.max_secs()),
                p.intervals.len()
            );
        }
        for p in &r.players {
            for iv in &p.intervals {
                let _ = writeln!(
                    s,
                    "idle\t{}\t{}\t{}\t{}\t{}\t{}",
                    p.player,
                    iv.period,
                    iv.phase,
                    secs(iv.start_ms as f64 / 1000.0),
                    secs(iv.end_ms as f64 / 1000.0),
                    secs(iv.secs())
                );
            }
        }
        let _ = writeln!(s, "aggregate\tmax_s={}", secs(r.max_secs()));
        let _ = writeln!(s, "aggregate\tmean_s={}", secs(r.mean_secs()));
        let _ = writeln!(s, "aggregate\ttotal_s={}", secs(r.total_secs()));
        s
    }
}

impl LullComparison {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# segames lull comparison v1");
        let _ = writeln!(s, "first\t{}", self.first_game);
        let _ = writeln!(s, "second\t{}", self.second_game);
        for (name, d) in [("max_s", &self.max), ("mean_s", &self.mean), ("total_s", &self.total)] {
            let _ = writeln!(
                s,
                "{name}\tfirst={}\tsecond={}\tdifference={}",
                secs(d.first),
                secs(d.second),
                secs(d.difference)
            );
        }
        let flag = |b: Option<bool>| b.map(|b| b.to_string()).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(s, "showdown_max_lower\t{}", flag(self.showdown_max_lower));
        let _ = writeln!(s, "showdown_mean_lower\t{}", flag(self.showdown_mean_lower));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_illegal_player_counts() {
        let s = Scenario::uniform(GameType::Showdown, 3, BotScript::fixed(5), 1);
        assert!(matches!(run_scenario(&s), Err(HarnessError::InvalidScenario(_))));
        let s = Scenario::uniform(GameType::MiBoard, 2, BotScript::fixed(5), 1);
        assert!(matches!(run_scenario(&s), Err(HarnessError::InvalidScenario(_))));
    }

    #[test]
    fn rejects_zero_think_time() {
        let mut script = BotScript::fixed(5);
        script.think = ThinkTime::Fixed { ms: 0 };
        let s = Scenario::uniform(GameType::Showdown, 2, script, 1);
        assert!(matches!(run_scenario(&s), Err(HarnessError::InvalidScenario(_))));
    }

    #[test]
    fn showdown_runs_to_completion() {
        let s = Scenario::uniform(GameType::Showdown, 2, BotScript::fixed(30), 3);
        let o = run_scenario(&s).unwrap();
        assert!(o.final_game.is_finished());
        assert!(o.rejections.is_empty(), "{:?}", o.rejections);
        assert!(o.rounds_completed >= 1);
        assert_eq!(o.report.total_secs(), 0.0);
    }

    #[test]
    fn miboard_runs_to_completion() {
        let s = Scenario::uniform(GameType::MiBoard, 4, BotScript::fixed(30), 7);
        let o = run_scenario(&s).unwrap();
        assert!(o.final_game.is_finished());
        assert!(o.rejections.is_empty(), "{:?}", o.rejections);
        assert!(o.rounds_completed >= 1);
        assert!(o.render().contains("aggregate\tmean_s="));
    }

    #[test]
    fn deterministic_under_seed() {
        let run = || {
            let s = Scenario::uniform(
                GameType::MiBoard,
                3,
                BotScript::fixed(12).with_policy(IdentPolicy::Random),
                11,
            );
            run_scenario(&s)
                .unwrap()
                .log
                .iter()
                .map(LogRecord::to_line)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
