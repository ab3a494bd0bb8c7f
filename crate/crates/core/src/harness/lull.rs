//! Idle-time measurement from a room's event log.
//!
//! A player is idle while the game is running, they are still in it, and the
//! current state offers them no action. The log is replayed record by record
//! and each player's idle time is cut into segments at every change of
//! period (MiBoard turn or Showdown round) or phase, so a segment can be
//! attributed to exactly one phase of one period.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::content::Content;
use crate::event_log::LogRecord;
use crate::replay::{ReplayError, Replayer};
use crate::types::{GameType, PlayerId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdleInterval {
    pub period: u32,
    pub phase: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl IdleInterval {
    pub fn secs(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerLull {
    pub player: PlayerId,
    /// Zero-length segments are not recorded.
    pub intervals: Vec<IdleInterval>,
}

impl PlayerLull {
    pub fn total_secs(&self) -> f64 {
        self.intervals.iter().map(IdleInterval::secs).fold(0.0, |a, b| a + b)
    }

    /// Longest unbroken stretch of idleness, joining segments that abut.
    pub fn max_secs(&self) -> f64 {
        let mut best = 0u64;
        let mut run: Option<(u64, u64)> = None;
        for iv in &self.intervals {
            run = match run {
                Some((s, e)) if e == iv.start_ms => Some((s, iv.end_ms)),
                _ => Some((iv.start_ms, iv.end_ms)),
            };
            let (s, e) = run.expect("just set");
            best = best.max(e - s);
        }
        best as f64 / 1000.0
    }

    pub fn idle_in_period(&self, period: u32) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.period == period)
            .map(IdleInterval::secs)
            .fold(0.0, |a, b| a + b)
    }

    pub fn idle_in_phase(&self, period: u32, phase: &str) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.period == period && i.phase == phase)
            .map(IdleInterval::secs)
            .fold(0.0, |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LullReport {
    pub game_type: GameType,
    pub start_ms: u64,
    pub end_ms: u64,
    /// Periods begun: MiBoard turns or Showdown rounds.
    pub periods: u32,
    pub rounds_completed: u32,
    /// MiBoard only: who read in each turn.
    pub readers: BTreeMap<u32, PlayerId>,
    pub players: Vec<PlayerLull>,
}

impl LullReport {
    pub fn duration_secs(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }

    pub fn player(&self, id: &PlayerId) -> Option<&PlayerLull> {
        self.players.iter().find(|p| &p.player == id)
    }

    pub fn total_secs(&self) -> f64 {
        self.players.iter().map(PlayerLull::total_secs).fold(0.0, |a, b| a + b)
    }

    pub fn max_secs(&self) -> f64 {
        self.players.iter().map(PlayerLull::max_secs).fold(0.0, f64::max)
    }

    /// Idle seconds per player per period.
    pub fn mean_secs(&self) -> f64 {
        let slots = self.players.len() as f64 * f64::from(self.periods);
        if slots == 0.0 {
            0.0
        } else {
            self.total_secs() / slots
        }
    }

    /// MiBoard: `(turn, guesser, idle)` for every player who was not the
    /// Reader of that turn.
    pub fn guesser_idle_per_turn(&self) -> Vec<(u32, PlayerId, f64)> {
        let mut out = Vec::new();
        for (&turn, reader) in &self.readers {
            for p in self.players.iter().filter(|p| &p.player != reader) {
                out.push((turn, p.player.clone(), p.idle_in_period(turn)));
            }
        }
        out
    }
}

/// Replays `records` and measures idle time for every player.
pub fn measure(config: &Config, content: Arc<Content>, records: &[LogRecord]) -> Result<LullReport, ReplayError> {
    let mut replayer = Replayer::new(config.clone(), content);
    let mut open: BTreeMap<PlayerId, (u32, &'static str, u64)> = BTreeMap::new();
    let mut lulls: BTreeMap<PlayerId, Vec<IdleInterval>> = BTreeMap::new();
    let mut readers = BTreeMap::new();
    let mut start_ms = None;
    let mut end_ms = 0;
    let mut order = Vec::new();

    for rec in records {
        if !replayer.feed(rec)? {
            continue;
        }
        let t = rec.wall_time_ms.max(0) as u64;
        let game = replayer.game().expect("feed returned true");
        if start_ms.is_none() {
            start_ms = Some(t);
            order = game.players();
        }
        end_ms = t;
        if let crate::game::Game::MiBoard(e) = game {
            if e.state().turn_no > 0 {
                readers
                    .entry(e.state().turn_no)
                    .or_insert_with(|| e.state().reader_id().clone());
            }
        }
        let (period, phase) = (game.period(), game.phase());
        let running = !game.is_finished();
        let active = game.active_players();
        for p in &order {
            let idle = running && active.contains(p) && !game.has_available_action(p);
            let here = (period, phase);
            if let Some(&(op, oph, since)) = open.get(p) {
                if idle && (op, oph) == here {
                    continue;
                }
                open.remove(p);
                if t > since {
                    lulls.entry(p.clone()).or_default().push(IdleInterval {
                        period: op,
                        phase: oph.to_string(),
                        start_ms: since,
                        end_ms: t,
                    });
                }
            }
            if idle {
                open.insert(p.clone(), (period, phase, t));
            }
        }
    }
    let game = replayer.finish()?;
    Ok(LullReport {
        game_type: game.game_type(),
        start_ms: start_ms.unwrap_or(0),
        end_ms,
        periods: game.period(),
        rounds_completed: game.rounds_completed(),
        readers,
        players: order
            .into_iter()
            .map(|p| PlayerLull {
                intervals: lulls.remove(&p).unwrap_or_default(),
                player: p,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateDiff {
    pub first: f64,
    pub second: f64,
    /// `first - second`.
    pub difference: f64,
}

impl AggregateDiff {
    fn of(first: f64, second: f64) -> AggregateDiff {
        AggregateDiff {
            first,
            second,
            difference: first - second,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LullComparison {
    pub first_game: GameType,
    pub second_game: GameType,
    pub max: AggregateDiff,
    pub mean: AggregateDiff,
    pub total: AggregateDiff,
    /// Set when one report is MiBoard and the other Showdown.
    pub showdown_max_lower: Option<bool>,
    pub showdown_mean_lower: Option<bool>,
}

pub fn compare_lulls(a: &LullReport, b: &LullReport) -> LullComparison {
    let max = AggregateDiff::of(a.max_secs(), b.max_secs());
    let mean = AggregateDiff::of(a.mean_secs(), b.mean_secs());
    let total = AggregateDiff::of(a.total_secs(), b.total_secs());
    let showdown_lower = |d: &AggregateDiff| match (a.game_type, b.game_type) {
        (GameType::Showdown, GameType::MiBoard) => Some(d.first < d.second),
        (GameType::MiBoard, GameType::Showdown) => Some(d.second < d.first),
        _ => None,
    };
    LullComparison {
        first_game: a.game_type,
        second_game: b.game_type,
        showdown_max_lower: showdown_lower(&max),
        showdown_mean_lower: showdown_lower(&mean),
        max,
        mean,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(game_type: GameType, idle: &[(u64, u64)]) -> LullReport {
        LullReport {
            game_type,
            start_ms: 0,
            end_ms: 100_000,
            periods: 2,
            rounds_completed: 1,
            readers: BTreeMap::new(),
            players: vec![PlayerLull {
                player: PlayerId::new("p").unwrap(),
                intervals: idle
                    .iter()
                    .map(|&(s, e)| IdleInterval {
                        period: 1,
                        phase: "X".into(),
                        start_ms: s,
                        end_ms: e,
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn identical_reports_compare_equal() {
        let r = report(GameType::MiBoard, &[(0, 5_000), (9_000, 10_000)]);
        let c = compare_lulls(&r, &r);
        assert_eq!(c.max.difference, 0.0);
        assert_eq!(c.mean.difference, 0.0);
        assert_eq!(c.total.difference, 0.0);
        assert_eq!(c.showdown_max_lower, None);
    }

    #[test]
    fn empty_reports_have_zero_aggregates() {
        let r = report(GameType::Showdown, &[]);
        assert_eq!((r.max_secs(), r.mean_secs(), r.total_secs()), (0.0, 0.0, 0.0));
        let c = compare_lulls(&r, &r);
        assert_eq!((c.max.first, c.mean.second, c.total.difference), (0.0, 0.0, 0.0));
    }

    #[test]
    fn abutting_segments_join_for_max() {
        let r = report(GameType::MiBoard, &[(0, 5_000), (5_000, 8_000), (9_000, 10_000)]);
        assert_eq!(r.players[0].max_secs(), 8.0);
        assert_eq!(r.total_secs(), 9.0);
        assert_eq!(r.mean_secs(), 4.5);
    }

    #[test]
    fn showdown_side_detected_either_order() {
        let m = report(GameType::MiBoard, &[(0, 30_000)]);
        let s = report(GameType::Showdown, &[]);
        assert_eq!(compare_lulls(&m, &s).showdown_mean_lower, Some(true));
        assert_eq!(compare_lulls(&s, &m).showdown_max_lower, Some(true));
    }
}
