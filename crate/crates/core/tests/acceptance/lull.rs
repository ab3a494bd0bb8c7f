use std::time::{Duration, Instant};

use segames_core::event_log::LogRecord;
use segames_core::harness::{compare_lulls, run_scenario, BotScript, Scenario};
use segames_core::types::{GameType, PlayerId};

use crate::ensure;

const THINK_S: u64 = 30;
const BUDGET: Duration = Duration::from_secs(5);

/// Independent reading of the log: for every MiBoard turn, the span from
/// `TURN_BEGIN` to the Reader's `SE_SUBMIT`, during which only the Reader can
/// act.
fn se_waits(log: &[LogRecord]) -> Vec<(u32, String, i64)> {
    let mut out = Vec::new();
    let mut turn = None;
    for r in log {
        match r.opcode.as_str() {
            "TURN_BEGIN" => turn = Some((r.fields[0].parse().unwrap(), r.fields[1].clone(), r.wall_time_ms)),
            "SE_SUBMIT" => {
                if let Some((t, reader, since)) = turn.take() {
                    out.push((t, reader, r.wall_time_ms - since));
                }
            }
            _ => {}
        }
    }
    out
}

/// Independent reading of the log: per Showdown round, the gap between the
/// two `SE_SUBMIT` records.
fn submit_gaps(log: &[LogRecord]) -> Vec<(String, i64)> {
    let mut out = Vec::new();
    let mut first: Option<(String, i64)> = None;
    for r in log {
        match r.opcode.as_str() {
            "ROUND_BEGIN" => first = None,
            "SE_SUBMIT" => match first.take() {
                None => first = Some((r.fields[0].clone(), r.wall_time_ms)),
                Some((p, t)) => out.push((p, r.wall_time_ms - t)),
            },
            _ => {}
        }
    }
    out
}

pub fn run() -> crate::Outcome {
    let started = Instant::now();
    let mi = run_scenario(&Scenario::uniform(GameType::MiBoard, 4, BotScript::fixed(THINK_S), 7))
        .map_err(|e| e.to_string())?;
    let sd = run_scenario(&Scenario::uniform(GameType::Showdown, 2, BotScript::fixed(THINK_S), 7))
        .map_err(|e| e.to_string())?;
    let uneven = run_scenario(&Scenario::new(
        GameType::Showdown,
        vec![BotScript::fixed(20), BotScript::fixed(30)],
        7,
    ))
    .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    ensure(mi.rounds_completed >= 1, || "MiBoard completed no full round".into())?;
    let per_turn = mi.report.guesser_idle_per_turn();
    ensure(!per_turn.is_empty(), || "no MiBoard turns measured".into())?;
    let min_guesser = per_turn.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    for (turn, p, idle) in &per_turn {
        ensure(*idle >= THINK_S as f64, || {
            format!("turn {turn}: guesser {p} idle {idle} s < {THINK_S} s")
        })?;
    }
    for (turn, reader, wait_ms) in se_waits(&mi.log) {
        ensure(wait_ms >= (THINK_S * 1000) as i64, || {
            format!("turn {turn}: SE arrived after {wait_ms} ms")
        })?;
        for p in mi.report.players.iter().filter(|p| p.player.as_str() != reader) {
            let idle = p.idle_in_phase(turn, "AWAITING_SE");
            ensure(idle * 1000.0 == wait_ms as f64, || {
                format!(
                    "turn {turn}: {} idle {idle} s in AWAITING_SE, log says {wait_ms} ms",
                    p.player
                )
            })?;
        }
    }

    for p in &sd.report.players {
        for round in 1..=sd.report.periods {
            let idle = p.idle_in_period(round);
            ensure(idle == 0.0, || {
                format!("Showdown round {round}: {} idle {idle} s", p.player)
            })?;
        }
    }

    let fast = PlayerId::new("bot1").unwrap();
    let gaps = submit_gaps(&uneven.log);
    ensure(
        !gaps.is_empty() && gaps.iter().all(|(p, g)| p == fast.as_str() && *g == 10_000),
        || format!("submit gaps {gaps:?}"),
    )?;
    let fast_lull = uneven.report.player(&fast).unwrap();
    for round in 1..=uneven.report.periods {
        let idle = fast_lull.idle_in_phase(round, "COMPOSING");
        ensure(idle == 10.0, || {
            format!("round {round}: faster bot idle {idle} s in COMPOSING, expected 10")
        })?;
    }

    let cmp = compare_lulls(&mi.report, &sd.report);
    ensure(cmp.showdown_mean_lower == Some(true), || format!("comparison {cmp:?}"))?;
    ensure(cmp.showdown_max_lower == Some(true), || format!("comparison {cmp:?}"))?;
    ensure(elapsed < BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "MiBoard 4x{THINK_S}s: {} turns, {} rounds, min guesser idle/turn {min_guesser:.1} s (>= {THINK_S}); Showdown 2x{THINK_S}s: idle 0 s in all {} rounds; 20s vs 30s: faster bot idles 10.0 s per round; mean idle Showdown {:.3} < MiBoard {:.3}; {:.2}s wall < 5s",
        mi.report.periods,
        mi.rounds_completed,
        sd.report.periods,
        cmp.mean.second,
        cmp.mean.first,
        elapsed.as_secs_f64()
    ))
}
