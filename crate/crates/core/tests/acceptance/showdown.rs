use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segames_core::config::Config;
use segames_core::content::Content;
use segames_core::evaluator::{EvalError, Evaluation, Scorer};
use segames_core::game::Game;
use segames_core::protocol::{ControlMessage, Opcode};
use segames_core::showdown::{ShowdownAction, ShowdownEngine, ShowdownPhase};
use segames_core::types::{GameType, PlayerId};

use crate::ensure;

const MATCHES: usize = 500;

/// Scores an explanation by the digit after `s=`; anything else scores 0.
fn stub() -> Arc<dyn Scorer> {
    Arc::new(|se: &str, _: &str, _: &str| -> Result<Evaluation, EvalError> {
        let score = se
            .strip_prefix("s=")
            .and_then(|r| r.chars().next())
            .and_then(|c| c.to_digit(10))
            .unwrap_or(0);
        Ok(Evaluation::with_score(score.min(3) as u8))
    })
}

fn pids() -> Vec<PlayerId> {
    vec![PlayerId::new("ann").unwrap(), PlayerId::new("ben").unwrap()]
}

fn new_match(config: &Config, seed: u64, text: usize) -> (ShowdownEngine, Vec<ControlMessage>) {
    let content = Arc::new(Content::builtin());
    let text_id = content.texts[text % content.texts.len()].id.clone();
    let (g, events) = Game::start(GameType::Showdown, config, content, stub(), &text_id, seed, &pids()).unwrap();
    let Game::Showdown(e) = g else { unreachable!() };
    (e, events)
}

fn step(e: &mut ShowdownEngine, log: &mut Vec<ControlMessage>, a: ShowdownAction) -> Result<(), String> {
    let ev = e.step(a.clone()).map_err(|err| format!("{a:?} refused: {err}"))?;
    log.extend(ev);
    Ok(())
}

fn play_round(e: &mut ShowdownEngine, log: &mut Vec<ControlMessage>, s1: u8, s2: u8) -> Result<(), String> {
    let [a, b] = [pids()[0].clone(), pids()[1].clone()];
    step(e, log, ShowdownAction::Ack(a.clone(), ShowdownPhase::Reading))?;
    step(e, log, ShowdownAction::Ack(b.clone(), ShowdownPhase::Reading))?;
    step(e, log, ShowdownAction::Submit(a.clone(), format!("s={s1}")))?;
    step(e, log, ShowdownAction::Submit(b.clone(), format!("s={s2}")))?;
    if !e.state().is_finished() {
        step(e, log, ShowdownAction::Ack(a, ShowdownPhase::RoundResult))?;
        step(e, log, ShowdownAction::Ack(b, ShowdownPhase::RoundResult))?;
    }
    Ok(())
}

fn stakes_begun(log: &[ControlMessage]) -> Vec<u32> {
    log.iter()
        .filter(|m| m.opcode == Opcode::RoundBegin)
        .map(|m| m.field(1).unwrap().parse().unwrap())
        .collect()
}

fn forced_tie() -> Result<String, String> {
    let mut config = Config::default();
    config.showdown.round_count = Some(3);
    let (mut e, mut log) = new_match(&config, 1, 0);
    play_round(&mut e, &mut log, 1, 1)?;
    play_round(&mut e, &mut log, 2, 1)?;
    play_round(&mut e, &mut log, 0, 3)?;
    let stakes = stakes_begun(&log);
    ensure(stakes.len() >= 3, || format!("only {} rounds began", stakes.len()))?;
    ensure(stakes[..3] == [1, 2, 1], || {
        format!("stakes {stakes:?}, expected [1, 2, 1] after tie then decided")
    })?;
    let awarded: Vec<String> = log
        .iter()
        .filter(|m| m.opcode == Opcode::RoundResult)
        .map(|m| format!("{}:{}", m.field(2).unwrap(), m.field(3).unwrap()))
        .collect();
    ensure(awarded[..3] == ["-:0", "ann:2", "ben:1"], || {
        format!("round results {awarded:?}")
    })?;
    Ok(format!("tie -> stake 2 -> decided -> stake 1 ({})", awarded.join(", ")))
}

/// Checks the stake law and point conservation from the broadcast stream
/// alone. Returns the points awarded.
fn audit(log: &[ControlMessage]) -> Result<u32, String> {
    let mut last_tied = false;
    let mut current_stake = None;
    let mut awarded_total = 0;
    let mut final_scores = None;
    for m in log {
        match m.opcode {
            Opcode::RoundBegin => {
                let stake: u32 = m.field(1).unwrap().parse().unwrap();
                let expected = if last_tied { 2 } else { 1 };
                ensure(stake == expected, || {
                    format!("round {} stake {stake}, expected {expected}", m.field(0).unwrap())
                })?;
                current_stake = Some(stake);
            }
            Opcode::RoundResult => {
                let stake: u32 = m.field(1).unwrap().parse().unwrap();
                ensure(Some(stake) == current_stake, || {
                    format!("result stake {stake} vs begun {current_stake:?}")
                })?;
                let winner = m.field(2).unwrap();
                let awarded: u32 = m.field(3).unwrap().parse().unwrap();
                let (s1, s2): (u8, u8) = (
                    m.field(5).unwrap().parse().unwrap(),
                    m.field(8).unwrap().parse().unwrap(),
                );
                let expected_winner = match s1.cmp(&s2) {
                    std::cmp::Ordering::Greater => m.field(4).unwrap(),
                    std::cmp::Ordering::Less => m.field(7).unwrap(),
                    std::cmp::Ordering::Equal => "-",
                };
                ensure(winner == expected_winner, || {
                    format!("scores {s1} vs {s2} but winner {winner}")
                })?;
                let expected_award = if winner == "-" { 0 } else { stake };
                ensure(awarded == expected_award, || {
                    format!("awarded {awarded} at stake {stake}")
                })?;
                awarded_total += awarded;
                last_tied = winner == "-";
            }
            Opcode::MatchResult => {
                let a: u32 = m.field(3).unwrap().parse().unwrap();
                let b: u32 = m.field(5).unwrap().parse().unwrap();
                final_scores = Some(a + b);
            }
            _ => {}
        }
    }
    let total = final_scores.ok_or("no MATCH_RESULT")?;
    ensure(total == awarded_total, || {
        format!("final scores sum {total}, decided stakes sum {awarded_total}")
    })?;
    Ok(awarded_total)
}

fn random_match(rng: &mut ChaCha8Rng, seed: u64) -> Result<(u32, usize), String> {
    let mut config = Config::default();
    config.showdown.round_count = Some(rng.gen_range(1..=5));
    config.showdown.max_bonus_rounds = rng.gen_range(1..=4);
    let (mut e, mut log) = new_match(&config, seed, rng.gen_range(0..4));
    let players = pids();
    for _ in 0..10_000 {
        let st = e.state();
        if st.is_finished() {
            let points = audit(&log)?;
            ensure(st.total_awarded() == points, || {
                "state and stream disagree on points".into()
            })?;
            return Ok((points, st.history.len()));
        }
        st.check_invariants()?;
        let roll = rng.gen_range(0..100);
        let action = if roll < 1 {
            ShowdownAction::Leave(vec![players[rng.gen_range(0..2)].clone()])
        } else if roll < 15 {
            ShowdownAction::Timeout(e.timer().ok_or("running without timer")?.epoch)
        } else {
            let ready: Vec<&PlayerId> = players.iter().filter(|p| st.has_available_action(p)).collect();
            if ready.is_empty() {
                ShowdownAction::Timeout(e.timer().ok_or("running without timer")?.epoch)
            } else {
                let p = ready[rng.gen_range(0..ready.len())].clone();
                match st.phase {
                    ShowdownPhase::Composing => ShowdownAction::Submit(p, format!("s={} words", rng.gen_range(0..=3))),
                    phase => ShowdownAction::Ack(p, phase),
                }
            }
        };
        step(&mut e, &mut log, action)?;
    }
    Err("match did not finish".into())
}

pub fn run() -> crate::Outcome {
    let tie = forced_tie()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5D0E);
    let mut points = 0;
    let mut rounds = 0;
    for i in 0..MATCHES {
        let (p, r) = random_match(&mut rng, i as u64).map_err(|e| format!("match {i}: {e}"))?;
        points += p;
        rounds += r;
    }
    Ok(format!(
        "{tie}; {MATCHES} randomized matches ({rounds} rounds, {points} points): every stake follows the tie rule and awarded == sum of decided-round stakes"
    ))
}
