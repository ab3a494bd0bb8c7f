use std::sync::Arc;

use segames_core::config::Config;
use segames_core::content::Content;
use segames_core::game::Game;
use segames_core::harness::{run_scenario, BotScript, IdentPolicy, Scenario};
use segames_core::miboard::{GameOverReason, MiBoardAction, MiBoardEngine, MiBoardPhase};
use segames_core::protocol::ControlMessage;
use segames_core::types::{GameType, PlayerId};

use crate::ensure;
use crate::miboard::{players, policy, start};

const PHASES: [MiBoardPhase; 6] = [
    MiBoardPhase::AwaitingSe,
    MiBoardPhase::Identification,
    MiBoardPhase::Verification,
    MiBoardPhase::Discussion,
    MiBoardPhase::RollMove,
    MiBoardPhase::Event,
];
const DEPART_TURN: u32 = 2;

fn play_out(e: &mut MiBoardEngine, content: &Content) -> Result<Vec<ControlMessage>, String> {
    let mut stream = Vec::new();
    for _ in 0..5_000 {
        if e.state().is_finished() {
            return Ok(stream);
        }
        let action = policy(e, content);
        stream.extend(
            e.step(action.clone())
                .map_err(|err| format!("{action:?} refused: {err}"))?,
        );
    }
    Err("game did not finish".into())
}

fn engine_check(content: &Arc<Content>, phase: MiBoardPhase, seat: usize) -> Result<usize, String> {
    let config = Config::default();
    let (game, _, _) = start(&config, content, 4, 99);
    let Game::MiBoard(mut e) = game else { unreachable!() };
    while !(e.state().turn_no == DEPART_TURN && e.state().phase == phase) {
        ensure(e.state().turn_no <= DEPART_TURN && !e.state().is_finished(), || {
            format!("{phase:?} never reached in turn {DEPART_TURN}")
        })?;
        e.step(policy(&e, content)).map_err(|err| err.to_string())?;
    }
    let who: PlayerId = players(4)[seat].clone();
    e.step(MiBoardAction::Leave(vec![who.clone()]))
        .map_err(|err| format!("leave refused: {err}"))?;
    let mut three = e.compacted();
    ensure(three.state().players.len() == 3, || {
        "compacted game does not have 3 seats".into()
    })?;
    let four_stream = play_out(&mut e, content)?;
    let three_stream = play_out(&mut three, content)?;
    if let Some(i) = (0..four_stream.len().max(three_stream.len())).find(|&i| four_stream.get(i) != three_stream.get(i))
    {
        return Err(format!(
            "{who} left in {phase:?}: streams differ at event {i}: 4-seat {:?} vs 3-seat {:?}",
            four_stream.get(i),
            three_stream.get(i)
        ));
    }
    let a = serde_json::to_string(e.compacted().state()).unwrap();
    let b = serde_json::to_string(three.state()).unwrap();
    ensure(a == b, || format!("{who} left in {phase:?}: final states differ"))?;
    Ok(four_stream.len())
}

fn harness_check(phase: MiBoardPhase) -> Result<u32, String> {
    let mut scripts = vec![BotScript::fixed(20).with_policy(IdentPolicy::AlwaysMiss); 4];
    scripts[1] = scripts[1].clone().departing(DEPART_TURN, Some(phase.as_str()));
    let o = run_scenario(&Scenario::new(GameType::MiBoard, scripts, 5)).map_err(|e| e.to_string())?;
    let Game::MiBoard(e) = &o.authoritative else {
        unreachable!()
    };
    let st = e.state();
    ensure(st.is_finished(), || "game did not finish".into())?;
    ensure(st.active_count() == 3, || {
        format!("{} active at the end", st.active_count())
    })?;
    let left = o.log.iter().any(|r| r.opcode == "LEAVE" && r.fields == ["bot2"]);
    ensure(left, || format!("bot2 never left during {phase:?}"))?;
    let reason = &st.outcome.as_ref().unwrap().reason;
    ensure(*reason == GameOverReason::BoardEnd, || {
        format!("game ended by {reason:?}")
    })?;
    ensure(o.rejections.is_empty(), || {
        format!("bots were refused: {:?}", o.rejections)
    })?;
    ensure(o.final_game.state_json() == o.authoritative.state_json(), || {
        "replay differs".into()
    })?;
    Ok(o.rounds_completed)
}

pub fn run() -> crate::Outcome {
    let content = Arc::new(Content::builtin());
    let mut compared = 0;
    let mut events = 0;
    for phase in PHASES {
        for seat in 0..4 {
            events += engine_check(&content, phase, seat)?;
            compared += 1;
        }
    }
    let mut rounds = Vec::new();
    for phase in PHASES {
        rounds.push(harness_check(phase).map_err(|e| format!("harness, departure in {phase:?}: {e}"))?);
    }
    Ok(format!(
        "{compared} departures (6 phases x 4 seats, turn {DEPART_TURN}): post-departure stream == 3-seat stream ({events} events compared); 6 bot games with a mid-game LEAVE completed with 3 players (rounds {rounds:?})"
    ))
}
