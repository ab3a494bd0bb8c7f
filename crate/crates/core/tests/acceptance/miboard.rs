use std::sync::Arc;

use segames_core::config::Config;
use segames_core::content::Content;
use segames_core::evaluator::{Evaluator, Scorer};
use segames_core::game::Game;
use segames_core::miboard::{CmbArgument, MiBoardAction, MiBoardEngine, MiBoardPhase};
use segames_core::protocol::ControlMessage;
use segames_core::types::{GameType, PlayerId};

use crate::ensure;

pub const SE: &str = "I think this sentence explains how the process begins and links it to earlier ideas.";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Players always act.
    Act,
    /// Every phase runs out its timer.
    Timeouts,
    /// Alternates acting and timing out.
    Mixed,
}

pub fn players(n: usize) -> Vec<PlayerId> {
    (1..=n).map(|i| PlayerId::new(format!("p{i}")).unwrap()).collect()
}

/// The next action a scripted table takes. Even-indexed guessers name the
/// card; odd-indexed ones miss, so both scoring branches and the discussion
/// phase are exercised.
pub fn policy(e: &MiBoardEngine, content: &Content) -> MiBoardAction {
    let st = e.state();
    let reader = st.reader_id().clone();
    match st.phase {
        MiBoardPhase::AwaitingSe => MiBoardAction::SubmitSe(reader, SE.into()),
        MiBoardPhase::Identification => {
            let (i, g) = st
                .guessers()
                .enumerate()
                .find(|(_, g)| !st.pending_idents.contains_key(*g))
                .expect("identification phase with everyone submitted");
            let card = st.current_card.clone().unwrap();
            let strategy = if i % 2 == 0 {
                content.strategies.iter().find(|s| s.id == card).unwrap()
            } else {
                content.strategies.iter().find(|s| s.id != card).unwrap()
            };
            let se_len = st.current_se.as_deref().unwrap_or("").chars().count();
            MiBoardAction::Identify(
                g.clone(),
                CmbArgument {
                    strategy: strategy.id.clone(),
                    reason: strategy.reasons[0].id.clone(),
                    start: 0,
                    end: se_len,
                },
            )
        }
        MiBoardPhase::Verification => MiBoardAction::Verify(reader, st.current_card.clone().unwrap()),
        MiBoardPhase::Discussion => MiBoardAction::EndDiscussion(reader),
        MiBoardPhase::RollMove => MiBoardAction::Roll(reader),
        MiBoardPhase::Event => MiBoardAction::DrawEvent(reader),
        MiBoardPhase::Finished => unreachable!("policy asked to act in a finished game"),
    }
}

pub fn scorer() -> Arc<dyn Scorer> {
    Arc::new(Evaluator::new(Default::default()).unwrap())
}

pub fn start(config: &Config, content: &Arc<Content>, n: usize, seed: u64) -> (Game, Game, Vec<ControlMessage>) {
    let text = content.texts[0].id.clone();
    let (game, events) = Game::start(
        GameType::MiBoard,
        config,
        content.clone(),
        scorer(),
        &text,
        seed,
        &players(n),
    )
    .unwrap();
    let mut replica = Game::replica(config, content.clone(), &events[0]).unwrap();
    for ev in &events[1..] {
        replica.apply(ev).unwrap();
    }
    (game, replica, events)
}

fn engine(g: &Game) -> &MiBoardEngine {
    match g {
        Game::MiBoard(e) => e,
        Game::Showdown(_) => unreachable!(),
    }
}

pub struct RunStats {
    pub steps: usize,
    pub finished: bool,
}

const TURNS: u32 = 3;
const STEP_BOUND: usize = 400;

/// Plays up to three turns, injecting `departure = (step, seat)` if given.
fn run_one(
    config: &Config,
    content: &Arc<Content>,
    n: usize,
    seed: u64,
    mode: Mode,
    departure: Option<(usize, usize)>,
) -> Result<RunStats, String> {
    let (mut game, mut replica, _) = start(config, content, n, seed);
    let seats = players(n);
    let mut step = 0;
    loop {
        game.check_invariants()
            .map_err(|e| format!("step {step}: invariant broken: {e}"))?;
        ensure(game.state_json() == replica.state_json(), || {
            format!("step {step}: replica differs from authority")
        })?;
        if game.is_finished() || game.period() > TURNS {
            return Ok(RunStats {
                steps: step,
                finished: game.is_finished(),
            });
        }
        ensure(step < STEP_BOUND, || {
            format!("no progress after {STEP_BOUND} steps (deadlock)")
        })?;
        let timer = game
            .timer()
            .ok_or_else(|| format!("step {step}: running game without a timer"))?;
        let anyone_can_act = seats.iter().any(|p| game.has_available_action(p));
        ensure(anyone_can_act, || {
            format!("step {step}: nobody has an action in {}", game.phase())
        })?;

        let events = match departure {
            Some((at, seat)) if at == step => {
                let who = seats[seat].clone();
                game.leave(vec![who])
                    .map_err(|e| format!("step {step}: leave refused: {e}"))?
            }
            _ => {
                let act = match mode {
                    Mode::Act => true,
                    Mode::Timeouts => false,
                    Mode::Mixed => step % 2 == 0,
                };
                if act {
                    let action = policy(engine(&game), content);
                    let Game::MiBoard(e) = &mut game else { unreachable!() };
                    e.step(action.clone())
                        .map_err(|err| format!("step {step}: {action:?} refused: {err}"))?
                } else {
                    game.timeout(timer.epoch)
                        .map_err(|e| format!("step {step}: timeout refused: {e}"))?
                }
            }
        };
        for ev in &events {
            replica
                .apply(ev)
                .map_err(|e| format!("step {step}: replica rejected {ev:?}: {e}"))?;
        }
        step += 1;
    }
}

pub fn run() -> crate::Outcome {
    let content = Arc::new(Content::builtin());
    let mut runs = 0;
    let mut finished = 0;
    let mut max_steps = 0;
    for board_length in [30, 5] {
        let mut config = Config::default();
        config.miboard.board_length = board_length;
        for n in [3, 4] {
            for mode in [Mode::Act, Mode::Timeouts, Mode::Mixed] {
                for seed in [1, 2] {
                    let base = run_one(&config, &content, n, seed, mode, None)
                        .map_err(|e| format!("{n} players, {mode:?}, board {board_length}, no departure: {e}"))?;
                    runs += 1;
                    for at in 0..=base.steps {
                        for seat in 0..n {
                            let r = run_one(&config, &content, n, seed, mode, Some((at, seat))).map_err(|e| {
                                format!("{n} players, {mode:?}, board {board_length}, seed {seed}, seat {seat} leaves at step {at}: {e}")
                            })?;
                            runs += 1;
                            finished += usize::from(r.finished);
                            max_steps = max_steps.max(r.steps);
                        }
                    }
                }
            }
        }
    }
    Ok(format!(
        "{runs} runs (3 and 4 players, {TURNS} turns, every single-departure point, 3 driving modes, 2 board sizes): no deadlock, invariants hold, replica == authority at every step ({finished} reached GAME_OVER, longest {max_steps} steps)"
    ))
}
