use segames_core::config::Config;
use segames_core::harness::{run_scenario, BotScript, Scenario, ThinkTime};
use segames_core::showdown::TimerSpec;
use segames_core::types::GameType;

use crate::ensure;

// Compile-time half of the check: the shipped defaults are valid timer specs,
// and the validity predicate is usable in constant context.
const _: () = assert!(TimerSpec::is_valid(TimerSpec::DEFAULT_READING.secs()));
const _: () = assert!(TimerSpec::is_valid(TimerSpec::DEFAULT_COMPOSING.secs()));
const _: () = assert!(TimerSpec::is_valid(TimerSpec::DEFAULT_ROUND_RESULT.secs()));
const _: () = assert!(!TimerSpec::is_valid(3) && !TimerSpec::is_valid(0) && TimerSpec::is_valid(2));

fn with_think(think: ThinkTime) -> BotScript {
    let mut s = BotScript::fixed(1);
    s.think = think;
    s
}

pub fn run() -> crate::Outcome {
    for secs in 0..=600u32 {
        let ok = TimerSpec::new(secs).is_ok();
        let expected = secs > 0 && secs % 2 == 0;
        ensure(ok == expected, || format!("TimerSpec::new({secs}) accepted={ok}"))?;
    }
    for bad in ["composing_secs = 45", "reading_secs = 0", "round_result_secs = 7"] {
        let toml = format!("[showdown]\n{bad}\n");
        ensure(Config::from_toml_str(&toml).is_err(), || {
            format!("config accepted `{bad}`")
        })?;
    }

    let mut scheduled = 0;
    let configs = [
        "",
        "[showdown]\nreading_secs = 2\ncomposing_secs = 4\nround_result_secs = 2\n",
        "[showdown]\nreading_secs = 10\ncomposing_secs = 30\nround_result_secs = 6\nround_count = 2\n",
    ];
    for (i, cfg) in configs.iter().enumerate() {
        for (j, think) in [1_000u64, 3_000, 7_000, 45_000].into_iter().enumerate() {
            let mut scenario = Scenario::new(
                GameType::Showdown,
                vec![
                    with_think(ThinkTime::Fixed { ms: think }),
                    with_think(ThinkTime::Uniform {
                        min_ms: 500,
                        max_ms: think * 2,
                    }),
                ],
                (i * 10 + j) as u64,
            );
            scenario.config = Config::from_toml_str(cfg).map_err(|e| e.to_string())?;
            let o = run_scenario(&scenario).map_err(|e| format!("config {i}, think {think}: {e}"))?;
            for (game, phase, secs) in o.scheduled.iter().filter(|(g, _, _)| *g == GameType::Showdown) {
                ensure(*secs > 0 && secs % 2 == 0, || {
                    format!("{game} {phase} scheduled for {secs} s")
                })?;
                scheduled += 1;
            }
        }
    }
    Ok(format!(
        "const assertions on defaults; TimerSpec accepts exactly positive even values in 0..=600; odd/zero config rejected; {scheduled} scheduled Showdown timers across 12 bot matches all positive multiples of 2 s"
    ))
}
