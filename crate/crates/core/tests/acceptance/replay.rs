use std::process::Command;
use std::sync::Arc;

use segames_core::config::Config;
use segames_core::content::Content;
use segames_core::event_log::{EventLog, LogRecord};
use segames_core::harness::{run_scenario, run_scenario_with_log, BotScript, IdentPolicy, Scenario};
use segames_core::replay::replay_room;
use segames_core::types::{GameType, RoomId};

use crate::ensure;

pub const CHILD_ENV: &str = "SEGAMES_ACCEPTANCE_CHILD";

fn durable_scenario() -> Scenario {
    Scenario::new(
        GameType::MiBoard,
        vec![
            BotScript::fixed(9),
            BotScript::fixed(14).with_policy(IdentPolicy::Random),
            BotScript::fixed(5)
                .with_policy(IdentPolicy::AlwaysMiss)
                .departing(3, Some("IDENTIFICATION")),
            BotScript::fixed(11),
        ],
        2024,
    )
}

/// Writer process: plays a game against a file-backed log, reports the final
/// state on stdout, then dies without any orderly shutdown.
pub fn child_main(dir: &str) {
    let log = EventLog::open_dir(dir).expect("open log dir");
    let o = run_scenario_with_log(&durable_scenario(), log).expect("scenario");
    println!("{}", o.log.len());
    println!("{}", o.authoritative.state_json());
    use std::io::Write;
    std::io::stdout().flush().unwrap();
    std::process::abort();
}

fn durability() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let out = Command::new(exe)
        .env(CHILD_ENV, dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(!out.status.success(), || "writer process was expected to abort".into())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    let (Some(count), Some(state)) = (lines.next(), lines.next()) else {
        return Err(format!(
            "writer printed {stdout:?}; stderr {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    };
    let count: usize = count.parse().map_err(|_| format!("bad record count {count:?}"))?;
    let reopened = EventLog::open_dir(dir.path()).map_err(|e| e.to_string())?;
    let records = reopened.query(&RoomId::new("room-1"));
    ensure(records.len() == count, || {
        format!("{} records after restart, writer acked {count}", records.len())
    })?;
    let again = EventLog::open_dir(dir.path())
        .map_err(|e| e.to_string())?
        .query(&RoomId::new("room-1"));
    ensure(again == records, || "second reopen returned different records".into())?;
    let game = replay_room(&Config::default(), Arc::new(Content::builtin()), &records).map_err(|e| e.to_string())?;
    ensure(game.state_json() == state, || {
        "state rebuilt after restart differs from the writer's final state".into()
    })?;
    let files = std::fs::read_dir(dir.path()).map_err(|e| e.to_string())?.count();
    Ok(format!(
        "writer aborted after {count} acked records in {files} file(s); reopened log replays to its final state"
    ))
}

fn replay_matches(label: &str, scenario: &Scenario) -> Result<usize, String> {
    let o = run_scenario(scenario).map_err(|e| format!("{label}: {e}"))?;
    ensure(o.authoritative.is_finished(), || format!("{label}: game not finished"))?;
    let direct = replay_room(&scenario.config, scenario.content.clone(), &o.log).map_err(|e| e.to_string())?;
    ensure(direct.state_json() == o.authoritative.state_json(), || {
        format!("{label}: replay differs from authority")
    })?;
    // Through the on-disk line format as well.
    let reparsed: Vec<LogRecord> = o
        .log
        .iter()
        .map(|r| LogRecord::parse_line(&r.to_line()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let via_text = replay_room(&scenario.config, scenario.content.clone(), &reparsed).map_err(|e| e.to_string())?;
    ensure(via_text.state_json() == o.authoritative.state_json(), || {
        format!("{label}: replay of reparsed lines differs")
    })?;
    Ok(o.log.len())
}

pub fn run() -> crate::Outcome {
    let mut games = 0;
    let mut records = 0;
    for seed in 0..6u64 {
        let mi3 = Scenario::uniform(
            GameType::MiBoard,
            3,
            BotScript::fixed(8).with_policy(IdentPolicy::Random),
            seed,
        );
        let mut mi4 = Scenario::uniform(
            GameType::MiBoard,
            4,
            BotScript::fixed(12).with_policy(IdentPolicy::AlwaysMiss),
            seed,
        );
        mi4.scripts[seed as usize % 4] = mi4.scripts[0].clone().departing(1 + seed as u32 % 3, None);
        let sd = Scenario::new(
            GameType::Showdown,
            vec![BotScript::fixed(10 + seed), BotScript::fixed(25)],
            seed,
        );
        let mut sd_forfeit = Scenario::uniform(GameType::Showdown, 2, BotScript::fixed(15), seed);
        sd_forfeit.scripts[1] = sd_forfeit.scripts[1].clone().departing(2, Some("COMPOSING"));
        for (label, s) in [
            ("miboard-3", &mi3),
            ("miboard-4-departure", &mi4),
            ("showdown", &sd),
            ("showdown-forfeit", &sd_forfeit),
        ] {
            records += replay_matches(&format!("{label} seed {seed}"), s)?;
            games += 1;
        }
    }
    let durable = durability()?;
    Ok(format!(
        "{games} completed games ({records} records) replay bit-identically, directly and via parsed lines; {durable}"
    ))
}
