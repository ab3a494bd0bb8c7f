use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use segames_core::config::Config;
use segames_core::content::Content;
use segames_core::evaluator::Evaluator;
use segames_core::event_log::EventLog;
use segames_core::harness::{compare_lulls, run_scenario, BotScript, IdentPolicy, Scenario, ThinkTime};
use segames_core::server::Server;
use segames_core::types::{GameType, RoomId};
use segames_server::{batch, net};

#[derive(Parser)]
#[command(
    name = "segames",
    version,
    about = "Multiplayer self-explanation games server and tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the game server.
    Serve(ServeArgs),
    /// Drive scripted bot games and report idle time.
    #[command(subcommand)]
    Harness(HarnessCmd),
    /// Score a CSV of self-explanations (`se,text_id,sentence_index`).
    Score(ScoreArgs),
    /// Write one room's log records as CSV.
    Export(ExportArgs),
    /// Rebuild one room's final state from the log and print it as JSON.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding strategies.toml, event_cards.toml and texts/.
    /// The built-in bundle is used when omitted.
    #[arg(long)]
    content_dir: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        match &self.config {
            Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(Config::default()),
        }
    }

    fn content(&self) -> Result<Arc<Content>> {
        Ok(Arc::new(match &self.content_dir {
            Some(d) => Content::load(d).with_context(|| format!("loading content from {}", d.display()))?,
            None => Content::builtin(),
        }))
    }
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    /// TCP port for newline-framed connections.
    #[arg(long, default_value_t = 7700)]
    port: u16,
    /// Port for the WebSocket endpoint at /play.
    #[arg(long, default_value_t = 7701)]
    ws_port: u16,
    /// Address both listeners bind to.
    #[arg(long, default_value = "0.0.0.0")]
    bind: std::net::IpAddr,
    /// Directory for the per-day event log files.
    #[arg(long, default_value = "logs")]
    log_path: PathBuf,
}

#[derive(Subcommand)]
enum HarnessCmd {
    /// Play one scenario and write its report.
    Run(RunArgs),
    /// Play a MiBoard and a Showdown scenario with the same bots and compare
    /// their idle time.
    Compare(CompareArgs),
}

#[derive(Args)]
struct BotArgs {
    /// Think time in seconds: `30` or a uniform range `20-40`.
    #[arg(long, default_value = "30", value_parser = parse_think)]
    think: ThinkTime,
    /// Seed for think times, random guesses and the server's game seeds.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// How guessers pick a strategy: always_match, always_miss or random.
    #[arg(long, default_value = "always_match")]
    policy: IdentPolicy,
    /// Simulated-time cap in seconds.
    #[arg(long)]
    cap_secs: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    /// `miboard` or `showdown`.
    #[arg(long)]
    game: GameType,
    /// 3 or 4 for MiBoard, 2 for Showdown.
    #[arg(long)]
    players: usize,
    /// Make a bot leave: `BOT@PERIOD` or `BOT@PERIOD:PHASE`, where BOT is `2` or `bot2`.
    #[arg(long = "depart", value_parser = parse_departure)]
    departures: Vec<(usize, u32, Option<String>)>,
    #[command(flatten)]
    bots: BotArgs,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Player count for the MiBoard side.
    #[arg(long, default_value_t = 4)]
    miboard_players: usize,
    #[command(flatten)]
    bots: BotArgs,
    /// File for both reports and the comparison; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: Common,
    /// CSV with header `se,text_id,sentence_index`.
    #[arg(long)]
    input: PathBuf,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Directory holding the `events-YYYY-MM-DD.jsonl` files.
    #[arg(long, default_value = "logs")]
    log_path: PathBuf,
    #[arg(long)]
    room: String,
    /// CSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "logs")]
    log_path: PathBuf,
    #[arg(long)]
    room: String,
}

fn parse_think(s: &str) -> Result<ThinkTime, String> {
    let secs = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad think time {x:?}"));
    let think = match s.split_once('-') {
        Some((lo, hi)) => ThinkTime::Uniform {
            min_ms: (secs(lo)? * 1000.0).round() as u64,
            max_ms: (secs(hi)? * 1000.0).round() as u64,
        },
        None => ThinkTime::Fixed {
            ms: (secs(s)? * 1000.0).round() as u64,
        },
    };
    if think.is_valid() {
        Ok(think)
    } else {
        Err(format!("think time {s:?} must be positive with min <= max"))
    }
}

fn parse_departure(s: &str) -> Result<(usize, u32, Option<String>), String> {
    let bad = || format!("expected BOT@PERIOD or BOT@PERIOD:PHASE, got {s:?}");
    let (bot, rest) = s.split_once('@').ok_or_else(bad)?;
    let (period, phase) = match rest.split_once(':') {
        Some((p, ph)) => (p, Some(ph.to_ascii_uppercase())),
        None => (rest, None),
    };
    let bot: usize = bot.strip_prefix("bot").unwrap_or(bot).parse().map_err(|_| bad())?;
    let period: u32 = period.parse().map_err(|_| bad())?;
    if bot == 0 || period == 0 {
        return Err(bad());
    }
    Ok((bot, period, phase))
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn scenario(game: GameType, players: usize, bots: &BotArgs) -> Result<Scenario> {
    let mut script = BotScript::fixed(1).with_policy(bots.policy);
    script.think = bots.think;
    let mut s = Scenario::uniform(game, players, script, bots.seed);
    s.config = bots.common.config()?;
    s.content = bots.common.content()?;
    if let Some(cap) = bots.cap_secs {
        s.cap_ms = cap * 1000;
    }
    Ok(s)
}

fn harness(cmd: HarnessCmd) -> Result<()> {
    match cmd {
        HarnessCmd::Run(args) => {
            let mut s = scenario(args.game, args.players, &args.bots)?;
            for (bot, period, phase) in args.departures {
                let Some(script) = s.scripts.get_mut(bot - 1) else {
                    bail!("--depart names bot {bot} but there are {} players", args.players)
                };
                *script = script.clone().departing(period, phase.as_deref());
            }
            let outcome = run_scenario(&s)?;
            open_out(args.out.as_deref())?.write_all(outcome.render().as_bytes())?;
        }
        HarnessCmd::Compare(args) => {
            let mi = run_scenario(&scenario(GameType::MiBoard, args.miboard_players, &args.bots)?)?;
            let sd = run_scenario(&scenario(GameType::Showdown, 2, &args.bots)?)?;
            let cmp = compare_lulls(&mi.report, &sd.report);
            let mut out = open_out(args.out.as_deref())?;
            out.write_all(mi.render().as_bytes())?;
            out.write_all(b"\n")?;
            out.write_all(sd.render().as_bytes())?;
            out.write_all(b"\n")?;
            out.write_all(cmp.render().as_bytes())?;
        }
    }
    Ok(())
}

async fn serve(args: ServeArgs) -> Result<()> {
    let config = args.common.config()?;
    let content = args.common.content()?;
    let evaluator = Evaluator::new(config.scoring.clone())?;
    tracing::info!(texts = content.texts.len(), digest = content.digest(), "content loaded");
    std::fs::create_dir_all(&args.log_path).with_context(|| format!("creating {}", args.log_path.display()))?;
    let log =
        EventLog::open_dir(&args.log_path).with_context(|| format!("opening log at {}", args.log_path.display()))?;
    let server = Server::new(config, content, Arc::new(evaluator), log);
    let running = net::start(
        server,
        Some(SocketAddr::new(args.bind, args.port)),
        Some(SocketAddr::new(args.bind, args.ws_port)),
    )
    .await?;
    tracing::info!(
        tcp = ?running.tcp_addr,
        ws = ?running.ws_addr,
        path = net::WS_PATH,
        "listening"
    );
    tokio::signal::ctrl_c().await?;
    tracing::info!("shutting down");
    running.shutdown().await;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Cmd::Serve(args) => tokio::runtime::Runtime::new()?.block_on(serve(args)),
        Cmd::Harness(cmd) => harness(cmd),
        Cmd::Score(args) => {
            let config = args.common.config()?;
            let content = args.common.content()?;
            let evaluator = Evaluator::new(config.scoring)?;
            let input = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
            let n = batch::score_csv(input, open_out(args.output.as_deref())?, &content, &evaluator)?;
            tracing::info!(rows = n, "scored");
            Ok(())
        }
        Cmd::Export(args) => {
            let log = EventLog::open_dir(&args.log_path)?;
            let n = batch::export_room(&log, &RoomId::new(&args.room), open_out(args.out.as_deref())?)?;
            tracing::info!(records = n, "exported");
            Ok(())
        }
        Cmd::Replay(args) => {
            let log = EventLog::open_dir(&args.log_path)?;
            let game = batch::replay_from_log(
                &args.common.config()?,
                args.common.content()?,
                &log,
                &RoomId::new(&args.room),
            )?;
            println!("{}", game.state_json());
            Ok(())
        }
    }
}
