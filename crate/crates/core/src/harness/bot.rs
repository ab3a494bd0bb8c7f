use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::content::Content;
use crate::game::Game;
use crate::protocol::{decode_frame, encode_control, ControlMessage, Frame, Message, Opcode};
use crate::rng::GameRng;
use crate::types::PlayerId;

/// How long a bot takes to compose a self-explanation or an identification.
/// Every other action is taken at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThinkTime {
    Fixed {
        ms: u64,
    },
    /// Inclusive range.
    Uniform {
        min_ms: u64,
        max_ms: u64,
    },
}

impl ThinkTime {
    pub fn secs(s: u64) -> ThinkTime {
        ThinkTime::Fixed { ms: s * 1000 }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            ThinkTime::Fixed { ms } => ms > 0,
            ThinkTime::Uniform { min_ms, max_ms } => min_ms > 0 && min_ms <= max_ms,
        }
    }

    fn sample(&self, rng: &mut GameRng) -> u64 {
        match *self {
            ThinkTime::Fixed { ms } => ms,
            ThinkTime::Uniform { min_ms, max_ms } => min_ms + rng.below((max_ms - min_ms + 1) as usize) as u64,
        }
    }
}

impl std::fmt::Display for ThinkTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThinkTime::Fixed { ms } => write!(f, "fixed:{ms}ms"),
            ThinkTime::Uniform { min_ms, max_ms } => write!(f, "uniform:{min_ms}..={max_ms}ms"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IdentPolicy {
    /// Names the strategy on the broadcast card.
    AlwaysMatch,
    /// Names the first strategy that is not on the card.
    AlwaysMiss,
    /// Uniform over the strategy set.
    Random,
}

impl std::str::FromStr for IdentPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "always_match" | "match" => Ok(IdentPolicy::AlwaysMatch),
            "always_miss" | "miss" => Ok(IdentPolicy::AlwaysMiss),
            "random" => Ok(IdentPolicy::Random),
            other => Err(format!("unknown ident policy `{other}`")),
        }
    }
}

/// When a bot walks away: at the first state in period `period` (and in
/// `phase`, if given) where it is still playing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Departure {
    pub period: u32,
    pub phase: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotScript {
    pub think: ThinkTime,
    /// Cycled, one entry per self-explanation the bot writes.
    pub se_corpus: Vec<String>,
    pub ident_policy: IdentPolicy,
    pub depart_at: Option<Departure>,
}

pub const DEFAULT_SE_CORPUS: &[&str] = &[
    "This sentence explains how the process starts, and it builds on what the previous sentence said about the structure involved.",
    "In other words, each step depends on the one before it, which I remember from the earlier part of the passage.",
    "I think the author means that the change happens gradually because of energy and pressure acting over time.",
];

impl BotScript {
    pub fn fixed(think_secs: u64) -> BotScript {
        BotScript {
            think: ThinkTime::secs(think_secs),
            se_corpus: DEFAULT_SE_CORPUS.iter().map(|s| s.to_string()).collect(),
            ident_policy: IdentPolicy::AlwaysMatch,
            depart_at: None,
        }
    }

    pub fn departing(mut self, period: u32, phase: Option<&str>) -> BotScript {
        self.depart_at = Some(Departure {
            period,
            phase: phase.map(str::to_string),
        });
        self
    }

    pub fn with_policy(mut self, policy: IdentPolicy) -> BotScript {
        self.ident_policy = policy;
        self
    }
}

/// What a bot wants to send and when.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Intent {
    pub delay_ms: u64,
    /// Timer epoch the action was planned in; `None` for departures.
    pub epoch: Option<u64>,
    pub frame: Frame,
}

#[derive(Debug)]
pub(crate) struct Bot {
    pub id: PlayerId,
    script: BotScript,
    content: Arc<Content>,
    rng: GameRng,
    pub replica: Option<Game>,
    acted_epoch: Option<u64>,
    se_written: usize,
    pub departed: bool,
    pub rejections: Vec<String>,
    config: crate::config::Config,
}

impl Bot {
    pub fn new(
        id: PlayerId,
        script: BotScript,
        content: Arc<Content>,
        config: crate::config::Config,
        seed: u64,
    ) -> Bot {
        Bot {
            id,
            script,
            content,
            rng: GameRng::from_seed(seed),
            replica: None,
            acted_epoch: None,
            se_written: 0,
            departed: false,
            rejections: Vec::new(),
            config,
        }
    }

    /// Decodes and applies one frame from the server.
    pub fn receive(&mut self, frame: &Frame) -> Result<(), String> {
        let msg = decode_frame(frame.as_str()).map_err(|e| format!("decode failed: {e}"))?;
        let Message::Control(c) = msg else { return Ok(()) };
        match c.opcode {
            Opcode::Start => {
                let game = Game::replica(&self.config, self.content.clone(), &c).map_err(|e| e.to_string())?;
                self.replica = Some(game);
                self.acted_epoch = None;
            }
            Opcode::Join => {}
            Opcode::Error if c.field(0) != Some("EVALUATOR_FAILURE") => {
                self.rejections.push(frame.as_str().to_string());
            }
            _ => {
                if let Some(game) = &mut self.replica {
                    game.apply(&c)
                        .map_err(|e| format!("replica rejected {}: {e}", frame.as_str()))?;
                }
            }
        }
        Ok(())
    }

    /// Whether an action planned in `epoch` still makes sense.
    pub fn still_current(&self, epoch: Option<u64>) -> bool {
        match epoch {
            None => true,
            Some(e) => !self.departed && self.replica.as_ref().and_then(Game::timer).map(|t| t.epoch) == Some(e),
        }
    }

    pub fn decide(&mut self) -> Option<Intent> {
        if self.departed {
            return None;
        }
        let game = self.replica.as_ref()?;
        if game.is_finished() || !game.active_players().contains(&self.id) {
            return None;
        }
        if let Some(d) = &self.script.depart_at {
            if game.period() >= d.period && d.phase.as_deref().is_none_or(|ph| ph == game.phase()) {
                self.departed = true;
                return Some(Intent {
                    delay_ms: 0,
                    epoch: None,
                    frame: encode_control(&ControlMessage::new::<_, String>(Opcode::Leave, [])),
                });
            }
        }
        let epoch = game.timer()?.epoch;
        if self.acted_epoch == Some(epoch) || !game.has_available_action(&self.id) {
            return None;
        }
        let (delay_ms, msg) = match game {
            Game::Showdown(e) => match e.state().phase.as_str() {
                phase @ ("READING" | "ROUND_RESULT") => (0, ControlMessage::new(Opcode::TimerTick, [phase])),
                "COMPOSING" => (self.think(), ControlMessage::new(Opcode::SeSubmit, [self.next_se()])),
                _ => return None,
            },
            Game::MiBoard(e) => {
                let st = e.state();
                match st.phase.as_str() {
                    "AWAITING_SE" => (self.think(), ControlMessage::new(Opcode::SeSubmit, [self.next_se()])),
                    "IDENTIFICATION" => {
                        let card = st.current_card.clone().unwrap_or_default();
                        let se = st.current_se.clone().unwrap_or_default();
                        (self.think(), self.identification(&card, &se))
                    }
                    "VERIFICATION" => {
                        let card = st.current_card.clone().unwrap_or_default();
                        (0, ControlMessage::new(Opcode::Verify, [card]))
                    }
                    "DISCUSSION" if st.reader_id() == &self.id => {
                        (0, ControlMessage::new::<_, String>(Opcode::DiscussEnd, []))
                    }
                    "ROLL_MOVE" => (0, ControlMessage::new::<_, String>(Opcode::Roll, [])),
                    "EVENT" => (0, ControlMessage::new::<_, String>(Opcode::EventCard, [])),
                    _ => return None,
                }
            }
        };
        self.acted_epoch = Some(epoch);
        Some(Intent {
            delay_ms,
            epoch: Some(epoch),
            frame: encode_control(&msg),
        })
    }

    fn think(&mut self) -> u64 {
        self.script.think.sample(&mut self.rng)
    }

    fn next_se(&mut self) -> String {
        let se = self.script.se_corpus[self.se_written % self.script.se_corpus.len()].clone();
        self.se_written += 1;
        se
    }

    fn identification(&mut self, card: &str, se: &str) -> ControlMessage {
        let strategies = &self.content.strategies;
        let chosen = match self.script.ident_policy {
            IdentPolicy::AlwaysMatch => strategies.iter().find(|s| s.id == card),
            IdentPolicy::AlwaysMiss => strategies.iter().find(|s| s.id != card),
            IdentPolicy::Random => strategies.get(self.rng.below(strategies.len())),
        }
        .or(strategies.first())
        .expect("content has strategies");
        let reason = &chosen.reasons[0].id;
        let len = se.chars().count();
        ControlMessage::new(
            Opcode::IdentSubmit,
            [chosen.id.clone(), reason.clone(), "0".into(), len.to_string()],
        )
    }
}
