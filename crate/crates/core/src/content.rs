//! Practice texts, strategy definitions and event cards.
//!
//! A content directory looks like:
//!
//! ```text
//! content/
//!   strategies.toml
//!   event_cards.toml
//!   texts/
//!     <any name>.toml     one practice text per file
//! ```
//!
//! Everything is validated on load and immutable afterwards.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAX_EVENT_DELTA: i32 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContentError {
    #[error("{file}: {message}")]
    Io { file: String, message: String },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{file}: validation failed: {invariant}")]
    Validation { file: String, invariant: String },
    #[error("sentence index {index} out of range for text `{text}` ({len} sentences)")]
    IndexOutOfRange { text: String, index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PracticeText {
    pub id: String,
    pub title: String,
    pub sentences: Vec<String>,
    /// Sentence indices that players self-explain, strictly increasing.
    pub targets: Vec<usize>,
    /// Reserved sentence for match-deciding bonus rounds.
    #[serde(default)]
    pub bonus_target: Option<usize>,
}

impl PracticeText {
    fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("text id must be non-empty".into());
        }
        if self.sentences.is_empty() {
            return Err("text must have at least one sentence".into());
        }
        if let Some(i) = self.sentences.iter().position(|s| s.trim().is_empty()) {
            return Err(format!("sentence {i} is empty"));
        }
        if self.targets.is_empty() {
            return Err("text must have at least one target sentence".into());
        }
        if self.targets.windows(2).any(|w| w[0] >= w[1]) {
            return Err("target indices must be strictly increasing".into());
        }
        let n = self.sentences.len();
        if let Some(&bad) = self.targets.iter().find(|&&t| t >= n) {
            return Err(format!(
                "target index {bad} is not a valid sentence index (text has {n} sentences)"
            ));
        }
        if let Some(b) = self.bonus_target {
            if b >= n {
                return Err(format!(
                    "bonus target {b} is not a valid sentence index (text has {n} sentences)"
                ));
            }
        }
        Ok(())
    }

    pub fn sentence(&self, index: usize) -> Result<&str, ContentError> {
        self.sentences
            .get(index)
            .map(String::as_str)
            .ok_or_else(|| ContentError::IndexOutOfRange {
                text: self.id.clone(),
                index,
                len: self.sentences.len(),
            })
    }

    /// Sentence used for bonus rounds: the reserved one, else the last target.
    pub fn bonus_sentence_index(&self) -> usize {
        self.bonus_target
            .unwrap_or_else(|| *self.targets.last().expect("validated: at least one target"))
    }
}

/// The text a reader has seen before `sentence_index`: all earlier sentences,
/// space-joined.
pub fn prior_text(text: &PracticeText, sentence_index: usize) -> Result<String, ContentError> {
    text.sentence(sentence_index)?;
    Ok(text.sentences[..sentence_index].join(" "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reason {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDef {
    pub id: String,
    pub name: String,
    pub description: String,
    pub reasons: Vec<Reason>,
}

impl StrategyDef {
    pub fn reason(&self, id: &str) -> Option<&Reason> {
        self.reasons.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventCard {
    pub label: String,
    pub delta: i32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategiesFile {
    strategy: Vec<StrategyDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventCardsFile {
    card: Vec<EventCard>,
}

/// A validated content bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Content {
    /// Sorted by id.
    pub texts: Vec<PracticeText>,
    /// In file order; deck order and CMB menus follow it.
    pub strategies: Vec<StrategyDef>,
    pub event_cards: Vec<EventCard>,
    digest: String,
}

const STRATEGIES_FILE: &str = "strategies.toml";
const EVENT_CARDS_FILE: &str = "event_cards.toml";
const TEXTS_DIR: &str = "texts";

const BUILTIN_STRATEGIES: &str = include_str!("../../../content/strategies.toml");
const BUILTIN_EVENT_CARDS: &str = include_str!("../../../content/event_cards.toml");
const BUILTIN_TEXTS: &[(&str, &str)] = &[
    (
        "texts/cell-division.toml",
        include_str!("../../../content/texts/cell-division.toml"),
    ),
    (
        "texts/volcanoes.toml",
        include_str!("../../../content/texts/volcanoes.toml"),
    ),
];

impl Content {
    /// The bundle shipped in the repository's `content/` directory.
    pub fn builtin() -> Content {
        let texts: Vec<(String, String)> = BUILTIN_TEXTS
            .iter()
            .map(|(name, body)| (name.to_string(), body.to_string()))
            .collect();
        Content::from_sources(BUILTIN_STRATEGIES, BUILTIN_EVENT_CARDS, &texts).expect("builtin content is valid")
    }

    pub fn load(dir: &Path) -> Result<Content, ContentError> {
        let strategies = read(&dir.join(STRATEGIES_FILE))?;
        let event_cards = read(&dir.join(EVENT_CARDS_FILE))?;
        let texts_dir = dir.join(TEXTS_DIR);
        let entries = fs::read_dir(&texts_dir).map_err(|e| io_err(&texts_dir, e))?;
        let mut paths: Vec<PathBuf> = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| io_err(&texts_dir, e))?.path();
            if path.extension().is_some_and(|ext| ext == "toml") {
                paths.push(path);
            }
        }
        paths.sort();
        let mut texts = Vec::with_capacity(paths.len());
        for path in paths {
            let name = format!("{TEXTS_DIR}/{}", path.file_name().unwrap_or_default().to_string_lossy());
            texts.push((name, read(&path)?));
        }
        Content::from_sources(&strategies, &event_cards, &texts)
    }

    /// Parses and validates a bundle from in-memory documents. `texts` pairs a
    /// display file name with its TOML body.
    pub fn from_sources(
        strategies: &str,
        event_cards: &str,
        texts: &[(String, String)],
    ) -> Result<Content, ContentError> {
        let strategies = parse_strategies(strategies)?;
        let event_cards = parse_event_cards(event_cards)?;
        let mut parsed = Vec::with_capacity(texts.len());
        let mut seen = BTreeSet::new();
        for (name, body) in texts {
            let text = parse_text(name, body)?;
            if !seen.insert(text.id.clone()) {
                return Err(validation(name, format!("duplicate text id `{}`", text.id)));
            }
            parsed.push(text);
        }
        if parsed.is_empty() {
            return Err(validation(TEXTS_DIR, "at least one practice text is required"));
        }
        parsed.sort_by(|a, b| a.id.cmp(&b.id));

        let mut hasher = Sha256::new();
        for (label, body) in [
            (STRATEGIES_FILE, strategies_body(&strategies)),
            (EVENT_CARDS_FILE, cards_body(&event_cards)),
        ] {
            hasher.update(label.as_bytes());
            hasher.update([0]);
            hasher.update(body.as_bytes());
            hasher.update([0]);
        }
        for text in &parsed {
            hasher.update(text.id.as_bytes());
            hasher.update([0]);
            hasher.update(serde_json::to_vec(text).expect("text serializes"));
            hasher.update([0]);
        }
        let digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();

        Ok(Content {
            texts: parsed,
            strategies,
            event_cards,
            digest,
        })
    }

    /// SHA-256 over the normalized bundle; stable across reloads.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn text(&self, id: &str) -> Option<&PracticeText> {
        self.texts.iter().find(|t| t.id == id)
    }

    pub fn strategy(&self, id: &str) -> Option<&StrategyDef> {
        self.strategies.iter().find(|s| s.id == id)
    }

    /// Every sentence of every text, in text then sentence order.
    pub fn corpus(&self) -> impl Iterator<Item = &str> {
        self.texts.iter().flat_map(|t| t.sentences.iter().map(String::as_str))
    }
}

fn strategies_body(strategies: &[StrategyDef]) -> String {
    serde_json::to_string(strategies).expect("strategies serialize")
}

fn cards_body(cards: &[EventCard]) -> String {
    serde_json::to_string(cards).expect("cards serialize")
}

fn read(path: &Path) -> Result<String, ContentError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> ContentError {
    ContentError::Io {
        file: path.display().to_string(),
        message: e.to_string(),
    }
}

fn validation(file: &str, invariant: impl Into<String>) -> ContentError {
    ContentError::Validation {
        file: file.to_string(),
        invariant: invariant.into(),
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(file: &str, body: &str) -> Result<T, ContentError> {
    toml::from_str(body).map_err(|e| {
        let line = e
            .span()
            .map(|span| body[..span.start.min(body.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        ContentError::Parse {
            file: file.to_string(),
            line,
            message: e.message().to_string(),
        }
    })
}

pub fn parse_text(file: &str, body: &str) -> Result<PracticeText, ContentError> {
    let text: PracticeText = parse_toml(file, body)?;
    text.validate().map_err(|inv| validation(file, inv))?;
    Ok(text)
}

pub fn parse_strategies(body: &str) -> Result<Vec<StrategyDef>, ContentError> {
    let file: StrategiesFile = parse_toml(STRATEGIES_FILE, body)?;
    let mut ids = BTreeSet::new();
    if file.strategy.is_empty() {
        return Err(validation(STRATEGIES_FILE, "at least one strategy is required"));
    }
    for s in &file.strategy {
        if s.id.is_empty() || s.id.contains(['|', '\n', '\r']) {
            return Err(validation(STRATEGIES_FILE, format!("invalid strategy id `{}`", s.id)));
        }
        if !ids.insert(s.id.as_str()) {
            return Err(validation(STRATEGIES_FILE, format!("duplicate strategy id `{}`", s.id)));
        }
        if s.reasons.is_empty() {
            return Err(validation(
                STRATEGIES_FILE,
                format!("strategy `{}` must have at least one reason", s.id),
            ));
        }
        let mut reason_ids = BTreeSet::new();
        for r in &s.reasons {
            if r.id.is_empty() || !reason_ids.insert(r.id.as_str()) {
                return Err(validation(
                    STRATEGIES_FILE,
                    format!("strategy `{}` has an empty or duplicate reason id `{}`", s.id, r.id),
                ));
            }
        }
    }
    Ok(file.strategy)
}

pub fn parse_event_cards(body: &str) -> Result<Vec<EventCard>, ContentError> {
    let file: EventCardsFile = parse_toml(EVENT_CARDS_FILE, body)?;
    if file.card.is_empty() {
        return Err(validation(EVENT_CARDS_FILE, "at least one event card is required"));
    }
    for c in &file.card {
        if c.delta == 0 || c.delta.abs() > MAX_EVENT_DELTA {
            return Err(validation(
                EVENT_CARDS_FILE,
                format!(
                    "card `{}` delta {} outside [-{MAX_EVENT_DELTA}, +{MAX_EVENT_DELTA}] or zero",
                    c.label, c.delta
                ),
            ));
        }
    }
    Ok(file.card)
}
