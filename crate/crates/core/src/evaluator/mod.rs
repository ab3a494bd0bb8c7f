//! Self-explanation quality scoring on a 0–3 scale.
//!
//! Screening flags come first: an explanation that is too short, too close
//! to the target sentence, or unrelated to the text scores 0. Unflagged
//! explanations climb a ladder:
//!
//! * 1: engages only the target sentence (`sim_prior < prior_bonus_floor`)
//! * 2: bridges to the prior text
//! * 3: bridges and adds at least `excellent_novel_floor` new content words
//!
//! Every threshold is exposed through [`ScoringConfig`].

mod text;
mod vector;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use text::{content_words, overlap, Stopwords, DEFAULT_STOPWORDS};
pub use vector::{cosine, default_vector_space, SparseVector, TfIdfSpace, VectorSpace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("target sentence is empty")]
    EmptyTarget,
    #[error("vector space corpus is empty")]
    EmptyCorpus,
    #[error("unknown stopword list `{0}`")]
    UnknownStopwords(String),
    #[error("invalid scoring config: {0}")]
    InvalidConfig(String),
    #[error("evaluator failure: {0}")]
    Failure(String),
    #[error("malformed evaluation encoding: {0}")]
    MalformedWire(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub min_content_words: usize,
    /// `sim_target` at or above this flags the explanation as too similar.
    pub sim_ceiling: f64,
    /// Best relevance signal below this flags the explanation as irrelevant.
    pub relevance_floor: f64,
    pub prior_bonus_floor: f64,
    pub excellent_novel_floor: usize,
    pub stopwords: String,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            min_content_words: 5,
            sim_ceiling: 0.8,
            relevance_floor: 0.1,
            prior_bonus_floor: 0.15,
            excellent_novel_floor: 8,
            stopwords: DEFAULT_STOPWORDS.to_string(),
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (name, v) in [
            ("sim_ceiling", self.sim_ceiling),
            ("relevance_floor", self.relevance_floor),
            ("prior_bonus_floor", self.prior_bonus_floor),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(EvalError::InvalidConfig(format!("{name} must be in (0, 1), got {v}")));
            }
        }
        if self.min_content_words == 0 || self.excellent_novel_floor == 0 {
            return Err(EvalError::InvalidConfig("minimum counts must be >= 1".into()));
        }
        self.stopword_list()?;
        Ok(())
    }

    pub fn stopword_list(&self) -> Result<&'static Stopwords, EvalError> {
        Stopwords::builtin(&self.stopwords).ok_or_else(|| EvalError::UnknownStopwords(self.stopwords.clone()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub too_short: bool,
    pub too_similar: bool,
    pub irrelevant: bool,
}

impl Flags {
    pub fn any(&self) -> bool {
        self.too_short || self.too_similar || self.irrelevant
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub content_len: usize,
    pub sim_target: f64,
    pub sim_prior: f64,
    /// Distinct content words found in neither the target nor the prior text.
    pub novel_count: usize,
    pub cos_target: Option<f64>,
    pub cos_text: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub score: u8,
    pub flags: Flags,
    pub features: Features,
}

/// Score ladder over already-computed flags and features.
pub fn ladder(flags: Flags, sim_prior: f64, novel_count: usize, config: &ScoringConfig) -> u8 {
    if flags.any() {
        0
    } else if sim_prior < config.prior_bonus_floor {
        1
    } else if novel_count >= config.excellent_novel_floor {
        3
    } else {
        2
    }
}

pub fn evaluate(
    se: &str,
    target: &str,
    prior: &str,
    config: &ScoringConfig,
    plugin: Option<&dyn VectorSpace>,
) -> Result<Evaluation, EvalError> {
    if target.trim().is_empty() {
        return Err(EvalError::EmptyTarget);
    }
    let stopwords = config.stopword_list()?;
    let se_tokens = content_words(se, stopwords);
    let target_tokens = content_words(target, stopwords);
    let prior_tokens = content_words(prior, stopwords);

    let sim_target = overlap(&se_tokens, &target_tokens);
    let sim_prior = overlap(&se_tokens, &prior_tokens);
    let known: BTreeSet<&str> = target_tokens
        .iter()
        .chain(prior_tokens.iter())
        .map(String::as_str)
        .collect();
    let novel_count = se_tokens
        .iter()
        .map(String::as_str)
        .filter(|t| !known.contains(t))
        .collect::<BTreeSet<_>>()
        .len();

    let (cos_target, cos_text) = match plugin {
        Some(space) => {
            let whole = if prior.is_empty() {
                target.to_string()
            } else {
                format!("{prior} {target}")
            };
            (Some(space.similarity(se, target)), Some(space.similarity(se, &whole)))
        }
        None => (None, None),
    };

    let relevance = sim_target.max(sim_prior).max(cos_text.unwrap_or(0.0));
    let flags = Flags {
        too_short: se_tokens.len() < config.min_content_words,
        too_similar: sim_target >= config.sim_ceiling,
        irrelevant: relevance < config.relevance_floor,
    };
    Ok(Evaluation {
        score: ladder(flags, sim_prior, novel_count, config),
        flags,
        features: Features {
            content_len: se_tokens.len(),
            sim_target,
            sim_prior,
            novel_count,
            cos_target,
            cos_text,
        },
    })
}

/// Something that scores a self-explanation against its context.
pub trait Scorer: Send + Sync {
    fn score(&self, se: &str, target: &str, prior: &str) -> Result<Evaluation, EvalError>;
}

/// Word-based scorer with an optional vector space.
#[derive(Clone)]
pub struct Evaluator {
    config: ScoringConfig,
    plugin: Option<Arc<dyn VectorSpace>>,
}

impl fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Evaluator")
            .field("config", &self.config)
            .field("plugin", &self.plugin.is_some())
            .finish()
    }
}

impl Evaluator {
    pub fn new(config: ScoringConfig) -> Result<Evaluator, EvalError> {
        config.validate()?;
        Ok(Evaluator { config, plugin: None })
    }

    pub fn with_vector_space(mut self, space: Arc<dyn VectorSpace>) -> Evaluator {
        self.plugin = Some(space);
        self
    }

    pub fn config(&self) -> &ScoringConfig {
        &self.config
    }
}

impl Scorer for Evaluator {
    fn score(&self, se: &str, target: &str, prior: &str) -> Result<Evaluation, EvalError> {
        evaluate(se, target, prior, &self.config, self.plugin.as_deref())
    }
}

impl<F> Scorer for F
where
    F: Fn(&str, &str, &str) -> Result<Evaluation, EvalError> + Send + Sync,
{
    fn score(&self, se: &str, target: &str, prior: &str) -> Result<Evaluation, EvalError> {
        self(se, target, prior)
    }
}

const FLAG_NAMES: [&str; 3] = ["too_short", "too_similar", "irrelevant"];

impl Evaluation {
    /// Builds an unflagged-or-flagged evaluation carrying only a score; used by
    /// test stubs and replicas that never see features.
    pub fn with_score(score: u8) -> Evaluation {
        Evaluation {
            score,
            flags: Flags {
                too_short: score == 0,
                ..Flags::default()
            },
            features: Features::default(),
        }
    }

    /// Compact single-field encoding:
    /// `score;flags;content_len;sim_target;sim_prior;novel_count;cos_target;cos_text`
    /// with flags `+`-joined (or `-`) and absent cosines as `-`.
    pub fn to_wire(&self) -> String {
        let flags: Vec<&str> = [self.flags.too_short, self.flags.too_similar, self.flags.irrelevant]
            .iter()
            .zip(FLAG_NAMES)
            .filter(|(set, _)| **set)
            .map(|(_, name)| name)
            .collect();
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
        let f = &self.features;
        format!(
            "{};{};{};{};{};{};{};{}",
            self.score,
            if flags.is_empty() {
                "-".to_string()
            } else {
                flags.join("+")
            },
            f.content_len,
            f.sim_target,
            f.sim_prior,
            f.novel_count,
            opt(f.cos_target),
            opt(f.cos_text),
        )
    }

    pub fn from_wire(s: &str) -> Result<Evaluation, EvalError> {
        let bad = |what: &str| EvalError::MalformedWire(format!("{what} in `{s}`"));
        let parts: Vec<&str> = s.split(';').collect();
        if parts.len() != 8 {
            return Err(bad("expected 8 parts"));
        }
        let score: u8 = parts[0].parse().map_err(|_| bad("score"))?;
        if score > 3 {
            return Err(bad("score out of range"));
        }
        let mut flags = Flags::default();
        if parts[1] != "-" {
            for name in parts[1].split('+') {
                match name {
                    "too_short" => flags.too_short = true,
                    "too_similar" => flags.too_similar = true,
                    "irrelevant" => flags.irrelevant = true,
                    _ => return Err(bad("flag")),
                }
            }
        }
        let ratio = |p: &str| -> Result<f64, EvalError> {
            let v: f64 = p.parse().map_err(|_| bad("ratio"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad("ratio"))
            }
        };
        let opt = |p: &str| -> Result<Option<f64>, EvalError> {
            if p == "-" {
                Ok(None)
            } else {
                ratio(p).map(Some)
            }
        };
        Ok(Evaluation {
            score,
            flags,
            features: Features {
                content_len: parts[2].parse().map_err(|_| bad("content_len"))?,
                sim_target: ratio(parts[3])?,
                sim_prior: ratio(parts[4])?,
                novel_count: parts[5].parse().map_err(|_| bad("novel_count"))?,
                cos_target: opt(parts[6])?,
                cos_text: opt(parts[7])?,
            },
        })
    }
}
