//! Test-only reference implementations, written independently of the crate.
#![allow(dead_code)]

/// The same shipped stopword file the engine reads.
const STOPWORDS: &str = include_str!("../../data/stopwords.txt");

pub struct RefConfig {
    pub min_content_words: usize,
    pub sim_ceiling: f64,
    pub relevance_floor: f64,
    pub prior_bonus_floor: f64,
    pub excellent_novel_floor: usize,
}

impl RefConfig {
    pub fn defaults() -> RefConfig {
        RefConfig {
            min_content_words: 5,
            sim_ceiling: 0.8,
            relevance_floor: 0.1,
            prior_bonus_floor: 0.15,
            excellent_novel_floor: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefResult {
    pub score: u8,
    pub too_short: bool,
    pub too_similar: bool,
    pub irrelevant: bool,
    pub content_len: usize,
    pub sim_target: f64,
    pub sim_prior: f64,
    pub novel_count: usize,
}

fn is_stopword(w: &str) -> bool {
    STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .any(|l| l.to_lowercase() == w)
}

/// Character-by-character tokenizer.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            word.push(c);
        } else if !word.is_empty() {
            let lower = word.to_lowercase();
            if !is_stopword(&lower) {
                out.push(lower);
            }
            word.clear();
        }
    }
    out
}

fn distinct(words: &[String]) -> Vec<String> {
    let mut d: Vec<String> = Vec::new();
    for w in words {
        if !d.contains(w) {
            d.push(w.clone());
        }
    }
    d
}

pub fn ref_overlap(a: &[String], b: &[String]) -> f64 {
    let da = distinct(a);
    if da.is_empty() {
        return 0.0;
    }
    let hits = da.iter().filter(|w| b.contains(w)).count();
    hits as f64 / da.len() as f64
}

pub fn reference_evaluate(se: &str, target: &str, prior: &str, cfg: &RefConfig) -> RefResult {
    let s = tokens(se);
    let t = tokens(target);
    let p = tokens(prior);
    let sim_target = ref_overlap(&s, &t);
    let sim_prior = ref_overlap(&s, &p);
    let novel_count = distinct(&s).iter().filter(|w| !t.contains(w) && !p.contains(w)).count();
    let too_short = s.len() < cfg.min_content_words;
    let too_similar = sim_target >= cfg.sim_ceiling;
    let best = if sim_target > sim_prior { sim_target } else { sim_prior };
    let irrelevant = best < cfg.relevance_floor;
    let score = if too_short || too_similar || irrelevant {
        0
    } else if sim_prior < cfg.prior_bonus_floor {
        1
    } else if novel_count >= cfg.excellent_novel_floor {
        3
    } else {
        2
    };
    RefResult {
        score,
        too_short,
        too_similar,
        irrelevant,
        content_len: s.len(),
        sim_target,
        sim_prior,
        novel_count,
    }
}
