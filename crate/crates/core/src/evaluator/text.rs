use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

pub const DEFAULT_STOPWORDS: &str = "english-100";

const ENGLISH_100: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// Parses one word per line; `#` starts a comment line.
    pub fn parse(list: &str) -> Stopwords {
        let words = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Stopwords { words }
    }

    /// Looks up a shipped list by id.
    pub fn builtin(id: &str) -> Option<&'static Stopwords> {
        static ENGLISH: OnceLock<Stopwords> = OnceLock::new();
        match id {
            DEFAULT_STOPWORDS => Some(ENGLISH.get_or_init(|| Stopwords::parse(ENGLISH_100))),
            _ => None,
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Lowercased alphanumeric runs with stopwords removed. Duplicates are kept.
pub fn content_words(text: &str, stopwords: &Stopwords) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|run| !run.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !stopwords.contains(w))
        .collect()
}

/// Fraction of the distinct tokens of `a` that also occur in `b`; 0 for empty `a`.
pub fn overlap<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let a: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    if a.is_empty() {
        return 0.0;
    }
    let b: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let shared = a.iter().filter(|t| b.contains(*t)).count();
    shared as f64 / a.len() as f64
}
