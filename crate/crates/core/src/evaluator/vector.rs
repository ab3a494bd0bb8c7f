//! Pluggable vector-space similarity. The default space is TF-IDF over the
//! content-store sentences, each sentence treated as one document.

use std::collections::{BTreeMap, HashMap};

use super::text::{content_words, Stopwords};
use super::EvalError;

/// Sparse term-weight vector keyed by term, iterated in term order so
/// floating-point sums are reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector(BTreeMap<String, f64>);

impl SparseVector {
    pub fn from_weights<I, S>(weights: I) -> SparseVector
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        SparseVector(weights.into_iter().map(|(t, w)| (t.into(), w)).collect())
    }

    pub fn get(&self, term: &str) -> f64 {
        self.0.get(term).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.values().all(|w| *w == 0.0)
    }

    fn norm_sq(&self) -> f64 {
        self.0.values().map(|w| w * w).sum()
    }
}

/// Raw cosine in [-1, 1]; zero when either vector is zero.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let (small, large) = if a.0.len() <= b.0.len() { (a, b) } else { (b, a) };
    // Iterate the intersection in term order so the sum is argument-order independent.
    let mut dot = 0.0;
    for (term, w) in &small.0 {
        if let Some(v) = large.0.get(term) {
            dot += w * v;
        }
    }
    let denom = (a.norm_sq() * b.norm_sq()).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (dot / denom).clamp(-1.0, 1.0)
    }
}

pub trait VectorSpace: Send + Sync {
    fn embed(&self, text: &str) -> SparseVector;

    fn cosine(&self, a: &SparseVector, b: &SparseVector) -> f64 {
        cosine(a, b)
    }

    /// Cosine with negatives clamped to 0.
    fn similarity(&self, a: &str, b: &str) -> f64 {
        self.cosine(&self.embed(a), &self.embed(b)).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct TfIdfSpace {
    stopwords: Stopwords,
    doc_freq: HashMap<String, usize>,
    documents: usize,
}

impl TfIdfSpace {
    pub fn build<'a, I>(corpus: I, stopwords: &Stopwords) -> Result<TfIdfSpace, EvalError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut documents = 0;
        for doc in corpus {
            documents += 1;
            let mut terms = content_words(doc, stopwords);
            terms.sort();
            terms.dedup();
            for t in terms {
                *doc_freq.entry(t).or_default() += 1;
            }
        }
        if documents == 0 {
            return Err(EvalError::EmptyCorpus);
        }
        Ok(TfIdfSpace {
            stopwords: stopwords.clone(),
            doc_freq,
            documents,
        })
    }

    /// Smoothed IDF; unseen terms get the maximum weight rather than zero.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq.get(term).copied().unwrap_or(0);
        ((1 + self.documents) as f64 / (1 + df) as f64).ln() + 1.0
    }

    pub fn vocabulary_len(&self) -> usize {
        self.doc_freq.len()
    }
}

impl VectorSpace for TfIdfSpace {
    fn embed(&self, text: &str) -> SparseVector {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in content_words(text, &self.stopwords) {
            *tf.entry(t).or_default() += 1.0;
        }
        for (term, w) in tf.iter_mut() {
            *w *= self.idf(term);
        }
        SparseVector(tf)
    }
}

/// The default space over every sentence in a content bundle.
pub fn default_vector_space<'a, I>(corpus: I, stopwords: &Stopwords) -> Result<TfIdfSpace, EvalError>
where
    I: IntoIterator<Item = &'a str>,
{
    TfIdfSpace::build(corpus, stopwords)
}
