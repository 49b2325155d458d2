//! Post normalization: cleanup, stopword induction and removal, and folding of
//! rare words into the catch-all `<misc>` token.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::grid::GeoPoint;

/// Catch-all token standing in for words seen only once in training.
pub const MISC: &str = "<misc>";

pub const DEFAULT_STOPWORD_COUNT: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub text: String,
    pub location: Option<GeoPoint>,
}

impl RawPost {
    pub fn new(id: impl Into<String>, text: impl Into<String>, location: Option<GeoPoint>) -> Self {
        RawPost {
            id: id.into(),
            text: text.into(),
            location,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedPost {
    pub id: String,
    pub tokens: Vec<String>,
    pub location: Option<GeoPoint>,
}

impl TokenizedPost {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, location: Option<GeoPoint>) -> Self {
        TokenizedPost {
            id: id.into(),
            tokens,
            location,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stopword_count: usize,
    pub stopwords: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stopword_count: DEFAULT_STOPWORD_COUNT,
            stopwords: Vec::new(),
        }
    }
}

fn is_dropped_marker(word: &str) -> bool {
    if word.starts_with('@') || word.starts_with('#') {
        return true;
    }
    let lower = word.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Splits a post into candidate tokens. Links, @-replies and hashtags are dropped
/// whole; the remaining words are lowercased and stripped of every
/// non-alphanumeric character. Words that still contain non-ASCII characters are
/// treated as non-English and dropped.
pub fn clean_and_tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|w| !is_dropped_marker(w))
        .filter_map(|w| {
            let cleaned: String = w.to_lowercase().chars().filter(|c| c.is_alphanumeric()).collect();
            (!cleaned.is_empty() && cleaned.is_ascii()).then_some(cleaned)
        })
        .collect()
}

/// The `k` most frequent tokens, ties broken lexicographically.
pub fn induce_stopwords<S: AsRef<str>>(corpus: &[Vec<S>], k: usize) -> Vec<String> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for tokens in corpus {
        for t in tokens {
            *counts.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(w, _)| w.to_string()).collect()
}

/// Replaces every token occurring exactly once in the whole corpus with `<misc>`.
/// Returns the folded corpus and the set of folded surface forms.
pub fn fold_hapax(corpus: &[TokenizedPost]) -> (Vec<TokenizedPost>, BTreeSet<String>) {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for post in corpus {
        for t in &post.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let hapax: BTreeSet<String> = counts
        .iter()
        .filter(|&(_, &n)| n == 1)
        .map(|(w, _)| w.to_string())
        .collect();
    let folded = corpus
        .iter()
        .map(|post| TokenizedPost {
            id: post.id.clone(),
            location: post.location,
            tokens: post
                .tokens
                .iter()
                .map(|t| if hapax.contains(t) { MISC.to_string() } else { t.clone() })
                .collect(),
        })
        .collect();
    (folded, hapax)
}

/// Runs the full pipeline on one post: cleanup, stopword removal, then folding.
/// Tokens in `hapax` become `<misc>`; when a trained `vocab` is supplied, so does
/// every token outside it.
pub fn preprocess(
    raw: &RawPost,
    cfg: &PipelineConfig,
    hapax: &BTreeSet<String>,
    vocab: Option<&BTreeSet<String>>,
) -> TokenizedPost {
    let stop: HashSet<&str> = cfg.stopwords.iter().map(String::as_str).collect();
    let tokens = clean_and_tokenize(&raw.text)
        .into_iter()
        .filter(|t| !stop.contains(t.as_str()))
        .map(|t| {
            let unknown = vocab.is_some_and(|v| !v.contains(&t));
            if unknown || hapax.contains(&t) {
                MISC.to_string()
            } else {
                t
            }
        })
        .collect();
    TokenizedPost {
        id: raw.id.clone(),
        tokens,
        location: raw.location,
    }
}

/// Artifacts induced from a training split and reused at query time.
#[derive(Debug, Clone, PartialEq)]
pub struct TextPipeline {
    config: PipelineConfig,
    stopword_set: HashSet<String>,
    hapax: BTreeSet<String>,
    vocab: BTreeSet<String>,
}

impl TextPipeline {
    /// Induces stopwords and the hapax set from `train` and returns the pipeline
    /// together with the preprocessed training posts.
    pub fn fit(train: &[RawPost], stopword_count: usize) -> (TextPipeline, Vec<TokenizedPost>) {
        let cleaned: Vec<Vec<String>> = train.iter().map(|p| clean_and_tokenize(&p.text)).collect();
        let stopwords = induce_stopwords(&cleaned, stopword_count);
        let stop: HashSet<&str> = stopwords.iter().map(String::as_str).collect();
        let filtered: Vec<TokenizedPost> = train
            .iter()
            .zip(cleaned)
            .map(|(raw, tokens)| TokenizedPost {
                id: raw.id.clone(),
                location: raw.location,
                tokens: tokens.into_iter().filter(|t| !stop.contains(t.as_str())).collect(),
            })
            .collect();
        let (folded, hapax) = fold_hapax(&filtered);
        let vocab = folded.iter().flat_map(|p| p.tokens.iter().cloned()).collect();
        let pipeline = TextPipeline::from_parts(
            PipelineConfig {
                stopword_count,
                stopwords,
            },
            hapax,
            vocab,
        );
        (pipeline, folded)
    }

    pub fn from_parts(config: PipelineConfig, hapax: BTreeSet<String>, vocab: BTreeSet<String>) -> Self {
        let stopword_set = config.stopwords.iter().cloned().collect();
        TextPipeline {
            config,
            stopword_set,
            hapax,
            vocab,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn stopwords(&self) -> &[String] {
        &self.config.stopwords
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopword_set.contains(token)
    }

    pub fn hapax(&self) -> &BTreeSet<String> {
        &self.hapax
    }

    /// Every token of the folded training corpus, `<misc>` included.
    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// Query-time preprocessing; unknown words fold to `<misc>`.
    pub fn preprocess(&self, raw: &RawPost) -> TokenizedPost {
        preprocess(raw, &self.config, &self.hapax, Some(&self.vocab))
    }
}
