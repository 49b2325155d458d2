//! Per-cell bigram language models.
//!
//! The default estimator is interpolated Modified Kneser-Ney: every observed
//! bigram `(v, w)` gives up a discount chosen by its count tier (1, 2, or 3+),
//! and the freed mass `λ(v)` is redistributed according to the continuation
//! probability `P_c(w)`, the share of distinct bigram types that end in `w`.
//! A plain linear interpolation of MLE bigram and unigram estimates is kept as
//! a baseline.
//!
//! Bigrams are taken between consecutive tokens of a single post; there are no
//! sentence-boundary symbols.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::grid::CellId;
use crate::text::TokenizedPost;

/// Lower bound applied to every probability handed out, so logs stay finite.
pub const MIN_PROB: f64 = 1e-12;

/// Discount used when the closed-form estimate has a zero denominator.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountTables {
    unigrams: HashMap<String, u64>,
    /// `followers[v][w] = c(v, w)`
    followers: HashMap<String, HashMap<String, u64>>,
    /// Number of distinct left neighbours of each word.
    distinct_left: HashMap<String, u64>,
    total_tokens: u64,
    total_distinct_bigrams: u64,
}

impl CountTables {
    pub fn from_posts<'a>(posts: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut unigrams: HashMap<String, u64> = HashMap::new();
        let mut bigrams: Vec<(String, String, u64)> = Vec::new();
        let mut followers: HashMap<String, HashMap<String, u64>> = HashMap::new();
        for tokens in posts {
            for t in tokens {
                *unigrams.entry(t.clone()).or_default() += 1;
            }
            for pair in tokens.windows(2) {
                *followers
                    .entry(pair[0].clone())
                    .or_default()
                    .entry(pair[1].clone())
                    .or_default() += 1;
            }
        }
        for (v, next) in &followers {
            for (w, &n) in next {
                bigrams.push((v.clone(), w.clone(), n));
            }
        }
        Self::from_counts(unigrams, bigrams)
    }

    /// Rebuilds the derived tables from raw unigram and bigram counts.
    pub fn from_counts(
        unigrams: HashMap<String, u64>,
        bigrams: impl IntoIterator<Item = (String, String, u64)>,
    ) -> Self {
        let mut followers: HashMap<String, HashMap<String, u64>> = HashMap::new();
        let mut distinct_left: HashMap<String, u64> = HashMap::new();
        let mut total_distinct_bigrams = 0;
        for (v, w, n) in bigrams {
            if n == 0 {
                continue;
            }
            let slot = followers.entry(v).or_default().entry(w.clone()).or_default();
            if *slot == 0 {
                *distinct_left.entry(w).or_default() += 1;
                total_distinct_bigrams += 1;
            }
            *slot += n;
        }
        let total_tokens = unigrams.values().sum();
        CountTables {
            unigrams,
            followers,
            distinct_left,
            total_tokens,
            total_distinct_bigrams,
        }
    }

    pub fn unigram(&self, w: &str) -> u64 {
        self.unigrams.get(w).copied().unwrap_or(0)
    }

    pub fn bigram(&self, v: &str, w: &str) -> u64 {
        self.followers.get(v).and_then(|m| m.get(w)).copied().unwrap_or(0)
    }

    pub fn distinct_right(&self, v: &str) -> u64 {
        self.followers.get(v).map_or(0, |m| m.len() as u64)
    }

    pub fn distinct_left(&self, w: &str) -> u64 {
        self.distinct_left.get(w).copied().unwrap_or(0)
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn total_distinct_bigrams(&self) -> u64 {
        self.total_distinct_bigrams
    }

    pub fn unigrams(&self) -> impl Iterator<Item = (&str, u64)> {
        self.unigrams.iter().map(|(w, &n)| (w.as_str(), n))
    }

    pub fn bigrams(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.followers
            .iter()
            .flat_map(|(v, m)| m.iter().map(move |(w, &n)| (v.as_str(), w.as_str(), n)))
    }

    pub fn followers_of(&self, v: &str) -> impl Iterator<Item = (&str, u64)> {
        self.followers
            .get(v)
            .into_iter()
            .flat_map(|m| m.iter().map(|(w, &n)| (w.as_str(), n)))
    }

    /// `n[i-1]` = number of distinct bigrams seen exactly `i` times, for i = 1..=4.
    pub fn counts_of_counts(&self) -> [u64; 4] {
        let mut n = [0u64; 4];
        for (_, _, c) in self.bigrams() {
            if (1..=4).contains(&c) {
                n[c as usize - 1] += 1;
            }
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discounts {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub n: [u64; 4],
}

impl Discounts {
    /// Discount applied to a bigram seen `count` times.
    pub fn for_count(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3,
        }
    }
}

/// Closed-form MKN discounts from the counts-of-counts `n1..n4`.
///
/// Each discount is clamped to `[0, i]`; a zero denominator yields
/// [`FALLBACK_DISCOUNT`] for that tier.
pub fn compute_discounts(n1: u64, n2: u64, n3: u64, n4: u64) -> Discounts {
    let (n1f, n2f, n3f, n4f) = (n1 as f64, n2 as f64, n3 as f64, n4 as f64);
    let base = n1f + 2.0 * n2f;
    let tier = |numerator: f64, denominator: f64, cap: f64| {
        if denominator == 0.0 {
            FALLBACK_DISCOUNT
        } else {
            (cap - numerator / denominator).clamp(0.0, cap)
        }
    };
    Discounts {
        d1: tier(2.0 * n2f, base, 1.0),
        d2: tier(3.0 * n3f * n1f, n2f * base, 2.0),
        d3: tier(4.0 * n4f * n1f, n3f * base, 3.0),
        n: [n1, n2, n3, n4],
    }
}

/// Which bigram estimator a model uses at query time.
#[derive(Debug, Default, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    ModifiedKneserNey,
    /// Linear interpolation with weight `lambda1` on the MLE bigram and
    /// `1 - lambda1` on the unigram.
    Interpolated { lambda1: f64 },
}

impl Smoothing {
    pub fn interpolated(lambda1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda1) {
            return Err(GeoError::Validation(format!(
                "interpolation weight {lambda1} outside [0, 1]"
            )));
        }
        Ok(Smoothing::Interpolated { lambda1 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellLanguageModel {
    cell: CellId,
    counts: CountTables,
    discounts: Discounts,
    post_count: u64,
    /// λ(v) for every context with at least one follower.
    backoff: HashMap<String, f64>,
}

impl CellLanguageModel {
    pub fn train(posts: &[TokenizedPost], cell: CellId) -> Self {
        let counts = CountTables::from_posts(posts.iter().map(|p| p.tokens.as_slice()));
        Self::from_counts(cell, counts, posts.len() as u64)
    }

    pub fn from_counts(cell: CellId, counts: CountTables, post_count: u64) -> Self {
        let [n1, n2, n3, n4] = counts.counts_of_counts();
        let discounts = compute_discounts(n1, n2, n3, n4);
        CellLanguageModel {
            cell,
            counts,
            discounts,
            post_count,
            backoff: HashMap::new(),
        }
        .with_discounts(discounts)
    }

    /// Replaces the estimated discounts and recomputes the back-off masses.
    pub fn with_discounts(mut self, discounts: Discounts) -> Self {
        let counts = &self.counts;
        self.backoff = counts
            .followers
            .iter()
            .map(|(v, next)| {
                // d1·N1(v) + d2·N2(v) + d3·N3+(v); integer tallies keep the sum
                // independent of hash order
                let mut tiers = [0u64; 3];
                for &n in next.values() {
                    tiers[(n.min(3) - 1) as usize] += 1;
                }
                let freed =
                    discounts.d1 * tiers[0] as f64 + discounts.d2 * tiers[1] as f64 + discounts.d3 * tiers[2] as f64;
                (v.clone(), freed / counts.unigram(v) as f64)
            })
            .collect();
        self.discounts = discounts;
        self
    }

    pub fn cell(&self) -> CellId {
        self.cell
    }

    pub fn counts(&self) -> &CountTables {
        &self.counts
    }

    pub fn discounts(&self) -> &Discounts {
        &self.discounts
    }

    pub fn post_count(&self) -> u64 {
        self.post_count
    }

    pub fn in_vocab(&self, w: &str) -> bool {
        self.counts.unigram(w) > 0
    }

    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.counts.unigrams.keys().map(String::as_str)
    }

    /// Share of distinct bigram types completed by `w`; zero when the model
    /// has no bigrams.
    pub fn continuation_prob(&self, w: &str) -> f64 {
        let total = self.counts.total_distinct_bigrams;
        if total == 0 {
            return 0.0;
        }
        self.counts.distinct_left(w) as f64 / total as f64
    }

    /// Mass freed by discounting the bigrams that start with `v`.
    pub fn backoff_mass(&self, v: &str) -> Result<f64> {
        if self.counts.unigram(v) == 0 {
            return Err(GeoError::UndefinedContext(v.to_string()));
        }
        Ok(self.backoff.get(v).copied().unwrap_or(0.0))
    }

    /// MKN estimate of `P(w | v)` without the probability floor.
    pub fn bigram_prob_raw(&self, v: &str, w: &str) -> f64 {
        let cv = self.counts.unigram(v);
        let pc = self.continuation_prob(w);
        if cv == 0 {
            return pc;
        }
        let lambda = self.backoff.get(v).copied().unwrap_or(0.0);
        let cvw = self.counts.bigram(v, w);
        if cvw == 0 {
            return lambda * pc;
        }
        let kept = (cvw as f64 - self.discounts.for_count(cvw)).max(0.0);
        kept / cv as f64 + lambda * pc
    }

    pub fn bigram_prob(&self, v: &str, w: &str) -> f64 {
        self.bigram_prob_raw(v, w).max(MIN_PROB)
    }

    /// Baseline `λ1·c(v,w)/c(v) + λ2·c(w)/N` with `N` the cell's token count.
    /// An unseen context falls back to the unigram estimate alone.
    pub fn baseline_bigram_prob(&self, v: &str, w: &str, lambda1: f64, lambda2: f64) -> f64 {
        let total = self.counts.total_tokens;
        let unigram = if total == 0 {
            0.0
        } else {
            self.counts.unigram(w) as f64 / total as f64
        };
        let cv = self.counts.unigram(v);
        let p = if cv == 0 {
            unigram
        } else {
            lambda1 * self.counts.bigram(v, w) as f64 / cv as f64 + lambda2 * unigram
        };
        p.max(MIN_PROB)
    }

    pub fn prob(&self, smoothing: Smoothing, v: &str, w: &str) -> f64 {
        match smoothing {
            Smoothing::ModifiedKneserNey => self.bigram_prob(v, w),
            Smoothing::Interpolated { lambda1 } => self.baseline_bigram_prob(v, w, lambda1, 1.0 - lambda1),
        }
    }

    /// `Σ log P(w_j | w_{j-1})` over consecutive pairs; zero for fewer than two tokens.
    pub fn sequence_log_prob_with<S: AsRef<str>>(&self, smoothing: Smoothing, tokens: &[S]) -> f64 {
        tokens
            .windows(2)
            .map(|p| self.prob(smoothing, p[0].as_ref(), p[1].as_ref()).ln())
            .sum()
    }

    pub fn sequence_log_prob<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        self.sequence_log_prob_with(Smoothing::ModifiedKneserNey, tokens)
    }
}
