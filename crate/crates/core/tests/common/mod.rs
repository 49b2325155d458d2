//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's estimator or language-model code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use geobigram::{GeoBounds, GeoPoint, RawPost};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NYC: GeoBounds = GeoBounds {
    south: 40.70,
    west: -74.02,
    north: 40.78,
    east: -73.93,
};

/// Brute-force MKN evaluator: every quantity is recounted from the raw corpus on
/// each call.
pub struct BruteMkn {
    corpus: Vec<Vec<String>>,
}

impl BruteMkn {
    pub fn new(corpus: &[Vec<String>]) -> Self {
        BruteMkn {
            corpus: corpus.to_vec(),
        }
    }

    fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for post in &self.corpus {
            for j in 1..post.len() {
                out.push((post[j - 1].clone(), post[j].clone()));
            }
        }
        out
    }

    fn types(&self) -> BTreeSet<(String, String)> {
        self.pairs().into_iter().collect()
    }

    pub fn unigram(&self, w: &str) -> usize {
        self.corpus.iter().flatten().filter(|t| *t == w).count()
    }

    pub fn bigram(&self, v: &str, w: &str) -> usize {
        self.pairs().iter().filter(|(a, b)| a == v && b == w).count()
    }

    pub fn counts_of_counts(&self) -> [usize; 4] {
        let mut n = [0; 4];
        for (v, w) in self.types() {
            let c = self.bigram(&v, &w);
            if (1..=4).contains(&c) {
                n[c - 1] += 1;
            }
        }
        n
    }

    pub fn discounts(&self) -> [f64; 3] {
        let [n1, n2, n3, n4] = self.counts_of_counts().map(|x| x as f64);
        reference_discounts(n1, n2, n3, n4)
    }

    fn discount_for(&self, count: usize) -> f64 {
        let d = self.discounts();
        match count {
            0 => 0.0,
            1 => d[0],
            2 => d[1],
            _ => d[2],
        }
    }

    pub fn continuation(&self, w: &str) -> f64 {
        let types = self.types();
        if types.is_empty() {
            return 0.0;
        }
        types.iter().filter(|(_, b)| b == w).count() as f64 / types.len() as f64
    }

    pub fn lambda(&self, v: &str) -> f64 {
        let cv = self.unigram(v) as f64;
        let freed: f64 = self
            .types()
            .iter()
            .filter(|(a, _)| a == v)
            .map(|(a, b)| self.discount_for(self.bigram(a, b)))
            .sum();
        freed / cv
    }

    /// Unfloored probability.
    pub fn prob_raw(&self, v: &str, w: &str) -> f64 {
        let cv = self.unigram(v);
        if cv == 0 {
            return self.continuation(w);
        }
        let cvw = self.bigram(v, w);
        let kept = (cvw as f64 - self.discount_for(cvw)).max(0.0);
        kept / cv as f64 + self.lambda(v) * self.continuation(w)
    }

    pub fn prob(&self, v: &str, w: &str) -> f64 {
        self.prob_raw(v, w).max(1e-12)
    }

    pub fn vocab(&self) -> BTreeSet<String> {
        self.corpus.iter().flatten().cloned().collect()
    }

    /// Words that end some post (never followed inside that post).
    pub fn sequence_final(&self) -> BTreeSet<String> {
        self.corpus.iter().filter_map(|p| p.last().cloned()).collect()
    }
}

pub fn reference_discounts(n1: f64, n2: f64, n3: f64, n4: f64) -> [f64; 3] {
    let y = n1 + 2.0 * n2;
    let d1 = if y == 0.0 {
        0.75
    } else {
        (1.0 - 2.0 * n2 / y).clamp(0.0, 1.0)
    };
    let d2 = if n2 * y == 0.0 {
        0.75
    } else {
        (2.0 - 3.0 * n3 * n1 / (n2 * y)).clamp(0.0, 2.0)
    };
    let d3 = if n3 * y == 0.0 {
        0.75
    } else {
        (3.0 - 4.0 * n4 * n1 / (n3 * y)).clamp(0.0, 3.0)
    };
    [d1, d2, d3]
}

/// Random corpus of at most `max_tokens` tokens over a small alphabet, split
/// into posts of random length.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_tokens: usize, alphabet: usize) -> Vec<Vec<String>> {
    let total = rng.gen_range(2..=max_tokens);
    let mut corpus = Vec::new();
    let mut left = total;
    while left > 0 {
        let len = rng.gen_range(1..=left.min(8));
        corpus.push((0..len).map(|_| format!("w{}", rng.gen_range(0..alphabet))).collect());
        left -= len;
    }
    corpus
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Geo-smoothing straight from the formula: for each cell, visit every other
/// cell, measure Chebyshev distance and weight it.
pub fn reference_smooth(g: usize, posterior: &[f64], alpha: f64, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; g * g];
    for i in 0..g * g {
        let (ri, ci) = (i / g, i % g);
        let mut neighbors = 0.0;
        for (j, &p) in posterior.iter().enumerate() {
            let (rj, cj) = (j / g, j % g);
            let k = ri.abs_diff(rj).max(ci.abs_diff(cj));
            if (1..=d).contains(&k) {
                neighbors += p / ((2 * k + 1) * (2 * k + 1) - 1) as f64;
            }
        }
        out[i] = (1.0 - alpha) * posterior[i] + alpha * neighbors;
    }
    out
}

pub fn haversine_reference(a: GeoPoint, b: GeoPoint) -> f64 {
    // spherical law of cosines, a different route from haversine
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
    6371.0088 * c.acos()
}

pub fn located(id: &str, text: &str, lat: f64, lon: f64) -> RawPost {
    RawPost::new(id, text, Some(GeoPoint { lat, lon }))
}
