//! Ensemble of per-cell language models and the Bayesian cell estimate.
//!
//! For a post `T` every cell gets `log P(T | cell) + log P(cell)`, normalized with
//! log-sum-exp into a posterior field. The field is then geo-smoothed:
//!
//! ```text
//! score(i) = (1 - α)·P(i) + α · Σ_{k=1..d} Σ_{ω in ring_k(i)} P(ω) / ((2k+1)² - 1)
//! ```
//!
//! where `ring_k(i)` is the set of cells at Chebyshev distance `k`. The
//! denominator is the size of the full ring even when the grid clips it.
//! The estimate is the center of the highest-scoring cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::grid::{CellId, GeoPoint, GridPartition};
use crate::lm::{CellLanguageModel, Smoothing};
use crate::text::{RawPost, TextPipeline, TokenizedPost};

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub alpha: f64,
    pub diameter: usize,
}

impl SmoothingConfig {
    pub fn new(alpha: f64, diameter: usize) -> Result<Self> {
        let cfg = SmoothingConfig { alpha, diameter };
        cfg.validate()?;
        Ok(cfg)
    }

    /// α = 0.9 and d = g.
    pub fn default_for(g: usize) -> Self {
        SmoothingConfig {
            alpha: DEFAULT_ALPHA,
            diameter: g.max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(GeoError::Validation(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.diameter == 0 {
            return Err(GeoError::Validation("smoothing diameter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorField {
    pub post_id: String,
    /// Row-major over the partition.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub cell: CellId,
    pub point: GeoPoint,
    pub smoothed_score: f64,
    pub posterior: f64,
}

/// Normalizes per-cell log-likelihoods against the priors. Cells with prior 0
/// get posterior 0.
pub fn posterior_from_log_likelihoods(
    post_id: &str,
    log_likelihoods: &[f64],
    priors: &[f64],
) -> Result<PosteriorField> {
    let joint: Vec<Option<f64>> = log_likelihoods
        .iter()
        .zip(priors)
        .map(|(&ll, &p)| (p > 0.0).then(|| ll + p.ln()))
        .collect();
    let max = joint.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(GeoError::DegenerateEnsemble(post_id.to_string()));
    }
    let weights: Vec<f64> = joint.iter().map(|j| j.map_or(0.0, |v| (v - max).exp())).collect();
    let total: f64 = weights.iter().sum();
    Ok(PosteriorField {
        post_id: post_id.to_string(),
        values: weights.into_iter().map(|w| w / total).collect(),
    })
}

/// Per-cell decomposition of the smoothing formula: `own` is the posterior
/// itself and `neighbor[i][k-1]` the ring-weighted neighbour sum up to distance
/// `k`. Any (α, d) score is then `(1-α)·own + α·neighbor[d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingProfile {
    g: usize,
    own: Vec<f64>,
    neighbor: Vec<Vec<f64>>,
}

impl RingProfile {
    pub fn new(partition: &GridPartition, field: &PosteriorField) -> Self {
        let g = partition.g();
        let max_k = g - 1;
        let neighbor = partition
            .cells()
            .map(|c| {
                let mut acc = 0.0;
                (1..=max_k)
                    .map(|k| {
                        let ring: f64 = partition
                            .ring_neighbors(c, k)
                            .expect("cell comes from the partition")
                            .into_iter()
                            .map(|w| field.values[partition.index_of(w)])
                            .sum();
                        acc += ring / ((2 * k + 1) * (2 * k + 1) - 1) as f64;
                        acc
                    })
                    .collect()
            })
            .collect();
        RingProfile {
            g,
            own: field.values.clone(),
            neighbor,
        }
    }

    pub fn score(&self, index: usize, smoothing: SmoothingConfig) -> f64 {
        let alpha = smoothing.alpha;
        // rings past g - 1 are empty
        let d = smoothing.diameter.min(self.g - 1);
        let neighbors = if d == 0 { 0.0 } else { self.neighbor[index][d - 1] };
        (1.0 - alpha) * self.own[index] + alpha * neighbors
    }

    pub fn scores(&self, smoothing: SmoothingConfig) -> Vec<f64> {
        (0..self.own.len()).map(|i| self.score(i, smoothing)).collect()
    }

    /// Highest score, ties going to the first cell in row-major order.
    pub fn argmax(&self, smoothing: SmoothingConfig) -> (usize, f64) {
        argmax_first(&self.scores(smoothing))
    }
}

pub(crate) fn argmax_first(scores: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &s) in scores.iter().enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// Geo-smoothed scores for every cell, row-major.
pub fn geo_smooth(partition: &GridPartition, field: &PosteriorField, smoothing: SmoothingConfig) -> Vec<f64> {
    RingProfile::new(partition, field).scores(smoothing)
}

#[derive(Debug, Clone)]
pub struct GeoEnsemble {
    partition: GridPartition,
    models: Vec<CellLanguageModel>,
    priors: Vec<f64>,
    smoothing: SmoothingConfig,
    lm: Smoothing,
    pipeline: TextPipeline,
}

impl GeoEnsemble {
    /// Assigns each located training post to its cell, trains one model per cell
    /// and sets the priors to each cell's share of the posts.
    pub fn build(
        train: &[TokenizedPost],
        partition: GridPartition,
        smoothing: SmoothingConfig,
        lm: Smoothing,
        pipeline: TextPipeline,
    ) -> Result<Self> {
        smoothing.validate()?;
        if train.is_empty() {
            return Err(GeoError::EmptyTrainingSet);
        }
        let mut by_cell: Vec<Vec<TokenizedPost>> = vec![Vec::new(); partition.cell_count()];
        for post in train {
            let loc = post
                .location
                .ok_or_else(|| GeoError::MissingLocation(post.id.clone()))?;
            let cell = partition.cell_of(loc)?;
            by_cell[partition.index_of(cell)].push(post.clone());
        }
        let models: Vec<CellLanguageModel> = by_cell
            .par_iter()
            .enumerate()
            .map(|(i, posts)| CellLanguageModel::train(posts, partition.cell_at(i)))
            .collect();
        Self::from_models(partition, models, smoothing, lm, pipeline)
    }

    /// Assembles an ensemble from already trained models (row-major). Priors
    /// come from the models' post counts.
    pub fn from_models(
        partition: GridPartition,
        models: Vec<CellLanguageModel>,
        smoothing: SmoothingConfig,
        lm: Smoothing,
        pipeline: TextPipeline,
    ) -> Result<Self> {
        smoothing.validate()?;
        if models.len() != partition.cell_count() {
            return Err(GeoError::Validation(format!(
                "expected {} cell models, got {}",
                partition.cell_count(),
                models.len()
            )));
        }
        for (i, m) in models.iter().enumerate() {
            if m.cell() != partition.cell_at(i) {
                return Err(GeoError::Validation(format!(
                    "cell model at position {i} belongs to ({}, {})",
                    m.cell().row,
                    m.cell().col
                )));
            }
        }
        let total: u64 = models.iter().map(CellLanguageModel::post_count).sum();
        if total == 0 {
            return Err(GeoError::EmptyTrainingSet);
        }
        let priors = models.iter().map(|m| m.post_count() as f64 / total as f64).collect();
        Ok(GeoEnsemble {
            partition,
            models,
            priors,
            smoothing,
            lm,
            pipeline,
        })
    }

    pub fn partition(&self) -> &GridPartition {
        &self.partition
    }

    pub fn models(&self) -> &[CellLanguageModel] {
        &self.models
    }

    pub fn model(&self, c: CellId) -> Result<&CellLanguageModel> {
        self.partition.check_cell(c)?;
        Ok(&self.models[self.partition.index_of(c)])
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn prior(&self, c: CellId) -> Result<f64> {
        self.partition.check_cell(c)?;
        Ok(self.priors[self.partition.index_of(c)])
    }

    pub fn training_size(&self) -> u64 {
        self.models.iter().map(CellLanguageModel::post_count).sum()
    }

    pub fn smoothing(&self) -> SmoothingConfig {
        self.smoothing
    }

    /// Replaces the inference-time smoothing parameters.
    pub fn with_smoothing(mut self, smoothing: SmoothingConfig) -> Result<Self> {
        smoothing.validate()?;
        self.smoothing = smoothing;
        Ok(self)
    }

    pub fn lm(&self) -> Smoothing {
        self.lm
    }

    pub fn pipeline(&self) -> &TextPipeline {
        &self.pipeline
    }

    pub fn log_likelihoods(&self, post: &TokenizedPost) -> Vec<f64> {
        self.models
            .iter()
            .zip(&self.priors)
            .map(|(m, &p)| {
                if p > 0.0 {
                    m.sequence_log_prob_with(self.lm, &post.tokens)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn posterior_field(&self, post: &TokenizedPost) -> Result<PosteriorField> {
        // no bigrams: every likelihood is 1
        if post.tokens.len() < 2 {
            return Ok(PosteriorField {
                post_id: post.id.clone(),
                values: self.priors.clone(),
            });
        }
        posterior_from_log_likelihoods(&post.id, &self.log_likelihoods(post), &self.priors)
    }

    pub fn geo_smooth(&self, field: &PosteriorField) -> Vec<f64> {
        geo_smooth(&self.partition, field, self.smoothing)
    }

    pub(crate) fn estimate_from_profile(&self, profile: &RingProfile, smoothing: SmoothingConfig) -> Estimate {
        let (index, score) = profile.argmax(smoothing);
        let cell = self.partition.cell_at(index);
        Estimate {
            cell,
            point: self.partition.center_of(cell).expect("cell comes from the partition"),
            smoothed_score: score,
            posterior: profile.own[index],
        }
    }

    pub fn estimate(&self, post: &TokenizedPost) -> Result<Estimate> {
        let field = self.posterior_field(post)?;
        let profile = RingProfile::new(&self.partition, &field);
        Ok(self.estimate_from_profile(&profile, self.smoothing))
    }

    /// Preprocesses raw text with the ensemble's pipeline, then estimates.
    pub fn estimate_raw(&self, raw: &RawPost) -> Result<Estimate> {
        self.estimate(&self.pipeline.preprocess(raw))
    }

    /// Order-preserving; one result per post.
    pub fn estimate_batch(&self, posts: &[TokenizedPost]) -> Vec<Result<Estimate>> {
        posts.par_iter().map(|p| self.estimate(p)).collect()
    }
}
