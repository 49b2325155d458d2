//! Exhaustive search over grid size, smoothing weight and smoothing diameter,
//! minimizing the mean hold-out estimation error.
//!
//! Per-cell models and posteriors depend only on `g`, so each `g` builds one
//! ensemble and caches a [`RingProfile`] per hold-out post; every (α, d) pair is
//! then scored from the cache.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::estimator::{GeoEnsemble, RingProfile, SmoothingConfig};
use crate::evaluation::{csv_writer, estimation_error_km};
use crate::grid::{GeoBounds, GeoPoint, GridPartition};
use crate::lm::Smoothing;
use crate::text::{RawPost, TextPipeline, TokenizedPost, DEFAULT_STOPWORD_COUNT};

#[derive(Debug, Clone, PartialEq)]
pub enum DiameterRule {
    /// d ∈ {1, …, g} for each g.
    UpToGrid,
    Values(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub g_values: Vec<usize>,
    pub alpha_values: Vec<f64>,
    pub diameters: DiameterRule,
}

impl Default for SearchSpace {
    /// g ∈ {5..15}, α ∈ {0.1, 0.2, …, 1.0}, d ∈ {1..g}.
    fn default() -> Self {
        SearchSpace {
            g_values: (5..=15).collect(),
            alpha_values: (1..=10).map(|i| i as f64 / 10.0).collect(),
            diameters: DiameterRule::UpToGrid,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.g_values.is_empty() || self.alpha_values.is_empty() {
            return Err(GeoError::Validation("search space must not be empty".into()));
        }
        if self.g_values.contains(&0) {
            return Err(GeoError::Validation("grid sizes must be positive".into()));
        }
        if let Some(a) = self.alpha_values.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(GeoError::Validation(format!("alpha {a} outside [0, 1]")));
        }
        if let DiameterRule::Values(ds) = &self.diameters {
            if ds.is_empty() || ds.contains(&0) {
                return Err(GeoError::Validation("diameters must be non-empty and positive".into()));
            }
        }
        Ok(())
    }

    fn diameters_for(&self, g: usize) -> Vec<usize> {
        let mut ds = match &self.diameters {
            DiameterRule::UpToGrid => (1..=g).collect(),
            DiameterRule::Values(ds) => ds.clone(),
        };
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    fn sorted_g(&self) -> Vec<usize> {
        let mut gs = self.g_values.clone();
        gs.sort_unstable();
        gs.dedup();
        gs
    }

    fn sorted_alpha(&self) -> Vec<f64> {
        let mut alphas = self.alpha_values.clone();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        alphas
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub g: usize,
    pub alpha: f64,
    pub d: usize,
    pub mean_error_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: SurfacePoint,
    /// Ordered by g, then α, then d.
    pub surface: Vec<SurfacePoint>,
}

impl TuneResult {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w: csv::Writer<BufWriter<File>> = csv_writer(path)?;
        w.write_record(["g", "alpha", "d", "mean_error_km"])?;
        for p in &self.surface {
            w.write_record([
                p.g.to_string(),
                p.alpha.to_string(),
                p.d.to_string(),
                p.mean_error_km.to_string(),
            ])?;
        }
        w.flush().map_err(|e| GeoError::io(path, e))?;
        Ok(())
    }
}

/// First minimum in surface order, so ties go to smaller g, then α, then d.
pub fn argmin(surface: &[SurfacePoint]) -> Option<SurfacePoint> {
    surface
        .iter()
        .copied()
        .fold(None, |best: Option<SurfacePoint>, p| match best {
            Some(b) if b.mean_error_km <= p.mean_error_km => Some(b),
            _ => Some(p),
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    pub stopword_count: usize,
    pub lm: Smoothing,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            stopword_count: DEFAULT_STOPWORD_COUNT,
            lm: Smoothing::ModifiedKneserNey,
        }
    }
}

/// Posterior ring profiles of a hold-out set under one ensemble.
#[derive(Debug, Clone)]
pub struct HoldoutCache<'a> {
    ensemble: &'a GeoEnsemble,
    profiles: Vec<RingProfile>,
    truths: Vec<GeoPoint>,
}

impl<'a> HoldoutCache<'a> {
    pub fn new(ensemble: &'a GeoEnsemble, holdout: &[TokenizedPost]) -> Result<Self> {
        if holdout.is_empty() {
            return Err(GeoError::EmptyEvaluation("hold-out set is empty".into()));
        }
        let truths = holdout
            .iter()
            .map(|p| p.location.ok_or_else(|| GeoError::MissingLocation(p.id.clone())))
            .collect::<Result<Vec<_>>>()?;
        let profiles = holdout
            .par_iter()
            .map(|p| {
                let field = ensemble.posterior_field(p)?;
                Ok(RingProfile::new(ensemble.partition(), &field))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HoldoutCache {
            ensemble,
            profiles,
            truths,
        })
    }

    pub fn mean_error_km(&self, smoothing: SmoothingConfig) -> f64 {
        let total: f64 = self
            .profiles
            .iter()
            .zip(&self.truths)
            .map(|(profile, &truth)| {
                let est = self.ensemble.estimate_from_profile(profile, smoothing);
                estimation_error_km(truth, &est)
            })
            .sum();
        total / self.profiles.len() as f64
    }
}

/// Mean hold-out error for d = 1..=g at fixed α.
pub fn error_vs_d(ensemble: &GeoEnsemble, holdout: &[TokenizedPost], alpha: f64) -> Result<Vec<(usize, f64)>> {
    let cache = HoldoutCache::new(ensemble, holdout)?;
    (1..=ensemble.partition().g())
        .map(|d| Ok((d, cache.mean_error_km(SmoothingConfig::new(alpha, d)?))))
        .collect()
}

/// Fits the text pipeline on `train`, then scores every (g, α, d) of `space` on
/// `holdout`.
pub fn grid_search(
    train: &[RawPost],
    holdout: &[RawPost],
    space: &SearchSpace,
    bounds: GeoBounds,
    options: TuneOptions,
) -> Result<TuneResult> {
    space.validate()?;
    bounds.validate()?;
    if train.is_empty() {
        return Err(GeoError::EmptyTrainingSet);
    }
    let (pipeline, train_tokens) = TextPipeline::fit(train, options.stopword_count);
    let holdout_tokens: Vec<TokenizedPost> = holdout.iter().map(|p| pipeline.preprocess(p)).collect();
    let alphas = space.sorted_alpha();

    let per_g: Vec<Vec<SurfacePoint>> = space
        .sorted_g()
        .into_par_iter()
        .map(|g| {
            let wrap = |e: GeoError| GeoError::Tuning { g, source: Box::new(e) };
            let partition = GridPartition::new(bounds, g).map_err(wrap)?;
            let ensemble = GeoEnsemble::build(
                &train_tokens,
                partition,
                SmoothingConfig::default_for(g),
                options.lm,
                pipeline.clone(),
            )
            .map_err(wrap)?;
            let cache = HoldoutCache::new(&ensemble, &holdout_tokens).map_err(wrap)?;
            let mut points = Vec::new();
            for &alpha in &alphas {
                for d in space.diameters_for(g) {
                    let smoothing = SmoothingConfig::new(alpha, d).map_err(wrap)?;
                    points.push(SurfacePoint {
                        g,
                        alpha,
                        d,
                        mean_error_km: cache.mean_error_km(smoothing),
                    });
                }
            }
            Ok(points)
        })
        .collect::<Result<_>>()?;

    let surface: Vec<SurfacePoint> = per_g.into_iter().flatten().collect();
    let best = argmin(&surface).expect("validated search space is non-empty");
    Ok(TuneResult { best, surface })
}
