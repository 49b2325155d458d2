//! Geolocation of short posts inside a known region.
//!
//! The region is cut into a g×g grid, one smoothed bigram language model is
//! trained per cell, and a post is placed at the center of the cell that
//! maximizes its geo-smoothed posterior.
//!
//! ```no_run
//! use geobigram::{GeoBounds, GeoEnsemble, GridPartition, RawPost, SmoothingConfig, Smoothing, TextPipeline};
//!
//! # fn main() -> geobigram::Result<()> {
//! let train: Vec<RawPost> = Vec::new(); // located posts
//! let (pipeline, tokens) = TextPipeline::fit(&train, 200);
//! let grid = GridPartition::new(GeoBounds::new(40.70, -74.02, 40.78, -73.93)?, 8)?;
//! let ens = GeoEnsemble::build(&tokens, grid, SmoothingConfig::default_for(8), Smoothing::default(), pipeline)?;
//! let est = ens.estimate_raw(&RawPost::new("q", "stuck on the bridge again", None))?;
//! println!("{:?}", est.point);
//! # Ok(())
//! # }
//! ```

pub mod corpus;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod grid;
pub mod lm;
pub mod model_dir;
pub mod text;
pub mod tuning;

pub use error::{GeoError, Result};
pub use estimator::{geo_smooth, Estimate, GeoEnsemble, PosteriorField, RingProfile, SmoothingConfig};
pub use evaluation::{evaluate, generate_synthetic, split, ErrorReport, SplitSpec, SyntheticSpec};
pub use grid::{geo_distance_km, CellId, GeoBounds, GeoPoint, GridPartition};
pub use lm::{compute_discounts, CellLanguageModel, CountTables, Discounts, Smoothing};
pub use text::{RawPost, TextPipeline, TokenizedPost, MISC};
pub use tuning::{grid_search, SearchSpace, TuneResult};
