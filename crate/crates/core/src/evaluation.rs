//! Corpus splits, estimation error reports and a synthetic corpus generator.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::estimator::{Estimate, GeoEnsemble};
use crate::grid::{geo_distance_km, CellId, GeoBounds, GeoPoint, GridPartition};
use crate::text::{RawPost, TokenizedPost};

pub const DEFAULT_BIN_WIDTH_KM: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub holdout_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.70,
            holdout_frac: 0.15,
            test_frac: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.holdout_frac, self.test_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(GeoError::Validation(format!(
                "split fractions {fracs:?} must lie in [0, 1]"
            )));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(GeoError::Validation(format!("split fractions {fracs:?} must sum to 1")));
        }
        Ok(())
    }
}

/// Seeded shuffle followed by a contiguous cut: `floor(n·train)` items for
/// training, `floor(n·holdout)` for the hold-out set and the remainder for test.
pub fn split<T: Clone>(corpus: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    spec.validate()?;
    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    // the epsilon keeps e.g. 0.7 * 100 = 70.00000000000001 and 0.15 * 100 from
    // rounding the wrong way
    let count = |frac: f64| ((n as f64 * frac + 1e-9).floor() as usize).min(n);
    let n_train = count(spec.train_frac);
    let n_holdout = count(spec.holdout_frac).min(n - n_train);
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<T>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_holdout]),
        pick(&order[n_train + n_holdout..]),
    ))
}

pub fn estimation_error_km(truth: GeoPoint, est: &Estimate) -> f64 {
    geo_distance_km(truth, est.point)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub left_km: f64,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub per_post: Vec<(String, f64)>,
    pub mean_error_km: f64,
    pub bin_width_km: f64,
    pub histogram: Vec<HistogramBin>,
    /// `(distance, fraction of posts with error <= distance)` at every distinct error.
    pub cdf: Vec<(f64, f64)>,
}

impl ErrorReport {
    pub fn from_errors(per_post: Vec<(String, f64)>, bin_width_km: f64) -> Result<Self> {
        if per_post.is_empty() {
            return Err(GeoError::EmptyEvaluation("no posts with known locations".into()));
        }
        if bin_width_km.is_nan() || bin_width_km <= 0.0 {
            return Err(GeoError::Validation(format!(
                "bin width {bin_width_km} must be positive"
            )));
        }
        let n = per_post.len();
        let mean_error_km = per_post.iter().map(|(_, e)| e).sum::<f64>() / n as f64;

        let mut sorted: Vec<f64> = per_post.iter().map(|&(_, e)| e).collect();
        sorted.sort_by(f64::total_cmp);
        let mut cdf: Vec<(f64, f64)> = Vec::new();
        for (i, &e) in sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n as f64;
            match cdf.last_mut() {
                Some(last) if last.0 == e => last.1 = frac,
                _ => cdf.push((e, frac)),
            }
        }
        if let Some(last) = cdf.last_mut() {
            last.1 = 1.0;
        }

        let max = sorted[n - 1];
        let bins = (max / bin_width_km).floor() as usize + 1;
        let mut counts = vec![0usize; bins];
        for &e in &sorted {
            counts[((e / bin_width_km).floor() as usize).min(bins - 1)] += 1;
        }
        let histogram = counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                left_km: i as f64 * bin_width_km,
                count,
                fraction: count as f64 / n as f64,
            })
            .collect();

        Ok(ErrorReport {
            per_post,
            mean_error_km,
            bin_width_km,
            histogram,
            cdf,
        })
    }

    /// Fraction of posts whose error is at most `km`.
    pub fn fraction_within(&self, km: f64) -> f64 {
        self.cdf
            .iter()
            .take_while(|(d, _)| *d <= km)
            .last()
            .map_or(0.0, |&(_, f)| f)
    }

    /// Writes `errors.csv`, `cdf.csv` and `density.csv` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| GeoError::io(dir, e))?;

        let mut w = csv_writer(&dir.join("errors.csv"))?;
        w.write_record(["post_id", "error_km"])?;
        for (id, e) in &self.per_post {
            w.write_record([id.as_str(), &e.to_string()])?;
        }
        w.flush().map_err(|e| GeoError::io(dir.join("errors.csv"), e))?;

        let mut w = csv_writer(&dir.join("cdf.csv"))?;
        w.write_record(["distance_km", "cum_fraction"])?;
        for (d, f) in &self.cdf {
            w.write_record([d.to_string(), f.to_string()])?;
        }
        w.flush().map_err(|e| GeoError::io(dir.join("cdf.csv"), e))?;

        let mut w = csv_writer(&dir.join("density.csv"))?;
        w.write_record(["bin_left_km", "count", "fraction"])?;
        for b in &self.histogram {
            w.write_record([b.left_km.to_string(), b.count.to_string(), b.fraction.to_string()])?;
        }
        w.flush().map_err(|e| GeoError::io(dir.join("density.csv"), e))?;
        Ok(())
    }
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| GeoError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// Writes estimates as CSV with columns
/// `post_id,est_lat,est_lon,cell_row,cell_col,posterior,smoothed_score`.
pub fn write_estimates_csv<'a, W: std::io::Write>(
    out: W,
    rows: impl IntoIterator<Item = (&'a str, &'a Estimate)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "post_id",
        "est_lat",
        "est_lon",
        "cell_row",
        "cell_col",
        "posterior",
        "smoothed_score",
    ])?;
    for (id, e) in rows {
        w.write_record([
            id.to_string(),
            e.point.lat.to_string(),
            e.point.lon.to_string(),
            e.cell.row.to_string(),
            e.cell.col.to_string(),
            e.posterior.to_string(),
            e.smoothed_score.to_string(),
        ])?;
    }
    w.flush().map_err(|e| GeoError::io("<estimates>", e))?;
    Ok(())
}

/// Estimates every post and measures the distance to its true location.
pub fn evaluate(ens: &GeoEnsemble, test: &[TokenizedPost]) -> Result<ErrorReport> {
    evaluate_with_bins(ens, test, DEFAULT_BIN_WIDTH_KM)
}

pub fn evaluate_with_bins(ens: &GeoEnsemble, test: &[TokenizedPost], bin_width_km: f64) -> Result<ErrorReport> {
    if test.is_empty() {
        return Err(GeoError::EmptyEvaluation("test set is empty".into()));
    }
    let truths = test
        .iter()
        .map(|p| p.location.ok_or_else(|| GeoError::MissingLocation(p.id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let per_post = ens
        .estimate_batch(test)
        .into_iter()
        .zip(test.iter().zip(truths))
        .map(|(est, (post, truth))| Ok((post.id.clone(), estimation_error_km(truth, &est?))))
        .collect::<Result<Vec<_>>>()?;
    ErrorReport::from_errors(per_post, bin_width_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub g: usize,
    pub vocab_per_cell: usize,
    pub shared_vocab: usize,
    pub posts_per_cell: usize,
    pub tokens_per_post: usize,
    /// Probability that a token comes from a uniformly random other cell.
    pub leakage: f64,
    /// Probability that a non-leaked token comes from a random adjacent cell
    /// (Chebyshev distance 1), which makes neighbouring vocabularies overlap.
    pub neighbor_share: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            g: 4,
            vocab_per_cell: 40,
            shared_vocab: 0,
            posts_per_cell: 100,
            tokens_per_post: 6,
            leakage: 0.0,
            neighbor_share: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.g == 0 || self.vocab_per_cell == 0 || self.tokens_per_post == 0 {
            return Err(GeoError::Validation(
                "grid size, vocabulary per cell and tokens per post must be positive".into(),
            ));
        }
        for (name, p) in [("leakage", self.leakage), ("neighbor share", self.neighbor_share)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GeoError::Validation(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn cell_word(c: CellId, j: usize) -> String {
    format!("c{}x{}w{}", c.row, c.col, j)
}

/// Generates `posts_per_cell` located posts for each of the g² cells of `bounds`.
/// Each cell owns a private vocabulary; a shared pool is mixed into all of them.
pub fn generate_synthetic(spec: &SyntheticSpec, bounds: GeoBounds) -> Result<Vec<RawPost>> {
    spec.validate()?;
    let partition = GridPartition::new(bounds, spec.g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cells: Vec<CellId> = partition.cells().collect();
    let pool = spec.vocab_per_cell + spec.shared_vocab;
    let mut posts = Vec::with_capacity(cells.len() * spec.posts_per_cell);

    for &cell in &cells {
        let rect = partition.rect_of(cell)?;
        let adjacent = partition.ring_neighbors(cell, 1)?;
        for n in 0..spec.posts_per_cell {
            let location = GeoPoint {
                lat: rng.gen_range(rect.south..rect.north),
                lon: rng.gen_range(rect.west..rect.east),
            };
            let words: Vec<String> = (0..spec.tokens_per_post)
                .map(|_| {
                    let source = if cells.len() > 1 && rng.gen_bool(spec.leakage) {
                        let mut j = rng.gen_range(0..cells.len() - 1);
                        if j >= partition.index_of(cell) {
                            j += 1;
                        }
                        cells[j]
                    } else if !adjacent.is_empty() && rng.gen_bool(spec.neighbor_share) {
                        adjacent[rng.gen_range(0..adjacent.len())]
                    } else {
                        cell
                    };
                    let j = rng.gen_range(0..pool);
                    if j < spec.vocab_per_cell {
                        cell_word(source, j)
                    } else {
                        format!("shared{}", j - spec.vocab_per_cell)
                    }
                })
                .collect();
            posts.push(RawPost::new(
                format!("syn-{}-{}-{}", cell.row, cell.col, n),
                words.join(" "),
                Some(location),
            ));
        }
    }
    Ok(posts)
}
