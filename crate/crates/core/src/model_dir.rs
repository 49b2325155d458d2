//! On-disk model directory.
//!
//! ```text
//! manifest.json            format version, bounds, g, α, d, K, seed, N
//! stopwords.txt            one token per line, sorted
//! hapax.txt
//! vocab.txt
//! priors.tsv               row  col  post_count  prior
//! cells/r{row}_c{col}/
//!     unigrams.tsv         token  count
//!     bigrams.tsv          token  token  count
//!     meta.json            post_count, n1..n4, d1..d3
//! ```
//!
//! Count tables are sorted so that saving the same ensemble twice gives
//! byte-identical files. A `.lock` file guards the directory while it is written.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::estimator::{GeoEnsemble, SmoothingConfig};
use crate::grid::{CellId, GeoBounds, GridPartition};
use crate::lm::{CellLanguageModel, CountTables, Discounts, Smoothing};
use crate::text::{PipelineConfig, TextPipeline};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const STOPWORDS: &str = "stopwords.txt";
const HAPAX: &str = "hapax.txt";
const VOCAB: &str = "vocab.txt";
const PRIORS: &str = "priors.tsv";
const CELLS: &str = "cells";
const LOCK: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub bounds: GeoBounds,
    pub grid: usize,
    pub alpha: f64,
    pub diameter: usize,
    pub stopwords_k: usize,
    pub seed: u64,
    pub training_posts: u64,
    pub language_model: Smoothing,
    pub created_by: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellMeta {
    row: usize,
    col: usize,
    post_count: u64,
    n1: u64,
    n2: u64,
    n3: u64,
    n4: u64,
    d1: f64,
    d2: f64,
    d3: f64,
}

fn cell_dir(root: &Path, c: CellId) -> PathBuf {
    root.join(CELLS).join(format!("r{}_c{}", c.row, c.col))
}

fn format_err(path: &Path, reason: impl Into<String>) -> GeoError {
    GeoError::ModelFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| GeoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(contents.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| GeoError::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GeoError::io(path, e))
}

fn token_lines<'a>(tokens: impl IntoIterator<Item = &'a String>) -> String {
    let sorted: BTreeSet<&String> = tokens.into_iter().collect();
    sorted.into_iter().map(|t| format!("{t}\n")).collect()
}

fn read_tokens(path: &Path) -> Result<Vec<String>> {
    Ok(read_file(path)?
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn parse_count(path: &Path, line_no: usize, field: &str) -> Result<u64> {
    field
        .parse()
        .map_err(|_| format_err(path, format!("line {line_no}: bad count {field:?}")))
}

/// Removes the lock file when the save finishes, successfully or not.
struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => {
                    format_err(dir, "directory is locked by another writer (remove .lock if stale)")
                }
                _ => GeoError::io(&path, e),
            })?;
        Ok(LockGuard(path))
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Writes `ens` to `dir`, creating it if needed.
pub fn save(ens: &GeoEnsemble, dir: &Path, stopwords_k: usize, seed: u64) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| GeoError::io(dir, e))?;
    let _lock = LockGuard::acquire(dir)?;

    let part = ens.partition();
    let smoothing = ens.smoothing();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        bounds: part.bounds(),
        grid: part.g(),
        alpha: smoothing.alpha,
        diameter: smoothing.diameter,
        stopwords_k,
        seed,
        training_posts: ens.training_size(),
        language_model: ens.lm(),
        created_by: format!("geobigram {}", env!("CARGO_PKG_VERSION")),
    };

    let pipeline = ens.pipeline();
    write_file(&dir.join(STOPWORDS), &token_lines(pipeline.stopwords()))?;
    write_file(&dir.join(HAPAX), &token_lines(pipeline.hapax()))?;
    write_file(&dir.join(VOCAB), &token_lines(pipeline.vocab()))?;

    let mut priors = String::from("row\tcol\tpost_count\tprior\n");
    for (m, p) in ens.models().iter().zip(ens.priors()) {
        let c = m.cell();
        priors.push_str(&format!("{}\t{}\t{}\t{}\n", c.row, c.col, m.post_count(), p));
    }
    write_file(&dir.join(PRIORS), &priors)?;

    let cells_root = dir.join(CELLS);
    if cells_root.exists() {
        fs::remove_dir_all(&cells_root).map_err(|e| GeoError::io(&cells_root, e))?;
    }
    for m in ens.models() {
        let cdir = cell_dir(dir, m.cell());
        fs::create_dir_all(&cdir).map_err(|e| GeoError::io(&cdir, e))?;

        let mut unigrams: Vec<(&str, u64)> = m.counts().unigrams().collect();
        unigrams.sort_unstable();
        let text: String = unigrams.iter().map(|(w, n)| format!("{w}\t{n}\n")).collect();
        write_file(&cdir.join("unigrams.tsv"), &text)?;

        let mut bigrams: Vec<(&str, &str, u64)> = m.counts().bigrams().collect();
        bigrams.sort_unstable();
        let text: String = bigrams.iter().map(|(v, w, n)| format!("{v}\t{w}\t{n}\n")).collect();
        write_file(&cdir.join("bigrams.tsv"), &text)?;

        let d = m.discounts();
        let meta = CellMeta {
            row: m.cell().row,
            col: m.cell().col,
            post_count: m.post_count(),
            n1: d.n[0],
            n2: d.n[1],
            n3: d.n[2],
            n4: d.n[3],
            d1: d.d1,
            d2: d.d2,
            d3: d.d3,
        };
        let json = serde_json::to_string_pretty(&meta).expect("cell metadata always serializes");
        write_file(&cdir.join("meta.json"), &(json + "\n"))?;
    }

    let json = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
    write_file(&dir.join(MANIFEST), &(json + "\n"))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = read_file(&path)?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| format_err(&path, e.to_string()))?;
    let version = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| format_err(&path, "missing format_version"))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(GeoError::FormatVersion {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(raw).map_err(|e| format_err(&path, e.to_string()))
}

fn load_cell(dir: &Path, cell: CellId) -> Result<CellLanguageModel> {
    let cdir = cell_dir(dir, cell);

    let path = cdir.join("unigrams.tsv");
    let mut unigrams = HashMap::new();
    for (i, line) in read_file(&path)?.lines().enumerate() {
        match line.split('\t').collect::<Vec<_>>()[..] {
            [w, n] => {
                unigrams.insert(w.to_string(), parse_count(&path, i + 1, n)?);
            }
            _ => return Err(format_err(&path, format!("line {}: expected 2 fields", i + 1))),
        }
    }

    let path = cdir.join("bigrams.tsv");
    let mut bigrams = Vec::new();
    for (i, line) in read_file(&path)?.lines().enumerate() {
        match line.split('\t').collect::<Vec<_>>()[..] {
            [v, w, n] => bigrams.push((v.to_string(), w.to_string(), parse_count(&path, i + 1, n)?)),
            _ => return Err(format_err(&path, format!("line {}: expected 3 fields", i + 1))),
        }
    }

    let path = cdir.join("meta.json");
    let meta: CellMeta = serde_json::from_str(&read_file(&path)?).map_err(|e| format_err(&path, e.to_string()))?;
    if (meta.row, meta.col) != (cell.row, cell.col) {
        return Err(format_err(&path, "cell coordinates do not match directory"));
    }

    let model = CellLanguageModel::from_counts(cell, CountTables::from_counts(unigrams, bigrams), meta.post_count);
    let stored = Discounts {
        d1: meta.d1,
        d2: meta.d2,
        d3: meta.d3,
        n: [meta.n1, meta.n2, meta.n3, meta.n4],
    };
    if *model.discounts() != stored {
        return Err(format_err(&path, "stored discounts disagree with the count tables"));
    }
    Ok(model)
}

/// Loads an ensemble. `smoothing` overrides the manifest's α and d.
pub fn load(dir: &Path, smoothing: Option<SmoothingConfig>) -> Result<(GeoEnsemble, Manifest)> {
    let manifest = read_manifest(dir)?;
    let partition = GridPartition::new(manifest.bounds, manifest.grid)?;

    let config = PipelineConfig {
        stopword_count: manifest.stopwords_k,
        stopwords: read_tokens(&dir.join(STOPWORDS))?,
    };
    let hapax = read_tokens(&dir.join(HAPAX))?.into_iter().collect();
    let vocab = read_tokens(&dir.join(VOCAB))?.into_iter().collect();
    let pipeline = TextPipeline::from_parts(config, hapax, vocab);

    let models = partition
        .cells()
        .map(|c| load_cell(dir, c))
        .collect::<Result<Vec<_>>>()?;

    let path = dir.join(PRIORS);
    let rows: Vec<String> = read_file(&path)?.lines().skip(1).map(str::to_string).collect();
    if rows.len() != partition.cell_count() {
        return Err(format_err(
            &path,
            format!("expected {} rows, found {}", partition.cell_count(), rows.len()),
        ));
    }
    for (row, m) in rows.iter().zip(&models) {
        let fields: Vec<&str> = row.split('\t').collect();
        let expected = [
            m.cell().row.to_string(),
            m.cell().col.to_string(),
            m.post_count().to_string(),
        ];
        if fields.len() != 4 || fields[..3] != expected {
            return Err(format_err(&path, format!("row {row:?} disagrees with cell tables")));
        }
    }

    let smoothing = smoothing.unwrap_or(SmoothingConfig {
        alpha: manifest.alpha,
        diameter: manifest.diameter,
    });
    let ens = GeoEnsemble::from_models(partition, models, smoothing, manifest.language_model, pipeline)?;
    if ens.training_size() != manifest.training_posts {
        return Err(format_err(
            dir,
            "manifest training size disagrees with cell post counts",
        ));
    }
    let total: f64 = ens.priors().iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(format_err(&path, format!("priors sum to {total}")));
    }
    Ok((ens, manifest))
}
