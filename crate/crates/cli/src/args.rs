use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use geobigram::estimator::{DEFAULT_ALPHA, DEFAULT_GRID};
use geobigram::text::DEFAULT_STOPWORD_COUNT;
use geobigram::{GeoBounds, SplitSpec};

/// Estimate where short posts were written from their text alone.
#[derive(Debug, Parser)]
#[command(name = "geobigram", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a located corpus, train one language model per grid cell and save the model directory.
    Train(TrainArgs),
    /// Estimate the location of every post in a corpus with a saved model.
    Estimate(EstimateArgs),
    /// Measure estimation error on posts with known locations.
    Evaluate(EvaluateArgs),
    /// Grid-search grid size, smoothing weight and diameter on a hold-out split.
    Tune(TuneArgs),
    /// Generate a synthetic corpus with planted per-cell vocabularies.
    Synth(SynthArgs),
    /// Print the tokens a saved model sees for each post, as JSON lines.
    Preprocess(PreprocessArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Fraction of posts used for training.
    #[arg(long, default_value_t = SplitSpec::default().train_frac)]
    pub train_frac: f64,
    /// Fraction of posts kept for hyperparameter fitting.
    #[arg(long, default_value_t = SplitSpec::default().holdout_frac)]
    pub holdout_frac: f64,
    /// Fraction of posts kept for final evaluation.
    #[arg(long, default_value_t = SplitSpec::default().test_frac)]
    pub test_frac: f64,
    /// Seed for the shuffle that precedes the split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SplitArgs {
    pub fn spec(&self) -> SplitSpec {
        SplitSpec {
            train_frac: self.train_frac,
            holdout_frac: self.holdout_frac,
            test_frac: self.test_frac,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// JSON-lines corpus with "id", "text" and optional "lat"/"lon".
    #[arg(long)]
    pub corpus: PathBuf,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    pub skip_bad: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Region as south,west,north,east in degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub bounds: GeoBounds,
    /// Number of rows and columns of the grid.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    /// Weight of neighbouring cells when smoothing the posterior.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Number of neighbour rings used when smoothing [default: grid size].
    #[arg(long)]
    pub diameter: Option<usize>,
    /// Number of most frequent words removed as stopwords.
    #[arg(long, default_value_t = DEFAULT_STOPWORD_COUNT)]
    pub stopwords_k: usize,
    /// Use linear interpolation with this bigram weight instead of Kneser-Ney smoothing.
    #[arg(long)]
    pub baseline_lambda1: Option<f64>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Model directory to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Override the model's smoothing weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the model's smoothing diameter.
    #[arg(long)]
    pub diameter: Option<usize>,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Override the model's smoothing weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the model's smoothing diameter.
    #[arg(long)]
    pub diameter: Option<usize>,
    /// Width of the error histogram bins in kilometres.
    #[arg(long, default_value_t = geobigram::evaluation::DEFAULT_BIN_WIDTH_KM)]
    pub bin_width_km: f64,
    /// Directory for errors.csv, cdf.csv and density.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Region as south,west,north,east in degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub bounds: GeoBounds,
    /// Grid sizes to try [default: 5..=15].
    #[arg(long, value_delimiter = ',')]
    pub grids: Vec<usize>,
    /// Smoothing weights to try [default: 0.1, 0.2, ..., 1.0].
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Diameters to try [default: 1..=g for each grid size].
    #[arg(long, value_delimiter = ',')]
    pub diameters: Vec<usize>,
    /// Number of most frequent words removed as stopwords.
    #[arg(long, default_value_t = DEFAULT_STOPWORD_COUNT)]
    pub stopwords_k: usize,
    /// Use linear interpolation with this bigram weight instead of Kneser-Ney smoothing.
    #[arg(long)]
    pub baseline_lambda1: Option<f64>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// CSV file for the error surface.
    #[arg(long, default_value = "tuning.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Region as south,west,north,east in degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub bounds: GeoBounds,
    /// Number of rows and columns of the planted grid.
    #[arg(long, default_value_t = 4)]
    pub grid: usize,
    /// Private words per cell.
    #[arg(long, default_value_t = 40)]
    pub vocab_per_cell: usize,
    /// Words shared by every cell.
    #[arg(long, default_value_t = 0)]
    pub shared_vocab: usize,
    /// Posts generated in each cell.
    #[arg(long, default_value_t = 100)]
    pub posts_per_cell: usize,
    /// Tokens in each post.
    #[arg(long, default_value_t = 6)]
    pub tokens_per_post: usize,
    /// Probability that a token is drawn from a random other cell.
    #[arg(long, default_value_t = 0.0)]
    pub leakage: f64,
    /// Probability that a token is drawn from an adjacent cell.
    #[arg(long, default_value_t = 0.0)]
    pub neighbor_share: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON-lines corpus to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: CorpusArgs,
    /// JSON-lines file to write.
    #[arg(long)]
    pub out: PathBuf,
}
