use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use geobigram::corpus::{read_corpus, write_corpus};
use geobigram::evaluation::{evaluate_with_bins, write_estimates_csv};
use geobigram::model_dir::{self, read_manifest};
use geobigram::tuning::{DiameterRule, TuneOptions};
use geobigram::{
    generate_synthetic, grid_search, split, GeoBounds, GeoEnsemble, GeoError, GridPartition, RawPost, SearchSpace,
    Smoothing, SmoothingConfig, SyntheticSpec, TextPipeline,
};

use crate::args::{CorpusArgs, EstimateArgs, EvaluateArgs, PreprocessArgs, SynthArgs, TrainArgs, TuneArgs};
use crate::UsageError;

fn read_posts(input: &CorpusArgs) -> Result<Vec<RawPost>> {
    let corpus = read_corpus(&input.corpus, input.skip_bad)?;
    for (line, reason) in &corpus.skipped {
        eprintln!("skipped {}:{line}: {reason}", input.corpus.display());
    }
    Ok(corpus.posts)
}

/// Keeps the posts whose location lies inside `bounds`, reporting how many were dropped.
fn located_in(posts: Vec<RawPost>, bounds: GeoBounds) -> Vec<RawPost> {
    let total = posts.len();
    let unlocated = posts.iter().filter(|p| p.location.is_none()).count();
    let kept: Vec<RawPost> = posts
        .into_iter()
        .filter(|p| p.location.is_some_and(|l| bounds.contains(l)))
        .collect();
    let outside = total - unlocated - kept.len();
    if unlocated > 0 || outside > 0 {
        eprintln!("dropped {unlocated} posts without a location and {outside} outside the bounds");
    }
    kept
}

fn language_model(lambda1: Option<f64>) -> Result<Smoothing> {
    Ok(match lambda1 {
        Some(l) => Smoothing::interpolated(l)?,
        None => Smoothing::default(),
    })
}

fn load_model(dir: &Path, alpha: Option<f64>, diameter: Option<usize>) -> Result<GeoEnsemble> {
    let smoothing = if alpha.is_none() && diameter.is_none() {
        None
    } else {
        let manifest = read_manifest(dir)?;
        Some(SmoothingConfig::new(
            alpha.unwrap_or(manifest.alpha),
            diameter.unwrap_or(manifest.diameter),
        )?)
    };
    let (ens, _) = model_dir::load(dir, smoothing)?;
    Ok(ens)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let partition = GridPartition::new(a.bounds, a.grid)?;
    let smoothing = SmoothingConfig::new(a.alpha, a.diameter.unwrap_or(a.grid))?;
    let lm = language_model(a.baseline_lambda1)?;
    let spec = a.split.spec();
    spec.validate()?;

    let located = located_in(read_posts(&a.input)?, a.bounds);
    if located.is_empty() {
        return Err(GeoError::EmptyTrainingSet).context("no located posts inside the bounds");
    }
    let (train, holdout, test) = split(&located, &spec)?;
    if train.is_empty() {
        return Err(GeoError::EmptyTrainingSet).context("the training split is empty");
    }
    let (pipeline, tokens) = TextPipeline::fit(&train, a.stopwords_k);
    let ens = GeoEnsemble::build(&tokens, partition, smoothing, lm, pipeline)?;
    model_dir::save(&ens, &a.out, a.stopwords_k, a.split.seed)?;

    let splits = a.out.join("splits");
    fs::create_dir_all(&splits).with_context(|| format!("creating {}", splits.display()))?;
    for (name, posts) in [("train", &train), ("holdout", &holdout), ("test", &test)] {
        write_corpus(&splits.join(format!("{name}.jsonl")), posts)?;
    }

    println!(
        "split train={} holdout={} test={}",
        train.len(),
        holdout.len(),
        test.len()
    );
    println!("row\tcol\tposts");
    for m in ens.models() {
        println!("{}\t{}\t{}", m.cell().row, m.cell().col, m.post_count());
    }
    Ok(())
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let ens = load_model(&a.model, a.alpha, a.diameter)?;
    let posts = read_posts(&a.input)?;
    let tokens: Vec<_> = posts.iter().map(|p| ens.pipeline().preprocess(p)).collect();

    let mut rows = Vec::with_capacity(tokens.len());
    let mut failed = 0usize;
    for (post, result) in tokens.iter().zip(ens.estimate_batch(&tokens)) {
        match result {
            Ok(est) => rows.push((post.id.as_str(), est)),
            Err(e) => {
                eprintln!("post {:?}: {e}", post.id);
                failed += 1;
            }
        }
    }
    let mut out = create(&a.out)?;
    write_estimates_csv(&mut out, rows.iter().map(|(id, est)| (*id, est)))?;
    out.flush().with_context(|| format!("writing {}", a.out.display()))?;

    println!("estimated {} posts", rows.len());
    if failed > 0 {
        bail!("{failed} posts could not be estimated");
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let ens = load_model(&a.model, a.alpha, a.diameter)?;
    let posts = read_posts(&a.input)?;
    let (located, unlocated): (Vec<_>, Vec<_>) = posts.into_iter().partition(|p| p.location.is_some());
    if !unlocated.is_empty() {
        eprintln!("{} posts lack a true location and were not evaluated", unlocated.len());
    }
    if located.is_empty() {
        return Err(GeoError::EmptyEvaluation("no post carries a true location".into()).into());
    }
    let tokens: Vec<_> = located.iter().map(|p| ens.pipeline().preprocess(p)).collect();
    let report = evaluate_with_bins(&ens, &tokens, a.bin_width_km)?;
    report.export(&a.out)?;
    println!("evaluated={}", report.per_post.len());
    println!("mean_error_km={}", report.mean_error_km);
    Ok(())
}

pub fn tune(a: TuneArgs) -> Result<()> {
    let defaults = SearchSpace::default();
    let space = SearchSpace {
        g_values: if a.grids.is_empty() { defaults.g_values } else { a.grids },
        alpha_values: if a.alphas.is_empty() {
            defaults.alpha_values
        } else {
            a.alphas
        },
        diameters: if a.diameters.is_empty() {
            DiameterRule::UpToGrid
        } else {
            DiameterRule::Values(a.diameters)
        },
    };
    space.validate()?;
    let options = TuneOptions {
        stopword_count: a.stopwords_k,
        lm: language_model(a.baseline_lambda1)?,
    };
    let spec = a.split.spec();
    spec.validate()?;

    let located = located_in(read_posts(&a.input)?, a.bounds);
    let (train, holdout, _) = split(&located, &spec)?;
    if holdout.is_empty() {
        return Err(UsageError("the hold-out split is empty; raise --holdout-frac or supply more posts".into()).into());
    }
    let result = grid_search(&train, &holdout, &space, a.bounds, options)?;
    result.write_csv(&a.out)?;

    let b = result.best;
    println!(
        "best g={} alpha={} d={} mean_error_km={}",
        b.g, b.alpha, b.d, b.mean_error_km
    );
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        g: a.grid,
        vocab_per_cell: a.vocab_per_cell,
        shared_vocab: a.shared_vocab,
        posts_per_cell: a.posts_per_cell,
        tokens_per_post: a.tokens_per_post,
        leakage: a.leakage,
        neighbor_share: a.neighbor_share,
        seed: a.seed,
    };
    let posts = generate_synthetic(&spec, a.bounds)?;
    write_corpus(&a.out, &posts)?;
    println!("wrote {} posts to {}", posts.len(), a.out.display());
    Ok(())
}

pub fn preprocess(a: PreprocessArgs) -> Result<()> {
    let (ens, _) = model_dir::load(&a.model, None)?;
    let posts = read_posts(&a.input)?;
    let mut out = create(&a.out)?;
    for post in &posts {
        let t = ens.pipeline().preprocess(post);
        let mut line = serde_json::json!({ "id": t.id, "tokens": t.tokens });
        if let Some(loc) = t.location {
            line["lat"] = loc.lat.into();
            line["lon"] = loc.lon.into();
        }
        writeln!(out, "{line}").with_context(|| format!("writing {}", a.out.display()))?;
    }
    out.flush().with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
