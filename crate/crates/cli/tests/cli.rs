use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BOUNDS: &str = "0,0,2,2";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geobigram"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two posts per cell of a 2x2 grid over `BOUNDS`, each cell with its own words.
fn toy_corpus(dir: &Path) -> PathBuf {
    let cells = [
        (0.5, 0.5, "harbor ferry"),
        (0.5, 1.5, "bagel deli"),
        (1.5, 0.5, "museum gallery"),
        (1.5, 1.5, "stadium crowd"),
    ];
    let mut text = String::new();
    for (i, (lat, lon, words)) in cells.iter().enumerate() {
        for j in 0..2 {
            text.push_str(&format!(
                "{{\"id\":\"t{i}{j}\",\"text\":\"{words} {words}\",\"lat\":{lat},\"lon\":{lon}}}\n"
            ));
        }
    }
    let path = dir.join("toy.jsonl");
    fs::write(&path, text).unwrap();
    path
}

fn train_toy(dir: &Path, name: &str) -> PathBuf {
    let corpus = toy_corpus(dir);
    let model = dir.join(name);
    ok(&[
        "train",
        "--corpus",
        path_str(&corpus),
        "--bounds",
        BOUNDS,
        "--grid",
        "2",
        "--stopwords-k",
        "0",
        "--train-frac",
        "1",
        "--holdout-frac",
        "0",
        "--test-frac",
        "0",
        "--out",
        path_str(&model),
    ]);
    model
}

fn write_lines(dir: &Path, name: &str, lines: &[&str]) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, lines.iter().map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["train", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn missing_corpus_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "train",
        "--corpus",
        path_str(&tmp.path().join("absent.jsonl")),
        "--bounds",
        BOUNDS,
        "--out",
        path_str(&tmp.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));
}

#[test]
fn synth_writes_one_line_per_post_deterministically() {
    let tmp = TempDir::new().unwrap();
    let gen = |name: &str| {
        let path = tmp.path().join(name);
        ok(&[
            "synth",
            "--bounds",
            BOUNDS,
            "--grid",
            "2",
            "--posts-per-cell",
            "10",
            "--seed",
            "7",
            "--out",
            path_str(&path),
        ]);
        fs::read(path).unwrap()
    };
    let first = gen("a.jsonl");
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 40);
    assert_eq!(first, gen("b.jsonl"));
}

#[test]
fn synth_rejects_leakage_outside_unit_interval() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "synth",
        "--bounds",
        BOUNDS,
        "--leakage",
        "1.5",
        "--out",
        path_str(&tmp.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("leakage"));
}

#[test]
fn train_writes_every_cell_and_count_based_priors() {
    let tmp = TempDir::new().unwrap();
    let model = train_toy(tmp.path(), "m");
    let mut cells: Vec<String> = fs::read_dir(model.join("cells"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    cells.sort();
    assert_eq!(cells, ["r0_c0", "r0_c1", "r1_c0", "r1_c1"]);

    let priors = fs::read_to_string(model.join("priors.tsv")).unwrap();
    let rows: Vec<&str> = priors.lines().skip(1).collect();
    assert_eq!(
        rows,
        ["0\t0\t2\t0.25", "0\t1\t2\t0.25", "1\t0\t2\t0.25", "1\t1\t2\t0.25"]
    );
    assert_eq!(
        fs::read_to_string(model.join("cells/r1_c0/bigrams.tsv")).unwrap(),
        "gallery\tmuseum\t2\nmuseum\tgallery\t4\n"
    );
    assert_eq!(
        fs::read_to_string(model.join("splits/train.jsonl"))
            .unwrap()
            .lines()
            .count(),
        8
    );
    assert!(!model.join(".lock").exists());
}

#[test]
fn train_reports_split_sizes_and_cell_counts() {
    let tmp = TempDir::new().unwrap();
    let corpus = toy_corpus(tmp.path());
    let stdout = ok(&[
        "train",
        "--corpus",
        path_str(&corpus),
        "--bounds",
        BOUNDS,
        "--grid",
        "2",
        "--stopwords-k",
        "0",
        "--train-frac",
        "1",
        "--holdout-frac",
        "0",
        "--test-frac",
        "0",
        "--out",
        path_str(&tmp.path().join("m")),
    ]);
    assert!(stdout.contains("split train=8 holdout=0 test=0"));
    assert!(stdout.contains("1\t1\t2"));
}

#[test]
fn training_text_maps_back_to_its_cell_center() {
    let tmp = TempDir::new().unwrap();
    let model = train_toy(tmp.path(), "m");
    let input = write_lines(
        tmp.path(),
        "q.jsonl",
        &[r#"{"id":"q","text":"museum gallery museum gallery"}"#],
    );
    let out = tmp.path().join("e.csv");
    ok(&[
        "estimate",
        "--model",
        path_str(&model),
        "--corpus",
        path_str(&input),
        "--alpha",
        "0",
        "--out",
        path_str(&out),
    ]);
    let rows = csv_rows(&out);
    assert_eq!(
        rows[0],
        [
            "post_id",
            "est_lat",
            "est_lon",
            "cell_row",
            "cell_col",
            "posterior",
            "smoothed_score"
        ]
    );
    assert_eq!(rows[1][..5], ["q", "1.5", "0.5", "1", "0"]);
}

#[test]
fn empty_text_falls_back_to_the_first_highest_prior_cell() {
    let tmp = TempDir::new().unwrap();
    let model = train_toy(tmp.path(), "m");
    let input = write_lines(tmp.path(), "q.jsonl", &[r#"{"id":"q","text":""}"#]);
    let out = tmp.path().join("e.csv");
    ok(&[
        "estimate",
        "--model",
        path_str(&model),
        "--corpus",
        path_str(&input),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(csv_rows(&out)[1][..5], ["q", "0.5", "0.5", "0", "0"]);
}

#[test]
fn empty_input_gives_header_only() {
    let tmp = TempDir::new().unwrap();
    let model = train_toy(tmp.path(), "m");
    let input = write_lines(tmp.path(), "q.jsonl", &[]);
    let out = tmp.path().join("e.csv");
    ok(&[
        "estimate",
        "--model",
        path_str(&model),
        "--corpus",
        path_str(&input),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "post_id,est_lat,est_lon,cell_row,cell_col,posterior,smoothed_score\n"
    );
}

#[test]
fn post_at_its_estimated_center_has_zero_error() {
    let tmp = TempDir::new().unwrap();
    let model = train_toy(tmp.path(), "m");
    let input = write_lines(
        tmp.path(),
        "q.jsonl",
        &[
            r#"{"id":"q","text":"stadium crowd stadium","lat":1.5,"lon":1.5}"#,
            r#"{"id":"u","text":"stadium crowd"}"#,
        ],
    );
    let out = tmp.path().join("report");
    let run_out = run(&[
        "evaluate",
        "--model",
        path_str(&model),
        "--corpus",
        path_str(&input),
        "--alpha",
        "0",
        "--out",
        path_str(&out),
    ]);
    assert!(run_out.status.success());
    assert!(String::from_utf8_lossy(&run_out.stdout).contains("mean_error_km=0\n"));
    assert!(String::from_utf8_lossy(&run_out.stderr).contains("1 posts lack a true location"));
    for file in ["errors.csv", "cdf.csv", "density.csv"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
}

#[test]
fn evaluate_without_located_posts_fails() {
    let tmp = TempDir::new().unwrap();
    let model = train_toy(tmp.path(), "m");
    let input = write_lines(tmp.path(), "q.jsonl", &[r#"{"id":"u","text":"stadium crowd"}"#]);
    let out = run(&[
        "evaluate",
        "--model",
        path_str(&model),
        "--corpus",
        path_str(&input),
        "--out",
        path_str(&tmp.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_lines_fail_with_line_number_unless_skipped() {
    let tmp = TempDir::new().unwrap();
    let model = train_toy(tmp.path(), "m");
    let input = write_lines(tmp.path(), "q.jsonl", &[r#"{"id":"a","text":"deli"}"#, "not json"]);
    let out_csv = tmp.path().join("e.csv");
    let args = [
        "estimate",
        "--model",
        path_str(&model),
        "--corpus",
        path_str(&input),
        "--out",
        path_str(&out_csv),
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));

    let mut skipping = args.to_vec();
    skipping.push("--skip-bad");
    ok(&skipping);
    assert_eq!(csv_rows(&out_csv).len(), 2);
}

#[test]
fn singleton_search_space_gives_one_row() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    ok(&[
        "synth",
        "--bounds",
        BOUNDS,
        "--grid",
        "2",
        "--posts-per-cell",
        "20",
        "--out",
        path_str(&corpus),
    ]);
    let out = tmp.path().join("tuning.csv");
    let stdout = ok(&[
        "tune",
        "--corpus",
        path_str(&corpus),
        "--bounds",
        BOUNDS,
        "--grids",
        "2",
        "--alphas",
        "0.5",
        "--diameters",
        "1",
        "--stopwords-k",
        "0",
        "--out",
        path_str(&out),
    ]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], ["g", "alpha", "d", "mean_error_km"]);
    assert_eq!(rows[1][..3], ["2", "0.5", "1"]);
    assert!(stdout.starts_with("best g=2 alpha=0.5 d=1 "));
}

#[test]
fn unknown_format_version_is_refused() {
    let tmp = TempDir::new().unwrap();
    let model = train_toy(tmp.path(), "m");
    let manifest = model.join("manifest.json");
    let text = fs::read_to_string(&manifest)
        .unwrap()
        .replace("\"format_version\": 1", "\"format_version\": 2");
    fs::write(&manifest, text).unwrap();
    let input = write_lines(tmp.path(), "q.jsonl", &[r#"{"id":"q","text":"deli"}"#]);
    let out = run(&[
        "estimate",
        "--model",
        path_str(&model),
        "--corpus",
        path_str(&input),
        "--out",
        path_str(&tmp.path().join("e.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 2"));
}

#[test]
fn identical_runs_produce_identical_files() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    ok(&[
        "synth",
        "--bounds",
        BOUNDS,
        "--grid",
        "3",
        "--posts-per-cell",
        "30",
        "--leakage",
        "0.3",
        "--seed",
        "5",
        "--out",
        path_str(&corpus),
    ]);
    let train_and_estimate = |name: &str| {
        let model = tmp.path().join(name);
        ok(&[
            "train",
            "--corpus",
            path_str(&corpus),
            "--bounds",
            BOUNDS,
            "--grid",
            "3",
            "--stopwords-k",
            "5",
            "--seed",
            "9",
            "--out",
            path_str(&model),
        ]);
        let csv = model.join("estimates.csv");
        ok(&[
            "estimate",
            "--model",
            path_str(&model),
            "--corpus",
            path_str(&model.join("splits/test.jsonl")),
            "--out",
            path_str(&csv),
        ]);
        model
    };
    let a = train_and_estimate("a");
    let b = train_and_estimate("b");
    let mut files = Vec::new();
    collect_files(&a, &a, &mut files);
    assert!(files.len() > 9 * 3);
    for rel in files {
        assert_eq!(
            fs::read(a.join(&rel)).unwrap(),
            fs::read(b.join(&rel)).unwrap(),
            "{rel:?} differs"
        );
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            out.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
}
