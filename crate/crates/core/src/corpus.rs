//! JSON-lines corpus files: one `{"id", "text", "lat"?, "lon"?}` object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::grid::GeoPoint;
use crate::text::RawPost;

#[derive(Debug, Serialize, Deserialize)]
struct CorpusLine {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lon: Option<f64>,
}

impl From<&RawPost> for CorpusLine {
    fn from(p: &RawPost) -> Self {
        CorpusLine {
            id: p.id.clone(),
            text: p.text.clone(),
            lat: p.location.map(|l| l.lat),
            lon: p.location.map(|l| l.lon),
        }
    }
}

fn parse_line(line: &str) -> std::result::Result<RawPost, String> {
    let parsed: CorpusLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let location = match (parsed.lat, parsed.lon) {
        (Some(lat), Some(lon)) => Some(GeoPoint::new(lat, lon).map_err(|e| e.to_string())?),
        (None, None) => None,
        _ => return Err("lat and lon must be given together".into()),
    };
    Ok(RawPost {
        id: parsed.id,
        text: parsed.text,
        location,
    })
}

/// Result of reading a corpus; `skipped` holds `(line number, reason)` for
/// malformed lines when they were allowed.
#[derive(Debug, Default)]
pub struct Corpus {
    pub posts: Vec<RawPost>,
    pub skipped: Vec<(usize, String)>,
}

/// Reads a JSON-lines corpus. Blank lines are ignored. A malformed line is an
/// error unless `skip_bad` is set, in which case it is recorded and skipped.
pub fn read_corpus(path: &Path, skip_bad: bool) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| GeoError::io(path, e))?;
    let mut corpus = Corpus::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GeoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(post) => corpus.posts.push(post),
            Err(reason) if skip_bad => corpus.skipped.push((i + 1, reason)),
            Err(reason) => {
                return Err(GeoError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason,
                })
            }
        }
    }
    Ok(corpus)
}

pub fn write_corpus(path: &Path, posts: &[RawPost]) -> Result<()> {
    let file = File::create(path).map_err(|e| GeoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in posts {
        let line = serde_json::to_string(&CorpusLine::from(p)).expect("corpus lines always serialize");
        writeln!(w, "{line}").map_err(|e| GeoError::io(path, e))?;
    }
    w.flush().map_err(|e| GeoError::io(path, e))
}
