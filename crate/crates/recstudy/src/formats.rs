//! MovieLens-style CSV files: ratings, item catalog, and recommendation lists.
//!
//! Line numbers in errors count the header as line 1.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use recstudy_core::{
    BenchmarkDataset, DatasetError, Item, ItemId, RatingScale, Rating, RecEntry,
    RecommendationSets, RecsError, UserId,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RATINGS_HEADER: [&str; 4] = ["userId", "movieId", "rating", "timestamp"];
pub const ITEMS_HEADER: [&str; 3] = ["movieId", "title", "genres"];
pub const RECS_HEADER: [&str; 4] = ["algorithm", "userId", "rank", "itemId"];
pub const NO_GENRES: &str = "(no genres listed)";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: malformed row ({reason})")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: rating outside the dataset scale")]
    OutOfScaleRating { line: u64 },
    #[error("line {line}: duplicate (user, item) pair")]
    DuplicatePair { line: u64 },
    #[error(transparent)]
    Recommendations(#[from] RecsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        source: Box<FormatError>,
    },
}

impl FormatError {
    /// The underlying error without file context.
    pub fn root(&self) -> &FormatError {
        match self {
            FormatError::InFile { source, .. } => source.root(),
            other => other,
        }
    }

    fn in_file(self, path: &Path) -> Self {
        FormatError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}

fn malformed(line: u64, reason: impl Into<String>) -> FormatError {
    FormatError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

fn from_csv(err: csv::Error) -> FormatError {
    let line = err.position().map_or(0, |p| p.line());
    malformed(line, err.to_string())
}

fn reader<R: Read>(input: R, expected: &[&str]) -> Result<csv::Reader<R>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(input);
    let header = rdr.headers().map_err(from_csv)?;
    let found: Vec<&str> = header
        .iter()
        .enumerate()
        .map(|(i, h)| if i == 0 { h.trim_start_matches('\u{feff}') } else { h })
        .map(str::trim)
        .collect();
    if found != expected {
        return Err(malformed(1, format!("expected header {}", expected.join(","))));
    }
    Ok(rdr)
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, line: u64) -> Result<&'a str, FormatError> {
    rec.get(idx)
        .map(str::trim)
        .ok_or_else(|| malformed(line, format!("missing field {}", idx + 1)))
}

fn parse_num<T: std::str::FromStr>(s: &str, line: u64, what: &str) -> Result<T, FormatError> {
    s.parse()
        .map_err(|_| malformed(line, format!("invalid {what} '{s}'")))
}

/// Parses `userId,movieId,rating,timestamp` rows. The timestamp may be empty.
pub fn parse_ratings<R: Read>(input: R, scale: RatingScale) -> Result<Vec<Rating>, FormatError> {
    let mut rdr = reader(input, &RATINGS_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(from_csv)?;
        let line = rec.position().map_or(0, |p| p.line());
        let user = UserId(parse_num(field(&rec, 0, line)?, line, "userId")?);
        let item = ItemId(parse_num(field(&rec, 1, line)?, line, "movieId")?);
        let value: f64 = parse_num(field(&rec, 2, line)?, line, "rating")?;
        let ts = field(&rec, 3, line)?;
        let timestamp = if ts.is_empty() {
            None
        } else {
            Some(parse_num(ts, line, "timestamp")?)
        };
        if !scale.contains(value) {
            return Err(FormatError::OutOfScaleRating { line });
        }
        if !seen.insert((user, item)) {
            return Err(FormatError::DuplicatePair { line });
        }
        out.push(Rating {
            user,
            item,
            value,
            timestamp,
        });
    }
    Ok(out)
}

/// Parses `movieId,title,genres` rows with pipe-separated genres.
pub fn parse_items<R: Read>(input: R) -> Result<Vec<Item>, FormatError> {
    let mut rdr = reader(input, &ITEMS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(from_csv)?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = ItemId(parse_num(field(&rec, 0, line)?, line, "movieId")?);
        let title = field(&rec, 1, line)?.to_string();
        let raw = field(&rec, 2, line)?;
        let genres: BTreeSet<String> = if raw.is_empty() || raw == NO_GENRES {
            BTreeSet::new()
        } else {
            raw.split('|').map(|g| g.trim().to_string()).collect()
        };
        out.push(Item { id, title, genres });
    }
    Ok(out)
}

/// Parses `algorithm,userId,rank,itemId` rows, keeping line numbers.
pub fn parse_recommendations<R: Read>(input: R) -> Result<Vec<(usize, RecEntry)>, FormatError> {
    let mut rdr = reader(input, &RECS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(from_csv)?;
        let line = rec.position().map_or(0, |p| p.line());
        let algorithm = field(&rec, 0, line)?;
        if algorithm.is_empty() {
            return Err(malformed(line, "empty algorithm label"));
        }
        out.push((
            line as usize,
            RecEntry {
                algorithm: algorithm.to_string(),
                user: UserId(parse_num(field(&rec, 1, line)?, line, "userId")?),
                rank: parse_num(field(&rec, 2, line)?, line, "rank")?,
                item: ItemId(parse_num(field(&rec, 3, line)?, line, "itemId")?),
            },
        ));
    }
    Ok(out)
}

pub fn load_recommendation_sets<R: Read>(
    input: R,
    dataset: &BenchmarkDataset,
) -> Result<RecommendationSets, FormatError> {
    let rows = parse_recommendations(input)?;
    Ok(RecommendationSets::from_rows(rows, dataset)?)
}

pub fn write_ratings<W: Write>(
    out: W,
    ratings: impl IntoIterator<Item = Rating>,
) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RATINGS_HEADER)?;
    for r in ratings {
        let ts = r.timestamp.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([
            r.user.to_string(),
            r.item.to_string(),
            format_rating(r.value),
            ts,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_recommendations<W: Write>(
    out: W,
    rows: impl IntoIterator<Item = RecEntry>,
) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RECS_HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm,
            r.user.to_string(),
            r.rank.to_string(),
            r.item.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Ratings as MovieLens writes them: always one decimal place at least.
pub fn format_rating(value: f64) -> String {
    if value.fract() == 0.0 {
        format!("{value:.1}")
    } else {
        value.to_string()
    }
}

/// Where a benchmark dataset lives on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub ratings: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<PathBuf>,
    #[serde(default)]
    pub scale: RatingScale,
}

impl DatasetRef {
    /// Accepts either a ratings file or a directory holding `ratings.csv`
    /// and, optionally, `movies.csv`.
    pub fn from_path(path: &Path, scale: RatingScale) -> Self {
        if path.is_dir() {
            let items = path.join("movies.csv");
            DatasetRef {
                ratings: path.join("ratings.csv"),
                items: items.exists().then_some(items),
                scale,
            }
        } else {
            DatasetRef {
                ratings: path.to_path_buf(),
                items: None,
                scale,
            }
        }
    }

    pub fn load(&self) -> Result<BenchmarkDataset, FormatError> {
        let ratings = parse_ratings(open(&self.ratings)?, self.scale)
            .map_err(|e| e.in_file(&self.ratings))?;
        let items = match &self.items {
            Some(path) => parse_items(open(path)?).map_err(|e| e.in_file(path))?,
            None => Vec::new(),
        };
        Ok(BenchmarkDataset::build(ratings, items, self.scale)?)
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn load_recommendation_file(
    path: &Path,
    dataset: &BenchmarkDataset,
) -> Result<RecommendationSets, FormatError> {
    load_recommendation_sets(open(path)?, dataset).map_err(|e| e.in_file(path))
}
