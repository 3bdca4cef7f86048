//! Interaction-log parsing, implicit conversion, and train/test splitting.
//!
//! Raw user and item ids are mapped to dense 0-based indices at ingestion;
//! the mapping is preserved in an id-dictionary sidecar so reports can speak
//! the original vocabulary. The split is static: downstream pre-processing
//! never touches the test matrix.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::{InteractionMatrix, MatrixError};
use crate::categories::{CategoryError, CategoryMap};
use crate::seed::Seed;

const SPLIT_STREAM: u64 = 0x53504c49_54;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("interaction log has no ratings to threshold")]
    MissingRatings,
    #[error("temporal split requested but records carry no timestamps")]
    MissingTimestamps,
    #[error("split ratio {0} outside (0, 1)")]
    InvalidRatio(f64),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Category(#[from] CategoryError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Supported interaction-log layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// One line per user: `user<delim>item item item ...` (MIND-behaviors
    /// style click lists; list position doubles as the timestamp).
    TsvClicks,
    /// `user<delim>item<delim>rating[<delim>timestamp]`
    CsvRatings,
    /// `user<delim>item[<delim>timestamp]`
    CsvPairs,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv-clicks" => Ok(Format::TsvClicks),
            "csv-ratings" => Ok(Format::CsvRatings),
            "csv-pairs" => Ok(Format::CsvPairs),
            other => Err(format!(
                "unknown format {other:?} (expected tsv-clicks, csv-ratings or csv-pairs)"
            )),
        }
    }
}

/// Bidirectional raw-id <-> dense-index dictionary, in first-appearance
/// order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    forward: HashMap<String, u32>,
    reverse: Vec<String>,
}

impl IdMap {
    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(&id) = self.forward.get(raw) {
            return id;
        }
        let id = self.reverse.len() as u32;
        self.forward.insert(raw.to_string(), id);
        self.reverse.push(raw.to_string());
        id
    }

    pub fn get(&self, raw: &str) -> Option<u32> {
        self.forward.get(raw).copied()
    }

    pub fn raw(&self, id: u32) -> &str {
        &self.reverse[id as usize]
    }

    pub fn len(&self) -> u32 {
        self.reverse.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub user: u32,
    pub item: u32,
    pub rating: Option<f64>,
    pub timestamp: Option<f64>,
}

/// Parsed interaction log with dense ids. Ratings stay staged here until
/// [`implicitize`] thresholds them.
#[derive(Debug, Clone, Default)]
pub struct InteractionLog {
    pub users: IdMap,
    pub items: IdMap,
    pub records: Vec<Record>,
}

impl InteractionLog {
    /// Binary matrix over all records, ignoring any staged ratings.
    pub fn to_matrix(&self) -> InteractionMatrix {
        InteractionMatrix::from_entries(
            self.users.len(),
            self.items.len(),
            self.records.iter().map(|r| (r.user, r.item)),
        )
        .expect("interned ids are in range")
    }

    pub fn has_timestamps(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.timestamp.is_some())
    }
}

/// Parse an interaction file. Malformed lines report the 1-based line
/// number; an empty file is a valid empty log.
pub fn parse_interactions<P: AsRef<Path>>(
    path: P,
    format: Format,
    delimiter: char,
) -> Result<InteractionLog, IngestError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut log = InteractionLog::default();

    let err = |line: usize, msg: String| IngestError::Parse {
        path: display.clone(),
        line,
        msg,
    };

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(delimiter).collect();
        match format {
            Format::TsvClicks => {
                if fields.len() != 2 {
                    return Err(err(lineno, format!("expected 2 fields, got {}", fields.len())));
                }
                let user = log.users.intern(fields[0]);
                for (pos, raw_item) in fields[1].split_whitespace().enumerate() {
                    let item = log.items.intern(raw_item);
                    log.records.push(Record {
                        user,
                        item,
                        rating: None,
                        timestamp: Some(pos as f64),
                    });
                }
            }
            Format::CsvRatings => {
                if fields.len() != 3 && fields.len() != 4 {
                    return Err(err(lineno, format!("expected 3-4 fields, got {}", fields.len())));
                }
                let user = log.users.intern(fields[0]);
                let item = log.items.intern(fields[1]);
                let rating: f64 = fields[2]
                    .trim()
                    .parse()
                    .map_err(|_| err(lineno, format!("non-numeric rating {:?}", fields[2])))?;
                let timestamp = parse_optional_ts(fields.get(3), lineno, &err)?;
                log.records.push(Record {
                    user,
                    item,
                    rating: Some(rating),
                    timestamp,
                });
            }
            Format::CsvPairs => {
                if fields.len() != 2 && fields.len() != 3 {
                    return Err(err(lineno, format!("expected 2-3 fields, got {}", fields.len())));
                }
                let user = log.users.intern(fields[0]);
                let item = log.items.intern(fields[1]);
                let timestamp = parse_optional_ts(fields.get(2), lineno, &err)?;
                log.records.push(Record {
                    user,
                    item,
                    rating: None,
                    timestamp,
                });
            }
        }
    }
    Ok(log)
}

fn parse_optional_ts(
    field: Option<&&str>,
    lineno: usize,
    err: &dyn Fn(usize, String) -> IngestError,
) -> Result<Option<f64>, IngestError> {
    match field {
        None => Ok(None),
        Some(raw) => raw
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| err(lineno, format!("non-numeric timestamp {raw:?}"))),
    }
}

/// Convert staged explicit ratings to implicit feedback: an entry is kept
/// iff its rating is at least `threshold` (boundary inclusive).
pub fn implicitize(log: &InteractionLog, threshold: f64) -> Result<InteractionMatrix, IngestError> {
    let mut kept = Vec::with_capacity(log.records.len());
    for record in &log.records {
        let rating = record.rating.ok_or(IngestError::MissingRatings)?;
        if rating >= threshold {
            kept.push((record.user, record.item));
        }
    }
    Ok(InteractionMatrix::from_entries(log.users.len(), log.items.len(), kept)?)
}

/// Parse an item-category file (`item<delim>category[<delim>category...]`).
/// Raw item ids are resolved against the interaction dictionary; lines for
/// items that never appear in the interactions are skipped. Category ids are
/// dense in first-appearance order.
pub fn parse_categories<P: AsRef<Path>>(
    path: P,
    delimiter: char,
    items: &IdMap,
) -> Result<CategoryMap, IngestError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut names = IdMap::default();
    let mut entries: Vec<(u32, Vec<u32>)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split(delimiter);
        let raw_item = fields.next().unwrap_or("");
        let cats: Vec<u32> = fields
            .filter(|c| !c.trim().is_empty())
            .map(|c| names.intern(c.trim()))
            .collect();
        if cats.is_empty() {
            return Err(IngestError::Parse {
                path: display,
                line: lineno,
                msg: format!("item {raw_item:?} lists no categories"),
            });
        }
        match items.get(raw_item) {
            Some(item) => entries.push((item, cats)),
            None => log::debug!("category file item {raw_item:?} not in interactions; skipped"),
        }
    }

    let names: Vec<String> = (0..names.len()).map(|c| names.raw(c).to_string()).collect();
    Ok(CategoryMap::from_entries(names, entries)?)
}

/// A disjoint train/test pair over a shared id space.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: InteractionMatrix,
    pub test: InteractionMatrix,
    pub seed: Seed,
    pub ratio: f64,
}

/// Randomly sample `ratio` of each user profile into train, the remainder
/// into test. A user keeps at least one training interaction; single-item
/// profiles go entirely to train. Sampling is seeded per user, so the result
/// is independent of iteration order.
pub fn split_per_user(
    m: &InteractionMatrix,
    ratio: f64,
    seed: Seed,
) -> Result<SplitPair, IngestError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(IngestError::InvalidRatio(ratio));
    }
    let split_seed = seed.derive(SPLIT_STREAM);
    let per_user: Vec<(Vec<u32>, Vec<u32>)> = (0..m.n_users())
        .into_par_iter()
        .map(|u| {
            let profile = m.profile(u);
            let n = profile.len();
            if n == 0 {
                return (Vec::new(), Vec::new());
            }
            if n == 1 {
                return (profile.to_vec(), Vec::new());
            }
            let take = train_count(ratio, n);
            let mut rng = split_seed.derive(u as u64).rng();
            let chosen = index::sample(&mut rng, n, take);
            let mut mask = vec![false; n];
            for idx in chosen.iter() {
                mask[idx] = true;
            }
            let mut train = Vec::with_capacity(take);
            let mut test = Vec::with_capacity(n - take);
            for (idx, &item) in profile.iter().enumerate() {
                if mask[idx] {
                    train.push(item);
                } else {
                    test.push(item);
                }
            }
            (train, test)
        })
        .collect();

    assemble_split(m, per_user, ratio, seed)
}

/// Temporal split: each user's earliest interactions go to train, the most
/// recent to test. Requires every record to carry a timestamp.
pub fn split_temporal(log: &InteractionLog, ratio: f64) -> Result<SplitPair, IngestError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(IngestError::InvalidRatio(ratio));
    }
    if !log.has_timestamps() {
        return Err(IngestError::MissingTimestamps);
    }
    let n_users = log.users.len();
    // earliest timestamp per distinct (user, item)
    let mut per_user: Vec<HashMap<u32, f64>> = vec![HashMap::new(); n_users as usize];
    for r in &log.records {
        let ts = r.timestamp.expect("checked above");
        per_user[r.user as usize]
            .entry(r.item)
            .and_modify(|t| *t = t.min(ts))
            .or_insert(ts);
    }
    let split: Vec<(Vec<u32>, Vec<u32>)> = per_user
        .into_iter()
        .map(|items| {
            let mut ordered: Vec<(u32, f64)> = items.into_iter().collect();
            ordered.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let n = ordered.len();
            if n == 0 {
                return (Vec::new(), Vec::new());
            }
            if n == 1 {
                return (vec![ordered[0].0], Vec::new());
            }
            let take = train_count(ratio, n);
            let train = ordered[..take].iter().map(|&(i, _)| i).collect();
            let test = ordered[take..].iter().map(|&(i, _)| i).collect();
            (train, test)
        })
        .collect();

    let m = log.to_matrix();
    assemble_split(&m, split, ratio, Seed(0))
}

fn train_count(ratio: f64, n: usize) -> usize {
    let take = (ratio * n as f64).floor() as usize;
    take.max(1).min(n - 1)
}

fn assemble_split(
    m: &InteractionMatrix,
    per_user: Vec<(Vec<u32>, Vec<u32>)>,
    ratio: f64,
    seed: Seed,
) -> Result<SplitPair, IngestError> {
    let (train_rows, test_rows): (Vec<_>, Vec<_>) = per_user.into_iter().unzip();
    let train = InteractionMatrix::from_rows_unchecked(m.n_users(), m.n_items(), train_rows);
    let test = InteractionMatrix::from_rows_unchecked(m.n_users(), m.n_items(), test_rows);
    Ok(SplitPair {
        train,
        test,
        seed,
        ratio,
    })
}

/// Write the id-dictionary sidecar: one mapping per line,
/// `user|item<TAB>dense-id<TAB>raw-id`.
pub fn write_id_sidecar<P: AsRef<Path>>(
    path: P,
    users: &IdMap,
    items: &IdMap,
) -> Result<(), IngestError> {
    let mut w = BufWriter::new(File::create(path)?);
    for id in 0..users.len() {
        writeln!(w, "user\t{id}\t{}", users.raw(id))?;
    }
    for id in 0..items.len() {
        writeln!(w, "item\t{id}\t{}", items.raw(id))?;
    }
    w.flush()?;
    Ok(())
}
