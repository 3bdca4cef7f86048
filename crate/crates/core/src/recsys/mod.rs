//! Built-in top-N recommenders over binary interaction matrices.
//!
//! All four algorithms share the AllItems-minus-train candidate policy (a
//! user is scored against the full catalog except their own training items)
//! and the crate-wide tie-break (score descending, item id ascending), so
//! outputs are reproducible byte for byte.

mod als;
mod bpr;
mod item_knn;
mod most_pop;

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

pub use als::{fit_als, implicit_mf, AlsModel, AlsParams};
pub use bpr::{bpr, fit_bpr, triple_gradients, triple_loss, BprModel, BprParams};
pub use item_knn::item_knn;
pub use most_pop::most_pop;

use crate::matrix::InteractionMatrix;
use crate::ranking::RankedList;
use crate::seed::Seed;

pub const CANDIDATE_POLICY: &str = "all-items-minus-train";

#[derive(Debug, Error)]
pub enum RecsysError {
    #[error("malformed recommendations file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Top-N lists for every user, tagged with the producing algorithm and the
/// candidate policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendations {
    pub algorithm: String,
    pub policy: &'static str,
    lists: Vec<RankedList>,
}

impl Recommendations {
    pub fn new(algorithm: impl Into<String>, lists: Vec<RankedList>) -> Self {
        Recommendations {
            algorithm: algorithm.into(),
            policy: CANDIDATE_POLICY,
            lists,
        }
    }

    pub fn list(&self, user: u32) -> &RankedList {
        &self.lists[user as usize]
    }

    pub fn lists(&self) -> &[RankedList] {
        &self.lists
    }

    pub fn n_users(&self) -> u32 {
        self.lists.len() as u32
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), RecsysError> {
        writeln!(w, "algorithm,user,rank,item,score")?;
        for list in &self.lists {
            for (rank, &(item, score)) in list.items().iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", self.algorithm, list.user(), rank + 1, item, score)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv_file<P: AsRef<Path>>(path: P, n_users: u32) -> Result<Self, RecsysError> {
        Self::read_csv(BufReader::new(File::open(path)?), n_users)
    }

    pub fn read_csv<R: BufRead>(reader: R, n_users: u32) -> Result<Self, RecsysError> {
        let mut algorithm = String::new();
        let mut per_user: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_users as usize];
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') || line.starts_with("algorithm,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(RecsysError::BadFile(format!("line {}: expected 5 fields", idx + 1)));
            }
            let bad = |what: &str| RecsysError::BadFile(format!("line {}: bad {what}", idx + 1));
            if algorithm.is_empty() {
                algorithm = f[0].to_string();
            }
            let user: usize = f[1].parse().map_err(|_| bad("user"))?;
            let item: u32 = f[3].parse().map_err(|_| bad("item"))?;
            let score: f64 = f[4].parse().map_err(|_| bad("score"))?;
            if user >= per_user.len() {
                return Err(bad("user range"));
            }
            per_user[user].push((item, score));
        }
        let lists = per_user
            .into_iter()
            .enumerate()
            .map(|(u, items)| {
                RankedList::new(u as u32, items)
                    .map_err(|e| RecsysError::BadFile(format!("user {u}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Recommendations {
            algorithm,
            policy: CANDIDATE_POLICY,
            lists,
        })
    }
}

/// One configured recommender. Dispatches to the free functions below;
/// MostPop and ItemKNN are deterministic and ignore the seed.
#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    MostPop,
    ItemKnn { neighbors: usize },
    ImplicitMf(AlsParams),
    Bpr(BprParams),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::MostPop => "most-pop",
            Algorithm::ItemKnn { .. } => "item-knn",
            Algorithm::ImplicitMf(_) => "implicit-mf",
            Algorithm::Bpr(_) => "bpr",
        }
    }

    pub fn recommend(&self, train: &InteractionMatrix, seed: Seed, n: usize) -> Recommendations {
        match self {
            Algorithm::MostPop => most_pop(train, n),
            Algorithm::ItemKnn { neighbors } => item_knn(train, *neighbors, n),
            Algorithm::ImplicitMf(params) => implicit_mf(train, params, seed, n),
            Algorithm::Bpr(params) => bpr(train, params, seed, n),
        }
    }
}

/// Rank dense per-item scores for one user: drop training-profile items,
/// apply the shared tie-break, keep the top n.
pub(crate) fn rank_dense_scores(
    user: u32,
    scores: &[f64],
    train: &InteractionMatrix,
    n: usize,
) -> RankedList {
    let candidates: Vec<(u32, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !train.contains(user, *i as u32))
        .map(|(i, &s)| (i as u32, s))
        .collect();
    let mut list = RankedList::from_scores(user, candidates);
    list.truncate(n);
    list
}
