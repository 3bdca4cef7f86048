//! userKNN imputation: per-user candidate lists scored by neighbor support.
//!
//! For each user we find the k most similar users (cosine over binary
//! profiles) and score every item they own that the user does not by the
//! number of neighbors owning it. More supporting neighbors means higher
//! confidence that the item is relevant. Ties break on summed neighbor
//! similarity, then ascending item id, so output is a total order.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::InteractionMatrix;
use crate::ranking::RankedList;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("malformed predictions file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Nearest neighbors of one user, similarity non-increasing, self excluded,
/// zero-similarity users dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub user: u32,
    pub neighbors: Vec<(u32, f64)>,
}

/// Cosine similarity of two binary profiles: |P_u ∩ P_v| / sqrt(|P_u||P_v|),
/// zero when either profile is empty.
pub fn user_similarity(train: &InteractionMatrix, u: u32, v: u32) -> f64 {
    debug_assert_ne!(u, v);
    let pu = train.profile(u);
    let pv = train.profile(v);
    if pu.is_empty() || pv.is_empty() {
        return 0.0;
    }
    let overlap = sorted_intersection_len(pu, pv);
    overlap as f64 / ((pu.len() as f64) * (pv.len() as f64)).sqrt()
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Top-k users by similarity to `u` (ties: ascending user id). Users with no
/// profile overlap carry no information and are excluded, so the set may be
/// shorter than k.
pub fn nearest_neighbors(train: &InteractionMatrix, u: u32, k: usize) -> NeighborSet {
    assert!(k >= 1);
    let profile = train.profile(u);
    let mut overlap = vec![0u32; train.n_users() as usize];
    let mut touched = Vec::new();
    for &item in profile {
        for &v in train.item_users(item) {
            if v == u {
                continue;
            }
            if overlap[v as usize] == 0 {
                touched.push(v);
            }
            overlap[v as usize] += 1;
        }
    }
    let pu = profile.len() as f64;
    let mut neighbors: Vec<(u32, f64)> = touched
        .into_iter()
        .map(|v| {
            let pv = train.profile(v).len() as f64;
            (v, overlap[v as usize] as f64 / (pu * pv).sqrt())
        })
        .collect();
    neighbors.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    neighbors.truncate(k);
    NeighborSet { user: u, neighbors }
}

/// Candidate lists for every user: items outside the profile scored by how
/// many of the user's top-k neighbors own them, zero-support items dropped,
/// list capped at `list_cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPredictions {
    lists: Vec<RankedList>,
}

pub fn initial_predictions(
    train: &InteractionMatrix,
    k: usize,
    list_cap: usize,
) -> InitialPredictions {
    assert!(k >= 1 && list_cap >= 1);
    let lists: Vec<RankedList> = (0..train.n_users())
        .into_par_iter()
        .map(|u| predict_for_user(train, u, k, list_cap))
        .collect();
    InitialPredictions { lists }
}

fn predict_for_user(train: &InteractionMatrix, u: u32, k: usize, list_cap: usize) -> RankedList {
    let ns = nearest_neighbors(train, u, k);
    let profile = train.profile(u);
    // (neighbor count, similarity sum) per candidate item
    let mut count = vec![0u32; train.n_items() as usize];
    let mut sim_sum = vec![0.0f64; train.n_items() as usize];
    let mut touched = Vec::new();
    for &(v, sim) in &ns.neighbors {
        for &item in train.profile(v) {
            if profile.binary_search(&item).is_ok() {
                continue;
            }
            if count[item as usize] == 0 {
                touched.push(item);
            }
            count[item as usize] += 1;
            sim_sum[item as usize] += sim;
        }
    }
    let mut scored: Vec<(u32, u32, f64)> = touched
        .into_iter()
        .map(|i| (i, count[i as usize], sim_sum[i as usize]))
        .collect();
    scored.sort_unstable_by(|a, b| {
        b.1.cmp(&a.1)
            .then(b.2.total_cmp(&a.2))
            .then(a.0.cmp(&b.0))
    });
    scored.truncate(list_cap);
    RankedList::new(u, scored.into_iter().map(|(i, c, _)| (i, c as f64)).collect())
        .expect("count ordering is valid")
}

impl InitialPredictions {
    pub fn from_lists(lists: Vec<RankedList>) -> Self {
        InitialPredictions { lists }
    }

    pub fn list(&self, user: u32) -> &RankedList {
        &self.lists[user as usize]
    }

    pub fn n_users(&self) -> u32 {
        self.lists.len() as u32
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), PredictorError> {
        writeln!(w, "user,rank,item,score")?;
        for list in &self.lists {
            for (rank, &(item, score)) in list.items().iter().enumerate() {
                writeln!(w, "{},{},{},{}", list.user(), rank + 1, item, score)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv_file<P: AsRef<Path>>(path: P, n_users: u32) -> Result<Self, PredictorError> {
        Self::read_csv(BufReader::new(File::open(path)?), n_users)
    }

    pub fn read_csv<R: BufRead>(reader: R, n_users: u32) -> Result<Self, PredictorError> {
        let mut per_user: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_users as usize];
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') || line.starts_with("user,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(PredictorError::BadFile(format!("line {}: expected 4 fields", idx + 1)));
            }
            let bad = |what: &str| PredictorError::BadFile(format!("line {}: bad {what}", idx + 1));
            let user: usize = f[0].parse().map_err(|_| bad("user"))?;
            let item: u32 = f[2].parse().map_err(|_| bad("item"))?;
            let score: f64 = f[3].parse().map_err(|_| bad("score"))?;
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
                    .map_err(|e| PredictorError::BadFile(format!("user {u}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(InitialPredictions { lists })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(n_users: u32, n_items: u32, entries: &[(u32, u32)]) -> InteractionMatrix {
        InteractionMatrix::from_entries(n_users, n_items, entries.iter().copied()).unwrap()
    }

    #[test]
    fn similarity_of_identical_profiles_is_one() {
        let m = matrix(2, 3, &[(0, 0), (0, 2), (1, 0), (1, 2)]);
        assert_eq!(user_similarity(&m, 0, 1), 1.0);
    }

    #[test]
    fn similarity_of_disjoint_profiles_is_zero() {
        let m = matrix(2, 4, &[(0, 0), (0, 1), (1, 2), (1, 3)]);
        assert_eq!(user_similarity(&m, 0, 1), 0.0);
    }

    #[test]
    fn similarity_hand_value() {
        // P_u = {a,b}, P_v = {b,c,d}: 1/sqrt(2*3)
        let m = matrix(2, 4, &[(0, 0), (0, 1), (1, 1), (1, 2), (1, 3)]);
        let sim = user_similarity(&m, 0, 1);
        assert!((sim - 1.0 / 6.0f64.sqrt()).abs() < 1e-12);
        assert!((sim - 0.40825).abs() < 1e-5);
    }

    #[test]
    fn empty_profile_similarity_is_zero() {
        let m = matrix(2, 2, &[(0, 0)]);
        assert_eq!(user_similarity(&m, 0, 1), 0.0);
    }

    #[test]
    fn singleton_population_has_no_neighbors() {
        let m = matrix(1, 3, &[(0, 0), (0, 1)]);
        assert!(nearest_neighbors(&m, 0, 5).neighbors.is_empty());
    }

    #[test]
    fn equal_similarity_breaks_by_lower_id() {
        // users 1 and 2 both share exactly item 0 with user 0 and have equal sizes
        let m = matrix(3, 4, &[(0, 0), (1, 0), (1, 1), (2, 0), (2, 2)]);
        let ns = nearest_neighbors(&m, 0, 2);
        assert_eq!(ns.neighbors[0].0, 1);
        assert_eq!(ns.neighbors[1].0, 2);
        assert_eq!(ns.neighbors[0].1, ns.neighbors[1].1);
    }

    // Brute-force oracle over all pairs.
    fn oracle_neighbors(m: &InteractionMatrix, u: u32, k: usize) -> Vec<(u32, f64)> {
        let mut all: Vec<(u32, f64)> = (0..m.n_users())
            .filter(|&v| v != u)
            .map(|v| (v, user_similarity(m, u, v)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn neighbors_match_exhaustive_comparison() {
        let m = matrix(
            5,
            6,
            &[
                (0, 0),
                (0, 1),
                (0, 2),
                (1, 0),
                (1, 1),
                (2, 2),
                (2, 3),
                (2, 4),
                (3, 0),
                (3, 5),
                (4, 1),
                (4, 2),
                (4, 3),
            ],
        );
        for u in 0..5 {
            for k in 1..=5 {
                let got = nearest_neighbors(&m, u, k).neighbors;
                let want = oracle_neighbors(&m, u, k);
                assert_eq!(got, want, "user {u}, k {k}");
            }
        }
    }

    #[test]
    fn user_with_no_neighbors_gets_empty_list() {
        let m = matrix(2, 4, &[(0, 0), (1, 2), (1, 3)]);
        let preds = initial_predictions(&m, 3, 10);
        assert!(preds.list(0).is_empty());
    }

    #[test]
    fn item_owned_by_all_neighbors_ranks_first() {
        // user 0 owns item 0; neighbors 1,2,3 all own items 0 and 1; item 2 only user 3
        let m = matrix(
            4,
            3,
            &[(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)],
        );
        let preds = initial_predictions(&m, 3, 10);
        let list = preds.list(0);
        assert_eq!(list.items()[0], (1, 3.0));
        assert_eq!(list.items()[1].0, 2);
    }

    // Exhaustive oracle: enumerate every (user, item, neighbor) triple.
    fn oracle_predictions(m: &InteractionMatrix, k: usize, cap: usize) -> Vec<Vec<(u32, f64)>> {
        (0..m.n_users())
            .map(|u| {
                let ns = oracle_neighbors(m, u, k);
                let mut rows: Vec<(u32, u32, f64)> = (0..m.n_items())
                    .filter(|&i| !m.contains(u, i))
                    .map(|i| {
                        let mut c = 0u32;
                        let mut s = 0.0;
                        for &(v, sim) in &ns {
                            if m.contains(v, i) {
                                c += 1;
                                s += sim;
                            }
                        }
                        (i, c, s)
                    })
                    .filter(|&(_, c, _)| c > 0)
                    .collect();
                rows.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
                rows.truncate(cap);
                rows.into_iter().map(|(i, c, _)| (i, c as f64)).collect()
            })
            .collect()
    }

    #[test]
    fn toy_predictions_match_exhaustive_oracle() {
        let m = matrix(
            6,
            8,
            &[
                (0, 0),
                (0, 1),
                (1, 0),
                (1, 2),
                (1, 3),
                (2, 1),
                (2, 2),
                (2, 4),
                (3, 3),
                (3, 4),
                (3, 5),
                (4, 0),
                (4, 5),
                (4, 6),
                (5, 1),
                (5, 6),
                (5, 7),
            ],
        );
        for k in [1, 2, 4] {
            for cap in [2, 8] {
                let got = initial_predictions(&m, k, cap);
                let want = oracle_predictions(&m, k, cap);
                for u in 0..6 {
                    assert_eq!(got.list(u).items(), &want[u as usize][..], "user {u} k {k} cap {cap}");
                }
            }
        }
    }

    #[test]
    fn predictions_csv_round_trip() {
        let m = matrix(3, 5, &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 3)]);
        let preds = initial_predictions(&m, 2, 10);
        let mut buf = Vec::new();
        preds.write_csv(&mut buf).unwrap();
        let back = InitialPredictions::read_csv(&buf[..], 3).unwrap();
        assert_eq!(preds, back);
    }

    proptest! {
        #[test]
        fn predicted_items_avoid_profile_and_scores_bounded(
            entries in proptest::collection::vec((0u32..8, 0u32..12), 1..60),
            k in 1usize..6,
        ) {
            let m = InteractionMatrix::from_entries(8, 12, entries).unwrap();
            let preds = initial_predictions(&m, k, 100);
            for u in 0..8 {
                for (item, score) in preds.list(u).items() {
                    prop_assert!(!m.contains(u, *item));
                    prop_assert!(*score >= 1.0 && *score <= k as f64);
                    prop_assert_eq!(*score, score.trunc());
                }
            }
        }

        #[test]
        fn larger_k_never_shrinks_scores(
            entries in proptest::collection::vec((0u32..8, 0u32..12), 1..60),
        ) {
            let m = InteractionMatrix::from_entries(8, 12, entries).unwrap();
            let small = initial_predictions(&m, 2, 1000);
            let large = initial_predictions(&m, 5, 1000);
            for u in 0..8 {
                for (item, score) in small.list(u).items() {
                    let bigger = large.list(u).items().iter()
                        .find(|(i, _)| i == item)
                        .map(|&(_, s)| s);
                    prop_assert!(bigger.is_some(), "item {} vanished when k grew", item);
                    prop_assert!(bigger.unwrap() >= *score);
                }
            }
        }
    }
}
