//! Item-based k-nearest-neighbor recommender.
//!
//! Item-item cosine over binary column vectors; a candidate item's score for
//! a user is the summed similarity to the user's profile items, restricted
//! to the candidate's top-k neighbor list.

use rayon::prelude::*;

use crate::matrix::InteractionMatrix;
use crate::ranking::RankedList;

use super::Recommendations;

/// Top-k cosine neighbors per item, computed through co-occurrence counts.
pub(crate) fn item_neighbor_lists(
    train: &InteractionMatrix,
    n_item_neighbors: usize,
) -> Vec<Vec<(u32, f64)>> {
    let n_items = train.n_items() as usize;
    (0..train.n_items())
        .into_par_iter()
        .map_init(
            || (vec![0u32; n_items], Vec::new()),
            |(acc, touched), i| {
                for &u in train.item_users(i) {
                    for &j in train.profile(u) {
                        if j == i {
                            continue;
                        }
                        if acc[j as usize] == 0 {
                            touched.push(j);
                        }
                        acc[j as usize] += 1;
                    }
                }
                let ni = train.item_users(i).len() as f64;
                let mut sims: Vec<(u32, f64)> = touched
                    .iter()
                    .map(|&j| {
                        let nj = train.item_users(j).len() as f64;
                        (j, acc[j as usize] as f64 / (ni * nj).sqrt())
                    })
                    .collect();
                for &j in touched.iter() {
                    acc[j as usize] = 0;
                }
                touched.clear();
                sims.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                sims.truncate(n_item_neighbors);
                sims
            },
        )
        .collect()
}

pub fn item_knn(train: &InteractionMatrix, n_item_neighbors: usize, n: usize) -> Recommendations {
    assert!(n_item_neighbors >= 1 && n >= 1);
    let n_items = train.n_items() as usize;
    let neighbor_lists = item_neighbor_lists(train, n_item_neighbors);

    // reverse index: profile item j -> candidates i having j among their neighbors
    let mut reverse: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_items];
    for (i, neighbors) in neighbor_lists.iter().enumerate() {
        for &(j, sim) in neighbors {
            reverse[j as usize].push((i as u32, sim));
        }
    }

    let lists: Vec<RankedList> = (0..train.n_users())
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n_items], Vec::new()),
            |(scores, touched), u| {
                for &j in train.profile(u) {
                    for &(i, sim) in &reverse[j as usize] {
                        if train.contains(u, i) {
                            continue;
                        }
                        if scores[i as usize] == 0.0 {
                            touched.push(i);
                        }
                        scores[i as usize] += sim;
                    }
                }
                let scored: Vec<(u32, f64)> =
                    touched.iter().map(|&i| (i, scores[i as usize])).collect();
                for &i in touched.iter() {
                    scores[i as usize] = 0.0;
                }
                touched.clear();
                let mut list = RankedList::from_scores(u, scored);
                list.truncate(n);
                list
            },
        )
        .collect();
    Recommendations::new("item-knn", lists)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_profile_gives_empty_list() {
        let m = InteractionMatrix::from_entries(2, 3, vec![(1, 0), (1, 1)]).unwrap();
        let recs = item_knn(&m, 2, 3);
        assert!(recs.list(0).is_empty());
    }

    #[test]
    fn identical_columns_have_similarity_one() {
        // items 0 and 1 owned by exactly users {0, 1}
        let m = InteractionMatrix::from_entries(
            3,
            3,
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)],
        )
        .unwrap();
        let lists = item_neighbor_lists(&m, 3);
        assert_eq!(lists[0][0].0, 1);
        assert!((lists[0][0].1 - 1.0).abs() < 1e-12);
        assert_eq!(lists[1][0].0, 0);
        assert!((lists[1][0].1 - 1.0).abs() < 1e-12);
    }

    // Dense brute-force cosine oracle over the full score table.
    fn oracle_scores(m: &InteractionMatrix, k: usize) -> Vec<Vec<f64>> {
        let n_items = m.n_items() as usize;
        let cosine = |a: u32, b: u32| -> f64 {
            let ua = m.item_users(a);
            let ub = m.item_users(b);
            if ua.is_empty() || ub.is_empty() {
                return 0.0;
            }
            let inter = ua.iter().filter(|u| ub.binary_search(u).is_ok()).count();
            inter as f64 / ((ua.len() * ub.len()) as f64).sqrt()
        };
        // top-k neighbor set per item
        let topk: Vec<Vec<u32>> = (0..m.n_items())
            .map(|i| {
                let mut sims: Vec<(u32, f64)> = (0..m.n_items())
                    .filter(|&j| j != i)
                    .map(|j| (j, cosine(i, j)))
                    .filter(|&(_, s)| s > 0.0)
                    .collect();
                sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                sims.truncate(k);
                sims.into_iter().map(|(j, _)| j).collect()
            })
            .collect();
        (0..m.n_users())
            .map(|u| {
                (0..m.n_items() as u32)
                    .map(|i| {
                        if m.contains(u, i) {
                            return 0.0;
                        }
                        m.profile(u)
                            .iter()
                            .filter(|&&j| topk[i as usize].contains(&j))
                            .map(|&j| cosine(i, j))
                            .sum()
                    })
                    .collect::<Vec<f64>>()
            })
            .map(|row| {
                debug_assert_eq!(row.len(), n_items);
                row
            })
            .collect()
    }

    #[test]
    fn toy_scores_match_dense_oracle() {
        let m = InteractionMatrix::from_entries(
            5,
            6,
            vec![
                (0, 0),
                (0, 1),
                (0, 4),
                (1, 1),
                (1, 2),
                (2, 0),
                (2, 2),
                (2, 3),
                (3, 3),
                (3, 4),
                (3, 5),
                (4, 0),
                (4, 5),
            ],
        )
        .unwrap();
        for k in [1, 2, 6] {
            let want = oracle_scores(&m, k);
            let recs = item_knn(&m, k, 6);
            for u in 0..m.n_users() {
                for (item, score) in recs.list(u).items() {
                    let expected = want[u as usize][*item as usize];
                    assert!(
                        (score - expected).abs() < 1e-12,
                        "k={k} user={u} item={item}: {score} vs {expected}"
                    );
                }
                // no scored item was dropped: every positive oracle score
                // appears in the list
                let listed: Vec<u32> = recs.list(u).item_ids().collect();
                for (i, &s) in want[u as usize].iter().enumerate() {
                    if s > 0.0 {
                        assert!(listed.contains(&(i as u32)), "k={k} user={u} missing {i}");
                    }
                }
            }
        }
    }
}
