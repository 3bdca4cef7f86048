//! Non-personalized popularity baseline.

use rayon::prelude::*;

use crate::matrix::InteractionMatrix;
use crate::ranking::RankedList;

use super::Recommendations;

/// Rank items by training interaction count (ties: ascending item id); each
/// user receives the first `n` items not already in their profile.
pub fn most_pop(train: &InteractionMatrix, n: usize) -> Recommendations {
    assert!(n >= 1);
    let mut ranking: Vec<(u32, u64)> = (0..train.n_items())
        .map(|i| (i, train.item_users(i).len() as u64))
        .collect();
    ranking.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let lists: Vec<RankedList> = (0..train.n_users())
        .into_par_iter()
        .map(|u| {
            let items: Vec<(u32, f64)> = ranking
                .iter()
                .filter(|&&(i, _)| !train.contains(u, i))
                .take(n)
                .map(|&(i, c)| (i, c as f64))
                .collect();
            RankedList::new(u, items).expect("popularity order is valid")
        })
        .collect();
    Recommendations::new("most-pop", lists)
}
