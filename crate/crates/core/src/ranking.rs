//! Ranked item lists.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("duplicate item {0} in ranked list")]
    DuplicateItem(u32),
    #[error("scores increase at position {0}")]
    ScoresNotMonotone(usize),
}

/// An ordered list of `(item, score)` pairs for one user, with scores
/// non-increasing and items unique.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    user: u32,
    items: Vec<(u32, f64)>,
}

impl RankedList {
    /// Wrap an already-ordered list, validating the invariants.
    pub fn new(user: u32, items: Vec<(u32, f64)>) -> Result<Self, RankingError> {
        let mut seen: Vec<u32> = items.iter().map(|&(i, _)| i).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(RankingError::DuplicateItem(w[0]));
        }
        for (pos, w) in items.windows(2).enumerate() {
            if w[1].1 > w[0].1 {
                return Err(RankingError::ScoresNotMonotone(pos + 1));
            }
        }
        Ok(RankedList { user, items })
    }

    /// Sort unordered scores with the crate-wide tie-break (score descending,
    /// item id ascending) and wrap them. Item ids must be unique.
    pub fn from_scores(user: u32, mut scored: Vec<(u32, f64)>) -> Self {
        scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        debug_assert!(scored.windows(2).all(|w| w[0].0 != w[1].0));
        RankedList {
            user,
            items: scored,
        }
    }

    pub fn empty(user: u32) -> Self {
        RankedList {
            user,
            items: Vec::new(),
        }
    }

    pub fn user(&self) -> u32 {
        self.user
    }

    pub fn items(&self) -> &[(u32, f64)] {
        &self.items
    }

    /// The first `k` entries (fewer when the list is shorter).
    pub fn top(&self, k: usize) -> &[(u32, f64)] {
        &self.items[..self.items.len().min(k)]
    }

    pub fn item_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.items.iter().map(|&(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn truncate(&mut self, k: usize) {
        self.items.truncate(k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_scores_applies_tie_break() {
        let list = RankedList::from_scores(0, vec![(5, 1.0), (2, 3.0), (7, 3.0), (1, 2.0)]);
        let ids: Vec<u32> = list.item_ids().collect();
        assert_eq!(ids, vec![2, 7, 1, 5]);
    }

    #[test]
    fn new_rejects_duplicates_and_rising_scores() {
        assert!(matches!(
            RankedList::new(0, vec![(1, 2.0), (1, 1.0)]),
            Err(RankingError::DuplicateItem(1))
        ));
        assert!(matches!(
            RankedList::new(0, vec![(1, 1.0), (2, 2.0)]),
            Err(RankingError::ScoresNotMonotone(1))
        ));
    }

    #[test]
    fn top_clamps_to_length() {
        let list = RankedList::from_scores(0, vec![(1, 2.0), (2, 1.0)]);
        assert_eq!(list.top(10).len(), 2);
        assert_eq!(list.top(1).len(), 1);
    }
}
