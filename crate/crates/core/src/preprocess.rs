//! Personalized profile editing: one-step, two-step, and random baseline.
//!
//! One-step adds `ceil(lambda * |profile|)` category-novel items per user,
//! taken in candidate-list order while skipping items already present and
//! items in the user's test profile (the test split stays invariant). The
//! two-step variant follows up by removing the same total number of
//! interactions, spread evenly across users with long-enough profiles and
//! never touching recently added items, which keeps data density close to
//! the original. The random baseline applies the same counting rules with
//! uniformly drawn items and no personalization.

use std::fmt;
use std::io::{self, Write};

use rand::seq::index;
use rayon::prelude::*;
use thiserror::Error;

use crate::categories::{CategoryError, CategoryMap};
use crate::matrix::{InteractionMatrix, MatrixError};
use crate::predictor::InitialPredictions;
use crate::profiler::UserCategoryProfile;
use crate::seed::Seed;

const ADD_STREAM: u64 = 0x414444;
const REMOVE_STREAM: u64 = 0x52454d;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("lambda {0} outside [0, 1]")]
    InvalidLambda(f64),
    #[error("matrices disagree: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Category(#[from] CategoryError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    OneStep,
    TwoStep,
    Random,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::OneStep, Variant::TwoStep, Variant::Random];

    pub fn name(self) -> &'static str {
        match self {
            Variant::OneStep => "one-step",
            Variant::TwoStep => "two-step",
            Variant::Random => "random",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one-step" => Ok(Variant::OneStep),
            "two-step" => Ok(Variant::TwoStep),
            "random" => Ok(Variant::Random),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

/// How a multi-category item qualifies as novel for a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoveltyRule {
    /// Every category of the item is outside the user's profile (default).
    #[default]
    StrictDisjoint,
    /// At least one category of the item is outside the user's profile.
    AnyNew,
}

/// Per-user ranked items eligible for insertion: the candidate list filtered
/// to category-novel items, order preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditionLists {
    lists: Vec<Vec<u32>>,
}

impl AdditionLists {
    pub fn list(&self, user: u32) -> &[u32] {
        &self.lists[user as usize]
    }

    pub fn n_users(&self) -> u32 {
        self.lists.len() as u32
    }
}

/// The addition list of a single user: candidates whose categories qualify
/// as novel under `rule`, in candidate order.
pub fn addition_list_for(
    user: u32,
    preds: &InitialPredictions,
    profile: &UserCategoryProfile,
    cats: &CategoryMap,
    rule: NoveltyRule,
) -> Result<Vec<u32>, PreprocessError> {
    let user_cats: Vec<u32> = profile.category_ids(user).collect();
    let mut out = Vec::new();
    for item in preds.list(user).item_ids() {
        let item_cats = cats.categories(item)?;
        let qualifies = match rule {
            NoveltyRule::StrictDisjoint => {
                item_cats.iter().all(|c| user_cats.binary_search(c).is_err())
            }
            NoveltyRule::AnyNew => {
                item_cats.iter().any(|c| user_cats.binary_search(c).is_err())
            }
        };
        if qualifies {
            out.push(item);
        }
    }
    Ok(out)
}

pub fn addition_lists(
    preds: &InitialPredictions,
    profile: &UserCategoryProfile,
    cats: &CategoryMap,
    rule: NoveltyRule,
) -> Result<AdditionLists, PreprocessError> {
    let lists = (0..preds.n_users())
        .into_par_iter()
        .map(|u| addition_list_for(u, preds, profile, cats, rule))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AdditionLists { lists })
}

/// Record of one pre-processing run: which entries were inserted and
/// removed, plus the shortfall whenever a quota could not be met (exhausted
/// candidate list, removable pool, or missing eligible users).
#[derive(Debug, Clone, PartialEq)]
pub struct EditLog {
    pub variant: Variant,
    pub lambda: f64,
    pub seed: Seed,
    /// Inserted (user, item) pairs, sorted.
    pub additions: Vec<(u32, u32)>,
    /// Removed (user, item) pairs, sorted; never intersects `additions`.
    pub removals: Vec<(u32, u32)>,
    pub addition_shortfall: u64,
    pub removal_shortfall: u64,
}

impl EditLog {
    pub fn total_added(&self) -> u64 {
        self.additions.len() as u64
    }

    pub fn total_removed(&self) -> u64 {
        self.removals.len() as u64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), PreprocessError> {
        writeln!(w, "user,item,action,variant,lambda,seed")?;
        for &(u, i) in &self.additions {
            writeln!(w, "{u},{i},add,{},{},{}", self.variant, self.lambda, self.seed.0)?;
        }
        for &(u, i) in &self.removals {
            writeln!(w, "{u},{i},remove,{},{},{}", self.variant, self.lambda, self.seed.0)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of items to add for a profile of size `n`: `ceil(lambda * n)`,
/// zero only when the product is exactly zero. This is the fixed point of
/// the `while added < count` loop for fractional counts. Products within
/// 1e-9 of an integer snap to it first, so decimal lambdas behave like their
/// exact rational value.
fn added_target(lambda: f64, n: usize) -> usize {
    let count = lambda * n as f64;
    if count <= 0.0 {
        return 0;
    }
    let nearest = count.round();
    let snapped = if (count - nearest).abs() < 1e-9 { nearest } else { count };
    snapped.ceil() as usize
}

/// One-step pre-processing: insert up to `added_target` items per user from
/// the addition list, in list order, skipping anything already present and
/// anything in the user's test profile. List exhaustion is logged as
/// shortfall, not an error.
pub fn one_step(
    train: &InteractionMatrix,
    lists: &AdditionLists,
    lambda: f64,
    test: &InteractionMatrix,
) -> Result<(InteractionMatrix, EditLog), PreprocessError> {
    check_lambda(lambda)?;
    check_shapes(train, test)?;

    let per_user: Vec<(Vec<u32>, u64)> = (0..train.n_users())
        .into_par_iter()
        .map(|u| {
            let target = added_target(lambda, train.profile(u).len());
            let mut added = Vec::with_capacity(target);
            if target > 0 {
                for &item in lists.list(u) {
                    if added.len() == target {
                        break;
                    }
                    if train.contains(u, item) || added.contains(&item) {
                        continue;
                    }
                    if test.contains(u, item) {
                        continue;
                    }
                    added.push(item);
                }
            }
            let shortfall = (target - added.len()) as u64;
            (added, shortfall)
        })
        .collect();

    let mut additions = Vec::new();
    let mut addition_shortfall = 0;
    for (u, (items, shortfall)) in per_user.iter().enumerate() {
        additions.extend(items.iter().map(|&i| (u as u32, i)));
        addition_shortfall += shortfall;
    }
    let edited = train.with_edits(&additions, &[])?;
    let log = EditLog {
        variant: Variant::OneStep,
        lambda,
        seed: Seed(0), // the addition phase is deterministic
        additions,
        removals: Vec::new(),
        addition_shortfall,
        removal_shortfall: 0,
    };
    Ok((edited, log))
}

/// Two-step pre-processing: starting from the one-step result, remove as
/// many interactions as were added. Users with fewer than `threshold`
/// interactions in the edited matrix are exempt; the total is split evenly
/// over eligible users (remainder one-each by ascending id); removals are
/// sampled uniformly from each user's items excluding recent additions, and
/// a user never loses their entire profile.
pub fn two_step(
    d_prime: &InteractionMatrix,
    edit: &EditLog,
    threshold: usize,
    seed: Seed,
) -> Result<(InteractionMatrix, EditLog), PreprocessError> {
    let (removals, removal_shortfall) =
        remove_evenly(d_prime, &edit.additions, threshold, seed)?;
    let edited = d_prime.with_edits(&[], &removals)?;
    let log = EditLog {
        variant: Variant::TwoStep,
        lambda: edit.lambda,
        seed,
        additions: edit.additions.clone(),
        removals,
        addition_shortfall: edit.addition_shortfall,
        removal_shortfall,
    };
    Ok((edited, log))
}

/// Random baseline: the same counting rules as one-step plus two-step, but
/// additions are drawn uniformly from the items outside the user's train and
/// test profiles, with no personalization and no category filter.
pub fn random_baseline(
    train: &InteractionMatrix,
    lambda: f64,
    threshold: usize,
    seed: Seed,
    test: &InteractionMatrix,
) -> Result<(InteractionMatrix, EditLog), PreprocessError> {
    check_lambda(lambda)?;
    check_shapes(train, test)?;
    let add_seed = seed.derive(ADD_STREAM);

    let per_user: Vec<(Vec<u32>, u64)> = (0..train.n_users())
        .into_par_iter()
        .map(|u| {
            let target = added_target(lambda, train.profile(u).len());
            if target == 0 {
                return (Vec::new(), 0);
            }
            let pool: Vec<u32> = (0..train.n_items())
                .filter(|&i| !train.contains(u, i) && !test.contains(u, i))
                .collect();
            if pool.len() < target {
                log::warn!(
                    "user {u}: catalog exhausted, adding {} of {} requested",
                    pool.len(),
                    target
                );
            }
            let take = target.min(pool.len());
            let mut rng = add_seed.derive(u as u64).rng();
            let mut chosen: Vec<u32> = index::sample(&mut rng, pool.len(), take)
                .iter()
                .map(|idx| pool[idx])
                .collect();
            chosen.sort_unstable();
            ((chosen), (target - take) as u64)
        })
        .collect();

    let mut additions = Vec::new();
    let mut addition_shortfall = 0;
    for (u, (items, shortfall)) in per_user.iter().enumerate() {
        additions.extend(items.iter().map(|&i| (u as u32, i)));
        addition_shortfall += shortfall;
    }
    let d_prime = train.with_edits(&additions, &[])?;
    let (removals, removal_shortfall) =
        remove_evenly(&d_prime, &additions, threshold, seed)?;
    let edited = d_prime.with_edits(&[], &removals)?;
    let log = EditLog {
        variant: Variant::Random,
        lambda,
        seed,
        additions,
        removals,
        addition_shortfall,
        removal_shortfall,
    };
    Ok((edited, log))
}

/// Removal phase shared by two-step and the random baseline. Returns the
/// sorted removals plus the shortfall against the added total.
fn remove_evenly(
    d_prime: &InteractionMatrix,
    additions: &[(u32, u32)],
    threshold: usize,
    seed: Seed,
) -> Result<(Vec<(u32, u32)>, u64), PreprocessError> {
    let total_added = additions.len() as u64;
    if total_added == 0 {
        return Ok((Vec::new(), 0));
    }
    let eligible: Vec<u32> = (0..d_prime.n_users())
        .filter(|&u| d_prime.profile(u).len() >= threshold)
        .collect();
    if eligible.is_empty() {
        log::warn!(
            "no user reaches the removal threshold {threshold}; {total_added} additions stay unmatched"
        );
        return Ok((Vec::new(), total_added));
    }

    // per-user quota: even share, remainder one-each by ascending user id
    let base = total_added / eligible.len() as u64;
    let remainder = (total_added % eligible.len() as u64) as usize;

    // additions are sorted by user, so each user's slice is contiguous
    let added_items = |u: u32| -> &[(u32, u32)] {
        let start = additions.partition_point(|&(v, _)| v < u);
        let end = additions.partition_point(|&(v, _)| v <= u);
        &additions[start..end]
    };

    let remove_seed = seed.derive(REMOVE_STREAM);
    let per_user: Vec<(Vec<(u32, u32)>, u64)> = eligible
        .par_iter()
        .enumerate()
        .map(|(rank, &u)| {
            let quota = base as usize + usize::from(rank < remainder);
            if quota == 0 {
                return (Vec::new(), 0);
            }
            let fresh = added_items(u);
            let removable: Vec<u32> = d_prime
                .profile(u)
                .iter()
                .copied()
                .filter(|&i| fresh.binary_search(&(u, i)).is_err())
                .collect();
            // keep at least one interaction in the profile
            let cap = quota
                .min(removable.len())
                .min(d_prime.profile(u).len().saturating_sub(1));
            let mut rng = remove_seed.derive(u as u64).rng();
            let mut chosen: Vec<(u32, u32)> = index::sample(&mut rng, removable.len(), cap)
                .iter()
                .map(|idx| (u, removable[idx]))
                .collect();
            chosen.sort_unstable();
            (chosen, (quota - cap) as u64)
        })
        .collect();

    let mut removals = Vec::new();
    let mut shortfall = 0;
    for (items, s) in per_user {
        removals.extend(items);
        shortfall += s;
    }
    Ok((removals, shortfall))
}

fn check_lambda(lambda: f64) -> Result<(), PreprocessError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(PreprocessError::InvalidLambda(lambda));
    }
    Ok(())
}

fn check_shapes(a: &InteractionMatrix, b: &InteractionMatrix) -> Result<(), PreprocessError> {
    if a.n_users() != b.n_users() || a.n_items() != b.n_items() {
        return Err(PreprocessError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.n_users(),
            a.n_items(),
            b.n_users(),
            b.n_items()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::RankedList;

    fn preds_from(lists: Vec<Vec<u32>>) -> InitialPredictions {
        InitialPredictions::from_lists(
            lists
                .into_iter()
                .enumerate()
                .map(|(u, items)| {
                    let n = items.len();
                    RankedList::new(
                        u as u32,
                        items
                            .into_iter()
                            .enumerate()
                            .map(|(r, i)| (i, (n - r) as f64))
                            .collect(),
                    )
                    .unwrap()
                })
                .collect(),
        )
    }

    fn profile_with(per_user: Vec<Vec<u32>>) -> UserCategoryProfile {
        UserCategoryProfile::new(
            per_user
                .into_iter()
                .map(|cats| cats.into_iter().map(|c| (c, 1.0)).collect())
                .collect(),
        )
    }

    fn singleton_cats(n_items: u32, assign: &[u32], names: usize) -> CategoryMap {
        CategoryMap::from_entries(
            (0..names).map(|c| format!("c{c}")).collect(),
            (0..n_items).map(|i| (i, vec![assign[i as usize]])),
        )
        .unwrap()
    }

    #[test]
    fn empty_user_categories_passes_everything() {
        let preds = preds_from(vec![vec![3, 1, 4]]);
        let profile = profile_with(vec![vec![]]);
        let cats = singleton_cats(5, &[0, 1, 2, 3, 4], 5);
        let list = addition_list_for(0, &preds, &profile, &cats, NoveltyRule::StrictDisjoint).unwrap();
        assert_eq!(list, vec![3, 1, 4]);
    }

    #[test]
    fn all_items_in_user_categories_gives_empty_list() {
        let preds = preds_from(vec![vec![0, 1]]);
        let profile = profile_with(vec![vec![0]]);
        let cats = singleton_cats(2, &[0, 0], 1);
        let list = addition_list_for(0, &preds, &profile, &cats, NoveltyRule::StrictDisjoint).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn filter_keeps_only_novel_categories_in_order() {
        // preds [i2(cat c5), i6(cat c1), i9(cat c2)], user categories {c1, c2} -> [i2]
        let preds = preds_from(vec![vec![2, 6, 9]]);
        let profile = profile_with(vec![vec![1, 2]]);
        let mut assign = vec![0u32; 10];
        assign[2] = 5;
        assign[6] = 1;
        assign[9] = 2;
        let cats = singleton_cats(10, &assign, 6);
        let list = addition_list_for(0, &preds, &profile, &cats, NoveltyRule::StrictDisjoint).unwrap();
        assert_eq!(list, vec![2]);
    }

    #[test]
    fn strict_vs_any_new_on_multi_category_items() {
        let preds = preds_from(vec![vec![0]]);
        let profile = profile_with(vec![vec![0]]);
        // item 0 carries categories {0, 1}: one known, one novel
        let cats = CategoryMap::from_entries(
            vec!["a".into(), "b".into()],
            vec![(0, vec![0, 1])],
        )
        .unwrap();
        let strict =
            addition_list_for(0, &preds, &profile, &cats, NoveltyRule::StrictDisjoint).unwrap();
        assert!(strict.is_empty());
        let any = addition_list_for(0, &preds, &profile, &cats, NoveltyRule::AnyNew).unwrap();
        assert_eq!(any, vec![0]);
    }

    #[test]
    fn missing_category_entry_is_lookup_error() {
        let preds = preds_from(vec![vec![1]]);
        let profile = profile_with(vec![vec![]]);
        let cats = CategoryMap::from_entries(vec!["a".into()], vec![(0, vec![0])]).unwrap();
        let err = addition_list_for(0, &preds, &profile, &cats, NoveltyRule::StrictDisjoint);
        assert!(matches!(err, Err(PreprocessError::Category(CategoryError::UnknownItem(1)))));
    }

    fn ladder(profiles: &[usize], n_items: u32) -> InteractionMatrix {
        let entries = profiles
            .iter()
            .enumerate()
            .flat_map(|(u, &n)| (0..n as u32).map(move |i| (u as u32, i)));
        InteractionMatrix::from_entries(profiles.len() as u32, n_items, entries).unwrap()
    }

    fn lists_of(per_user: Vec<Vec<u32>>) -> AdditionLists {
        AdditionLists { lists: per_user }
    }

    #[test]
    fn lambda_zero_is_identity() {
        let train = ladder(&[5, 3], 20);
        let test = InteractionMatrix::empty(2, 20);
        let lists = lists_of(vec![vec![10, 11], vec![12]]);
        let (edited, log) = one_step(&train, &lists, 0.0, &test).unwrap();
        assert_eq!(edited, train);
        assert!(log.additions.is_empty());
        assert_eq!(log.addition_shortfall, 0);
    }

    #[test]
    fn added_target_matches_loop_semantics() {
        assert_eq!(added_target(0.0, 20), 0);
        assert_eq!(added_target(0.05, 20), 1); // ceil(1.0) = 1
        assert_eq!(added_target(0.02, 10), 1); // 0 < 0.2, one pass through the loop
        assert_eq!(added_target(0.10, 7), 1); // ceil(0.7)
        assert_eq!(added_target(0.10, 25), 3); // ceil(2.5)
        assert_eq!(added_target(0.5, 0), 0);
        assert_eq!(added_target(0.07, 100), 7); // decimal lambda snaps to exact product
    }

    #[test]
    fn one_step_adds_exactly_the_target_in_list_order() {
        let train = ladder(&[10], 30);
        let test = InteractionMatrix::empty(1, 30);
        let lists = lists_of(vec![vec![20, 21, 22, 23]]);
        let (edited, log) = one_step(&train, &lists, 0.2, &test).unwrap();
        assert_eq!(log.additions, vec![(0, 20), (0, 21)]);
        assert_eq!(edited.profile_size(0).unwrap(), 12);
    }

    #[test]
    fn one_step_skips_test_items() {
        let train = ladder(&[10], 30);
        let test = InteractionMatrix::from_entries(1, 30, vec![(0, 20), (0, 22)]).unwrap();
        let lists = lists_of(vec![vec![20, 21, 22, 23]]);
        let (_, log) = one_step(&train, &lists, 0.2, &test).unwrap();
        assert_eq!(log.additions, vec![(0, 21), (0, 23)]);
    }

    #[test]
    fn one_step_logs_exhaustion_as_shortfall() {
        let train = ladder(&[10], 30);
        let test = InteractionMatrix::empty(1, 30);
        let lists = lists_of(vec![vec![20]]);
        let (_, log) = one_step(&train, &lists, 0.5, &test).unwrap();
        assert_eq!(log.total_added(), 1);
        assert_eq!(log.addition_shortfall, 4);
    }

    #[test]
    fn two_step_with_nothing_added_is_identity() {
        let train = ladder(&[25], 40);
        let test = InteractionMatrix::empty(1, 40);
        let lists = lists_of(vec![vec![]]);
        let (d_prime, log) = one_step(&train, &lists, 0.0, &test).unwrap();
        let (d_second, log2) = two_step(&d_prime, &log, 20, Seed(5)).unwrap();
        assert_eq!(d_second, d_prime);
        assert!(log2.removals.is_empty());
    }

    #[test]
    fn two_step_exact_division_removes_equal_total() {
        // 5 eligible users (>= 20 interactions each), 10 additions -> quota 2
        let train = ladder(&[20, 21, 22, 23, 24], 60);
        let test = InteractionMatrix::empty(5, 60);
        let lists = lists_of(vec![
            vec![40, 41],
            vec![42, 43],
            vec![44, 45],
            vec![46, 47],
            vec![48, 49],
        ]);
        let (d_prime, log) = one_step(&train, &lists, 0.08, &test).unwrap();
        assert_eq!(log.total_added(), 10);
        assert_eq!(log.addition_shortfall, 0);
        let (d_second, log2) = two_step(&d_prime, &log, 20, Seed(5)).unwrap();
        assert_eq!(log2.total_removed(), 10);
        for u in 0..5 {
            let removed = log2.removals.iter().filter(|&&(v, _)| v == u).count();
            assert_eq!(removed, 2);
        }
        assert_eq!(d_second.n_entries(), train.n_entries());
    }

    #[test]
    fn two_step_remainder_goes_to_lowest_ids() {
        // 3 eligible users, 7 additions -> quotas (3, 2, 2)
        let train = ladder(&[30, 20, 20], 80);
        let test = InteractionMatrix::empty(3, 80);
        let lists = lists_of(vec![
            vec![40, 41, 42],
            vec![50, 51],
            vec![60, 61],
        ]);
        let (d_prime, log) = one_step(&train, &lists, 0.1, &test).unwrap();
        assert_eq!(log.total_added(), 7);
        let (_, log2) = two_step(&d_prime, &log, 20, Seed(5)).unwrap();
        let counts: Vec<usize> = (0..3)
            .map(|u| log2.removals.iter().filter(|&&(v, _)| v == u).count())
            .collect();
        assert_eq!(counts, vec![3, 2, 2]);
        assert_eq!(log2.total_removed(), 7);
    }

    #[test]
    fn users_below_threshold_lose_nothing() {
        let train = ladder(&[25, 5], 60);
        let test = InteractionMatrix::empty(2, 60);
        let lists = lists_of(vec![vec![40, 41], vec![42]]);
        let (d_prime, log) = one_step(&train, &lists, 0.08, &test).unwrap();
        let (_, log2) = two_step(&d_prime, &log, 20, Seed(5)).unwrap();
        assert!(log2.removals.iter().all(|&(u, _)| u == 0));
    }

    #[test]
    fn removals_never_touch_recent_additions() {
        let train = ladder(&[20], 60);
        let test = InteractionMatrix::empty(1, 60);
        let lists = lists_of(vec![(40..60).collect()]);
        let (d_prime, log) = one_step(&train, &lists, 0.5, &test).unwrap();
        let (_, log2) = two_step(&d_prime, &log, 20, Seed(11)).unwrap();
        for r in &log2.removals {
            assert!(!log2.additions.contains(r));
        }
        assert_eq!(log2.total_removed(), log2.total_added());
    }

    #[test]
    fn no_eligible_users_warns_and_removes_nothing() {
        let train = ladder(&[5, 6], 30);
        let test = InteractionMatrix::empty(2, 30);
        let lists = lists_of(vec![vec![20], vec![21]]);
        let (d_prime, log) = one_step(&train, &lists, 0.2, &test).unwrap();
        assert_eq!(log.total_added(), 2);
        let (d_second, log2) = two_step(&d_prime, &log, 20, Seed(5)).unwrap();
        assert_eq!(d_second, d_prime);
        assert_eq!(log2.removal_shortfall, 2);
    }

    #[test]
    fn two_step_never_empties_a_profile() {
        // single eligible user with many additions; removable pool is the
        // 20 original items, but the floor keeps at least one interaction
        let train = ladder(&[20], 200);
        let test = InteractionMatrix::empty(1, 200);
        let lists = lists_of(vec![(100..200).collect()]);
        let (d_prime, log) = one_step(&train, &lists, 1.0, &test).unwrap();
        assert_eq!(log.total_added(), 20);
        let (d_second, log2) = two_step(&d_prime, &log, 20, Seed(3)).unwrap();
        assert!(d_second.profile_size(0).unwrap() >= 1);
        // all 20 originals are removable; the protected additions keep the
        // profile non-empty
        assert_eq!(log2.total_removed(), 20);
    }

    #[test]
    fn random_baseline_lambda_zero_is_identity() {
        let train = ladder(&[8, 3], 30);
        let test = InteractionMatrix::empty(2, 30);
        let (edited, log) = random_baseline(&train, 0.0, 20, Seed(9), &test).unwrap();
        assert_eq!(edited, train);
        assert!(log.additions.is_empty() && log.removals.is_empty());
    }

    #[test]
    fn random_baseline_is_deterministic() {
        let train = ladder(&[12, 25, 7], 50);
        let test = InteractionMatrix::from_entries(3, 50, vec![(0, 30), (1, 31)]).unwrap();
        let (a, la) = random_baseline(&train, 0.1, 20, Seed(4), &test).unwrap();
        let (b, lb) = random_baseline(&train, 0.1, 20, Seed(4), &test).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = random_baseline(&train, 0.1, 20, Seed(5), &test).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_baseline_counts_match_one_step() {
        let train = ladder(&[12, 25, 7], 200);
        let test = InteractionMatrix::empty(3, 200);
        let lists = lists_of(vec![
            (100..150).collect(),
            (100..150).collect(),
            (100..150).collect(),
        ]);
        let lambda = 0.1;
        let (_, personalized) = one_step(&train, &lists, lambda, &test).unwrap();
        let (_, random) = random_baseline(&train, lambda, 20, Seed(2), &test).unwrap();
        for u in 0..3u32 {
            let a = personalized.additions.iter().filter(|&&(v, _)| v == u).count();
            let b = random.additions.iter().filter(|&&(v, _)| v == u).count();
            assert_eq!(a, b, "user {u}");
        }
    }

    #[test]
    fn random_baseline_avoids_train_and_test() {
        let train = ladder(&[10], 15);
        let test = InteractionMatrix::from_entries(1, 15, vec![(0, 10), (0, 11)]).unwrap();
        let (_, log) = random_baseline(&train, 0.3, 20, Seed(1), &test).unwrap();
        for &(u, i) in &log.additions {
            assert!(!train.contains(u, i));
            assert!(!test.contains(u, i));
        }
    }

    #[test]
    fn density_drift_bounded_by_shortfall() {
        let train = ladder(&[22, 25, 30, 4], 100);
        let test = InteractionMatrix::empty(4, 100);
        let lists = lists_of(vec![
            (50..60).collect(),
            (60..70).collect(),
            (70..80).collect(),
            (80..90).collect(),
        ]);
        let (d_prime, log) = one_step(&train, &lists, 0.1, &test).unwrap();
        let (d_second, log2) = two_step(&d_prime, &log, 20, Seed(8)).unwrap();
        let drift = (d_second.density().unwrap() - train.density().unwrap()).abs();
        let bound = (log2.addition_shortfall + log2.removal_shortfall) as f64
            / (train.n_users() as f64 * train.n_items() as f64);
        assert!(drift <= bound + 1e-15, "drift {drift} exceeds bound {bound}");
    }

    #[test]
    fn invalid_lambda_rejected() {
        let train = ladder(&[5], 10);
        let test = InteractionMatrix::empty(1, 10);
        let lists = lists_of(vec![vec![]]);
        assert!(matches!(
            one_step(&train, &lists, 1.5, &test),
            Err(PreprocessError::InvalidLambda(_))
        ));
        assert!(matches!(
            random_baseline(&train, -0.1, 20, Seed(0), &test),
            Err(PreprocessError::InvalidLambda(_))
        ));
    }
}
