//! Accuracy, calibration, descriptive-diversity, and provider-fairness
//! metrics over recommendations versus held-out test data.
//!
//! Conventions pinned for reproducibility: all logarithms are base 2, rank
//! discounts are `1 / log2(rank + 1)` with 1-based ranks, KL smoothing uses
//! the RADio-style mixture `q~ = (1 - alpha) q + alpha p` so the smoothed
//! reference covers the support of `p`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::categories::{CategoryError, CategoryMap};
use crate::matrix::InteractionMatrix;
use crate::recsys::Recommendations;

/// Length of the fair-nDCG curve in every report: k = 1..=100.
pub const FAIR_CURVE_LEN: usize = 100;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("smoothing alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("alpha = 0 cannot cover category {0}: p > 0 where q = 0")]
    ZeroSupport(u32),
    #[error("protected category set is empty")]
    EmptyProtectedSet,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error(transparent)]
    Category(#[from] CategoryError),
}

fn discount(rank_1based: usize) -> f64 {
    1.0 / ((rank_1based as f64) + 1.0).log2()
}

/// Mean reciprocal rank of the first test hit, averaged over users with a
/// non-empty test profile. A user without a hit inside the cutoff scores 0;
/// no cutoff means the full list counts.
pub fn mrr(
    recs: &Recommendations,
    test: &InteractionMatrix,
    cutoff: Option<usize>,
) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    let mut users = 0u64;
    for list in recs.lists() {
        let u = list.user();
        if test.profile(u).is_empty() {
            continue;
        }
        users += 1;
        let limit = cutoff.unwrap_or(usize::MAX).min(list.len());
        for (pos, item) in list.item_ids().take(limit).enumerate() {
            if test.contains(u, item) {
                sum += 1.0 / (pos + 1) as f64;
                break;
            }
        }
    }
    if users == 0 {
        return Err(MetricError::Undefined("no user has test interactions"));
    }
    Ok(sum / users as f64)
}

/// Binary-gain nDCG@k averaged over users with a non-empty test profile.
/// The ideal ranking front-loads `min(k, |test_u|)` hits.
pub fn ndcg_at_k(
    recs: &Recommendations,
    test: &InteractionMatrix,
    k: usize,
) -> Result<f64, MetricError> {
    assert!(k >= 1);
    let mut sum = 0.0;
    let mut users = 0u64;
    for list in recs.lists() {
        let u = list.user();
        let n_test = test.profile(u).len();
        if n_test == 0 {
            continue;
        }
        users += 1;
        let mut dcg = 0.0;
        for (pos, item) in list.item_ids().take(k).enumerate() {
            if test.contains(u, item) {
                dcg += discount(pos + 1);
            }
        }
        let idcg: f64 = (1..=k.min(n_test)).map(discount).sum();
        sum += dcg / idcg;
    }
    if users == 0 {
        return Err(MetricError::Undefined("no user has test interactions"));
    }
    Ok(sum / users as f64)
}

/// How items spread their probability mass over categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// Every item counts 1/n.
    Uniform,
    /// Item at rank r counts `1 / log2(r + 1)`, normalized over the list.
    RankDiscounted,
}

/// A probability distribution over category ids. An empty source item list
/// yields the flagged-empty distribution rather than an error.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistribution {
    probs: BTreeMap<u32, f64>,
    pub weighting: Weighting,
}

impl CategoryDistribution {
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, category: u32) -> f64 {
        self.probs.get(&category).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs.iter().map(|(&c, &p)| (c, p))
    }

    #[cfg(test)]
    pub(crate) fn from_pairs(pairs: &[(u32, f64)], weighting: Weighting) -> Self {
        CategoryDistribution {
            probs: pairs.iter().copied().collect(),
            weighting,
        }
    }
}

/// Category distribution of an ordered item list. Each item's weight is
/// split equally across its categories; weights are normalized to sum to 1.
pub fn category_distribution(
    items: &[u32],
    cats: &CategoryMap,
    weighting: Weighting,
) -> Result<CategoryDistribution, MetricError> {
    let mut probs = BTreeMap::new();
    if items.is_empty() {
        return Ok(CategoryDistribution { probs, weighting });
    }
    let weights: Vec<f64> = match weighting {
        Weighting::Uniform => vec![1.0 / items.len() as f64; items.len()],
        Weighting::RankDiscounted => {
            let raw: Vec<f64> = (1..=items.len()).map(discount).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        }
    };
    for (&item, w) in items.iter().zip(weights) {
        let item_cats = cats.categories(item)?;
        let share = w / item_cats.len() as f64;
        for &c in item_cats {
            *probs.entry(c).or_insert(0.0) += share;
        }
    }
    Ok(CategoryDistribution { probs, weighting })
}

/// KL(p || q~) in bits, with `q~ = (1 - alpha) q + alpha p`. The mixture
/// guarantees `q~` covers the support of `p` for any alpha in (0, 1];
/// alpha = 0 is accepted only when `q` already covers `p`.
pub fn kl_divergence(
    p: &CategoryDistribution,
    q: &CategoryDistribution,
    alpha: f64,
) -> Result<f64, MetricError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MetricError::InvalidAlpha(alpha));
    }
    let mut kl = 0.0;
    for (c, pv) in p.iter() {
        if pv <= 0.0 {
            continue;
        }
        let smoothed = (1.0 - alpha) * q.prob(c) + alpha * pv;
        if smoothed <= 0.0 {
            return Err(MetricError::ZeroSupport(c));
        }
        kl += pv * (pv / smoothed).log2();
    }
    Ok(kl.max(0.0))
}

/// Jensen-Shannon divergence in bits, bounded by [0, 1]. The midpoint
/// covers both supports, so no extra smoothing is involved.
pub fn js_divergence(p: &CategoryDistribution, q: &CategoryDistribution) -> f64 {
    let mut categories: Vec<u32> = p.iter().map(|(c, _)| c).collect();
    categories.extend(q.iter().map(|(c, _)| c));
    categories.sort_unstable();
    categories.dedup();

    let mut js = 0.0;
    for c in categories {
        let pv = p.prob(c);
        let qv = q.prob(c);
        let m = 0.5 * (pv + qv);
        if pv > 0.0 {
            js += 0.5 * pv * (pv / m).log2();
        }
        if qv > 0.0 {
            js += 0.5 * qv * (qv / m).log2();
        }
    }
    js.clamp(0.0, 1.0)
}

/// Calibration: mean KL and JS divergence between each user's training
/// profile category distribution (uniform weighting) and the distribution of
/// their top-k recommendations. Users with an empty profile or an empty
/// recommendation list are skipped.
pub fn calibration(
    recs: &Recommendations,
    profile_source: &InteractionMatrix,
    cats: &CategoryMap,
    k: usize,
    weighting: Weighting,
    alpha: f64,
) -> Result<(f64, f64), MetricError> {
    let mut kl_sum = 0.0;
    let mut js_sum = 0.0;
    let mut users = 0u64;
    for list in recs.lists() {
        let u = list.user();
        let profile = profile_source.profile(u);
        if profile.is_empty() || list.is_empty() {
            continue;
        }
        let p = category_distribution(profile, cats, Weighting::Uniform)?;
        let top: Vec<u32> = list.top(k).iter().map(|&(i, _)| i).collect();
        let q = category_distribution(&top, cats, weighting)?;
        kl_sum += kl_divergence(&p, &q, alpha)?;
        js_sum += js_divergence(&p, &q);
        users += 1;
    }
    if users == 0 {
        return Err(MetricError::Undefined(
            "no user has both a profile and recommendations",
        ));
    }
    Ok((kl_sum / users as f64, js_sum / users as f64))
}

/// Unique items appearing in any top-k list, as a count and as a fraction of
/// the catalog.
pub fn coverage(recs: &Recommendations, k: usize, n_items: u32) -> (usize, f64) {
    let mut seen = vec![false; n_items as usize];
    for list in recs.lists() {
        for &(item, _) in list.top(k) {
            seen[item as usize] = true;
        }
    }
    let count = seen.iter().filter(|&&s| s).count();
    (count, count as f64 / n_items.max(1) as f64)
}

/// Exposure equality: 1 - Gini over per-item exposure counts in the top-k
/// lists, zeros included for never-recommended items. 1 is perfectly even
/// exposure.
pub fn gini_complement(
    recs: &Recommendations,
    k: usize,
    n_items: u32,
) -> Result<f64, MetricError> {
    let mut exposure = vec![0u64; n_items as usize];
    for list in recs.lists() {
        for &(item, _) in list.top(k) {
            exposure[item as usize] += 1;
        }
    }
    let total: u64 = exposure.iter().sum();
    if total == 0 {
        return Err(MetricError::Undefined("zero exposure"));
    }
    exposure.sort_unstable();
    let n = exposure.len() as f64;
    let mut weighted = 0.0;
    for (idx, &x) in exposure.iter().enumerate() {
        let i = (idx + 1) as f64;
        weighted += (2.0 * i - n - 1.0) * x as f64;
    }
    let gini = weighted / (n * total as f64);
    Ok(1.0 - gini)
}

/// Choice of ideal ranking for fair-nDCG normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FairIdeal {
    /// All k slots could be protected: a global normalizer comparable
    /// across users (default).
    GlobalSlots,
    /// Per-user ideal limited by how many protected items are actually in
    /// the user's candidate pool (catalog minus train profile).
    CandidateAware,
}

/// Rank-discounted exposure of protected categories: gain 1 for every
/// recommended item carrying at least one protected category, discounted by
/// rank and normalized by the chosen ideal.
pub fn fair_ndcg(
    recs: &Recommendations,
    cats: &CategoryMap,
    protected: &[u32],
    k: usize,
    ideal: FairIdeal,
    train: &InteractionMatrix,
) -> Result<f64, MetricError> {
    let curve = fair_ndcg_curve(recs, cats, protected, k, ideal, train)?;
    Ok(curve[k - 1])
}

/// fair-nDCG@k for every k in 1..=`max_k`, in one pass over the lists.
pub fn fair_ndcg_curve(
    recs: &Recommendations,
    cats: &CategoryMap,
    protected: &[u32],
    max_k: usize,
    ideal: FairIdeal,
    train: &InteractionMatrix,
) -> Result<Vec<f64>, MetricError> {
    assert!(max_k >= 1);
    if protected.is_empty() {
        return Err(MetricError::EmptyProtectedSet);
    }
    let is_protected = |item: u32| -> Result<bool, MetricError> {
        Ok(cats
            .categories(item)?
            .iter()
            .any(|c| protected.binary_search(c).is_ok()))
    };

    // prefix sums of the ideal: disc_prefix[k] = sum_{r=1..k} discount(r)
    let mut disc_prefix = vec![0.0; max_k + 1];
    for r in 1..=max_k {
        disc_prefix[r] = disc_prefix[r - 1] + discount(r);
    }

    // number of protected items in the whole catalog (candidate-aware only)
    let protected_catalog: Option<Vec<bool>> = match ideal {
        FairIdeal::GlobalSlots => None,
        FairIdeal::CandidateAware => {
            let mut flags = vec![false; train.n_items() as usize];
            for item in 0..train.n_items() {
                flags[item as usize] = is_protected(item)?;
            }
            Some(flags)
        }
    };

    let mut sums = vec![0.0; max_k];
    let mut users = 0u64;
    for list in recs.lists() {
        if list.is_empty() {
            continue;
        }
        let u = list.user();
        let eligible = match &protected_catalog {
            None => max_k,
            Some(flags) => {
                let owned_protected = train
                    .profile(u)
                    .iter()
                    .filter(|&&i| flags[i as usize])
                    .count();
                let total_protected = flags.iter().filter(|&&f| f).count();
                total_protected - owned_protected
            }
        };
        if eligible == 0 {
            continue; // no protected item could ever be recommended
        }
        users += 1;
        let mut dcg_prefix = vec![0.0; max_k + 1];
        for r in 1..=max_k {
            let gain = if r <= list.len() {
                is_protected(list.items()[r - 1].0)?
            } else {
                false
            };
            dcg_prefix[r] = dcg_prefix[r - 1] + if gain { discount(r) } else { 0.0 };
        }
        for k in 1..=max_k {
            let idcg = disc_prefix[k.min(eligible)];
            sums[k - 1] += dcg_prefix[k] / idcg;
        }
    }
    if users == 0 {
        return Err(MetricError::Undefined("no user has recommendations"));
    }
    Ok(sums.into_iter().map(|s| s / users as f64).collect())
}

/// How the protected category set is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtectedSpec {
    /// Named data set: `mind` and `goodbook` map to their published
    /// minority-category lists; any other tag falls back to the bottom
    /// quantile rule with q = 0.25.
    Tag(String),
    /// The bottom-q fraction of categories by train interaction mass.
    BottomQuantile(f64),
    /// Explicit category names.
    Names(Vec<String>),
}

const MIND_PROTECTED: &[&str] = &[
    "kids",
    "weather",
    "video",
    "music",
    "autos",
    "movies",
    "middleeast",
    "northamerica",
];

const GOODBOOK_PROTECTED: &[&str] = &[
    "music",
    "poetry",
    "horror",
    "spirituality",
    "sports",
    "christian",
    "comics",
    "manga",
    "cookbooks",
    "psychology",
    "art",
];

/// Resolve the protected category ids for a data set. Quantile mode ranks
/// categories by train interaction mass (each interaction splits one unit
/// over its item's categories) and takes the lightest `max(1, floor(q * C))`
/// of them, ties broken by ascending id.
pub fn protected_categories(
    spec: &ProtectedSpec,
    train: &InteractionMatrix,
    cats: &CategoryMap,
) -> Result<Vec<u32>, MetricError> {
    match spec {
        ProtectedSpec::Names(names) => resolve_names(names.iter().map(String::as_str), cats),
        ProtectedSpec::Tag(tag) => match tag.to_ascii_lowercase().as_str() {
            "mind" => resolve_names(MIND_PROTECTED.iter().copied(), cats),
            "goodbook" => resolve_names(GOODBOOK_PROTECTED.iter().copied(), cats),
            _ => bottom_quantile(0.25, train, cats),
        },
        ProtectedSpec::BottomQuantile(q) => bottom_quantile(*q, train, cats),
    }
}

fn resolve_names<'a>(
    names: impl Iterator<Item = &'a str>,
    cats: &CategoryMap,
) -> Result<Vec<u32>, MetricError> {
    let mut ids = Vec::new();
    for name in names {
        match cats.id_of(name) {
            Some(id) => ids.push(id),
            None => log::warn!("protected category {name:?} not present in this data set"),
        }
    }
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(MetricError::EmptyProtectedSet);
    }
    Ok(ids)
}

fn bottom_quantile(
    q: f64,
    train: &InteractionMatrix,
    cats: &CategoryMap,
) -> Result<Vec<u32>, MetricError> {
    let n_cats = cats.n_categories();
    if n_cats == 0 {
        return Err(MetricError::EmptyProtectedSet);
    }
    let mut mass = vec![0.0f64; n_cats as usize];
    for (_, item) in train.entries() {
        let item_cats = cats.categories(item)?;
        let share = 1.0 / item_cats.len() as f64;
        for &c in item_cats {
            mass[c as usize] += share;
        }
    }
    let mut order: Vec<u32> = (0..n_cats).collect();
    order.sort_by(|&a, &b| {
        mass[a as usize]
            .total_cmp(&mass[b as usize])
            .then(a.cmp(&b))
    });
    let take = ((q * n_cats as f64).floor() as usize).max(1);
    let mut chosen: Vec<u32> = order.into_iter().take(take).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// One row of the evaluation report: every metric for one
/// (algorithm, variant, lambda) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub algorithm: String,
    pub variant: String,
    pub lambda: f64,
    pub mrr: f64,
    pub mrr_at_10: f64,
    pub ndcg_at_5: f64,
    pub ndcg_at_10: f64,
    pub kl: f64,
    pub js: f64,
    pub coverage_count: usize,
    pub coverage_fraction: f64,
    pub gini_complement: f64,
    /// fair-nDCG@k for k = 1..=100.
    pub fair_ndcg_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub config_hash: String,
    pub protected_categories: Vec<String>,
    pub fair_ideal: FairIdeal,
    pub weighting: Weighting,
}

/// Full evaluation output: one row per algorithm x variant x lambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: RunMeta,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Every cell must be finite and every curve full-length.
    pub fn validate(&self) -> Result<(), MetricError> {
        for row in &self.rows {
            let cells = [
                row.mrr,
                row.mrr_at_10,
                row.ndcg_at_5,
                row.ndcg_at_10,
                row.kl,
                row.js,
                row.coverage_fraction,
                row.gini_complement,
            ];
            let tag = format!("{}/{}/{}", row.algorithm, row.variant, row.lambda);
            if cells.iter().any(|v| !v.is_finite()) {
                return Err(MetricError::NonFinite(tag));
            }
            if row.fair_ndcg_curve.len() != FAIR_CURVE_LEN
                || row.fair_ndcg_curve.iter().any(|v| !v.is_finite())
            {
                return Err(MetricError::NonFinite(format!("{tag} fair-nDCG curve")));
            }
        }
        Ok(())
    }

    /// Long-form csv: one line per metric cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,variant,lambda,metric,value\n");
        for row in &self.rows {
            let mut push = |metric: &str, value: String| {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.algorithm, row.variant, row.lambda, metric, value
                ));
            };
            push("mrr", row.mrr.to_string());
            push("mrr@10", row.mrr_at_10.to_string());
            push("ndcg@5", row.ndcg_at_5.to_string());
            push("ndcg@10", row.ndcg_at_10.to_string());
            push("kl@10", row.kl.to_string());
            push("js@10", row.js.to_string());
            push("coverage@10", row.coverage_count.to_string());
            push("coverage-fraction@10", row.coverage_fraction.to_string());
            push("gini-complement@10", row.gini_complement.to_string());
        }
        out
    }

    /// Curve csv: `algorithm,variant,lambda,k,value` per point, one series
    /// per (algorithm, variant, lambda).
    pub fn curves_to_csv(&self) -> String {
        let mut out = String::from("algorithm,variant,lambda,k,value\n");
        for row in &self.rows {
            for (idx, v) in row.fair_ndcg_curve.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.algorithm,
                    row.variant,
                    row.lambda,
                    idx + 1,
                    v
                ));
            }
        }
        out
    }
}
