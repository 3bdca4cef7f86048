//! Implicit-feedback matrix factorization via alternating least squares.
//!
//! Confidence-weighted formulation: observed cells carry confidence
//! `1 + alpha`, unobserved cells confidence 1 with preference 0. Each
//! alternation solves ridge-regularized normal equations per user and per
//! item; the confidence objective is recomputed every alternation and must
//! not increase.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::matrix::InteractionMatrix;
use crate::seed::Seed;

use super::{rank_dense_scores, Recommendations};

const USER_INIT_STREAM: u64 = 0x414c53_55;
const ITEM_INIT_STREAM: u64 = 0x414c53_49;

#[derive(Debug, Clone, PartialEq)]
pub struct AlsParams {
    pub factors: usize,
    pub reg: f64,
    pub iterations: usize,
    pub alpha: f64,
}

impl Default for AlsParams {
    fn default() -> Self {
        AlsParams {
            factors: 32,
            reg: 0.1,
            iterations: 20,
            alpha: 40.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlsModel {
    pub user_factors: Vec<Vec<f64>>,
    pub item_factors: Vec<Vec<f64>>,
    /// Confidence objective before training and after each alternation.
    pub objective_trace: Vec<f64>,
}

impl AlsModel {
    pub fn score(&self, user: u32, item: u32) -> f64 {
        dot(&self.user_factors[user as usize], &self.item_factors[item as usize])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factor entries drawn from a seeded normal(0, 0.01) generator keyed by
/// (seed, entity id), so re-deriving per id keeps id-permutation
/// equivariance.
fn init_factors(n: u32, factors: usize, seed: Seed) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 0.01).expect("valid normal");
    (0..n)
        .map(|id| {
            let mut rng = seed.derive(id as u64).rng();
            (0..factors).map(|_| normal.sample(&mut rng)).collect()
        })
        .collect()
}

pub fn fit_als(train: &InteractionMatrix, params: &AlsParams, seed: Seed) -> AlsModel {
    assert!(params.factors >= 1 && params.iterations >= 1);
    let f = params.factors;
    let mut users = init_factors(train.n_users(), f, seed.derive(USER_INIT_STREAM));
    let mut items = init_factors(train.n_items(), f, seed.derive(ITEM_INIT_STREAM));

    let mut trace = vec![objective(train, &users, &items, params)];
    for _ in 0..params.iterations {
        solve_side(&mut users, &items, |u| train.profile(u), params);
        solve_side(&mut items, &users, |i| train.item_users(i), params);
        let obj = objective(train, &users, &items, params);
        debug_assert!(
            obj <= trace.last().unwrap() * (1.0 + 1e-9) + 1e-9,
            "objective increased: {} -> {}",
            trace.last().unwrap(),
            obj
        );
        trace.push(obj);
    }
    AlsModel {
        user_factors: users,
        item_factors: items,
        objective_trace: trace,
    }
}

/// Solve one side of the alternation: for every target entity, minimize the
/// confidence-weighted squared error against the fixed side.
fn solve_side<'a, F>(
    target: &mut [Vec<f64>],
    fixed: &[Vec<f64>],
    linked: F,
    params: &AlsParams,
) where
    F: Fn(u32) -> &'a [u32] + Sync,
{
    let f = params.factors;
    // Gram matrix of the fixed side plus the ridge term, shared read-only.
    let mut gram = DMatrix::<f64>::zeros(f, f);
    for row in fixed {
        for a in 0..f {
            for b in 0..f {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    for d in 0..f {
        gram[(d, d)] += params.reg;
    }

    target
        .par_iter_mut()
        .enumerate()
        .for_each(|(id, row)| {
            let profile = linked(id as u32);
            let mut a = gram.clone();
            let mut b = DVector::<f64>::zeros(f);
            for &other in profile {
                let y = &fixed[other as usize];
                for p in 0..f {
                    for q in 0..f {
                        a[(p, q)] += params.alpha * y[p] * y[q];
                    }
                    b[p] += (1.0 + params.alpha) * y[p];
                }
            }
            let solution = solve_spd(a, &b, params.reg);
            row.copy_from_slice(solution.as_slice());
        });
}

/// Cholesky solve with escalating ridge jitter (floor 1e-6) when the normal
/// equations are numerically singular.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>, reg: f64) -> DVector<f64> {
    let f = a.nrows();
    let mut jitter = reg.max(1e-6);
    let mut attempt = a.clone();
    loop {
        match Cholesky::new(attempt) {
            Some(chol) => return chol.solve(b),
            None => {
                let mut retry = a.clone();
                for d in 0..f {
                    retry[(d, d)] += jitter;
                }
                jitter *= 10.0;
                attempt = retry;
                assert!(jitter < 1e12, "normal equations irrecoverably singular");
            }
        }
    }
}

/// Full confidence objective:
/// sum_{u,i} c_ui (p_ui - x_u . y_i)^2 + reg (|X|^2 + |Y|^2), where the
/// all-cells term collapses through the item Gram matrix.
fn objective(
    train: &InteractionMatrix,
    users: &[Vec<f64>],
    items: &[Vec<f64>],
    params: &AlsParams,
) -> f64 {
    let f = params.factors;
    let mut gram = vec![0.0; f * f];
    for row in items {
        for a in 0..f {
            for b in 0..f {
                gram[a * f + b] += row[a] * row[b];
            }
        }
    }
    // sum over every cell of s^2 via x' (Y'Y) x
    let mut all_sq = 0.0;
    for x in users {
        for a in 0..f {
            let mut acc = 0.0;
            for b in 0..f {
                acc += gram[a * f + b] * x[b];
            }
            all_sq += x[a] * acc;
        }
    }
    let mut observed = 0.0;
    for (u, i) in train.entries() {
        let s = dot(&users[u as usize], &items[i as usize]);
        // replace the c=1, p=0 contribution with c=1+alpha, p=1
        observed += (1.0 + params.alpha) * (1.0 - s) * (1.0 - s) - s * s;
    }
    let norms: f64 = users.iter().chain(items).map(|r| dot(r, r)).sum();
    all_sq + observed + params.reg * norms
}

pub fn implicit_mf(
    train: &InteractionMatrix,
    params: &AlsParams,
    seed: Seed,
    n: usize,
) -> Recommendations {
    let model = fit_als(train, params, seed);
    let lists = (0..train.n_users())
        .into_par_iter()
        .map(|u| {
            let scores: Vec<f64> = (0..train.n_items()).map(|i| model.score(u, i)).collect();
            rank_dense_scores(u, &scores, train, n)
        })
        .collect();
    Recommendations::new("implicit-mf", lists)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(factors: usize, iterations: usize) -> AlsParams {
        AlsParams {
            factors,
            reg: 0.1,
            iterations,
            alpha: 40.0,
        }
    }

    fn blockish() -> InteractionMatrix {
        let mut entries = Vec::new();
        for u in 0..8u32 {
            for i in 0..10u32 {
                if (u < 4) == (i < 5) && (u + i) % 3 != 0 {
                    entries.push((u, i));
                }
            }
        }
        InteractionMatrix::from_entries(8, 10, entries).unwrap()
    }

    #[test]
    fn objective_is_non_increasing() {
        let model = fit_als(&blockish(), &small_params(4, 10), Seed(3));
        for w in model.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-9, "{} -> {}", w[0], w[1]);
        }
        assert_eq!(model.objective_trace.len(), 11);
    }

    #[test]
    fn rank_one_pattern_is_recovered() {
        // items {0,1,2} form the dominant pattern; each user misses one of
        // them; item 3 is interacted with by nobody
        let entries: Vec<(u32, u32)> = (0..6u32)
            .flat_map(|u| (0..3u32).filter(move |&i| i != u % 3).map(move |i| (u, i)))
            .collect();
        let m = InteractionMatrix::from_entries(6, 4, entries).unwrap();
        let params = AlsParams {
            factors: 1,
            reg: 0.01,
            iterations: 15,
            alpha: 40.0,
        };
        let recs = implicit_mf(&m, &params, Seed(7), 2);
        for u in 0..6u32 {
            let missing = u % 3;
            assert_eq!(
                recs.list(u).item_ids().next(),
                Some(missing),
                "user {u} should be recommended its missing pattern item"
            );
        }
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let m = blockish();
        let a = fit_als(&m, &small_params(4, 5), Seed(11));
        let b = fit_als(&m, &small_params(4, 5), Seed(11));
        assert_eq!(a.user_factors, b.user_factors);
        assert_eq!(a.item_factors, b.item_factors);
    }

    #[test]
    fn permuting_user_ids_permutes_recommendations() {
        let m = blockish();
        let n_users = m.n_users();
        // reverse the user ids
        let permuted = InteractionMatrix::from_entries(
            n_users,
            m.n_items(),
            m.entries().map(|(u, i)| (n_users - 1 - u, i)),
        )
        .unwrap();
        let params = small_params(3, 8);
        let original = implicit_mf(&m, &params, Seed(5), 4);
        let shuffled = implicit_mf(&permuted, &params, Seed(5), 4);
        for u in 0..n_users {
            let a: Vec<u32> = original.list(u).item_ids().collect();
            let b: Vec<u32> = shuffled.list(n_users - 1 - u).item_ids().collect();
            assert_eq!(a, b, "user {u}");
            for (x, y) in original.list(u).items().iter().zip(shuffled.list(n_users - 1 - u).items()) {
                assert!((x.1 - y.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_reg_survives_via_jitter() {
        let m = InteractionMatrix::from_entries(2, 2, vec![(0, 0), (1, 1)]).unwrap();
        let params = AlsParams {
            factors: 5, // more factors than items: singular without jitter
            reg: 0.0,
            iterations: 3,
            alpha: 10.0,
        };
        let model = fit_als(&m, &params, Seed(1));
        for row in model.user_factors.iter().chain(&model.item_factors) {
            assert!(row.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn empty_profile_user_gets_zero_vector() {
        let m = InteractionMatrix::from_entries(3, 3, vec![(0, 0), (1, 1), (0, 2)]).unwrap();
        let model = fit_als(&m, &small_params(3, 2), Seed(2));
        // user 2 has no interactions; the ridge pulls its solve to zero
        assert!(model.user_factors[2].iter().all(|&v| v.abs() < 1e-12));
    }
}
