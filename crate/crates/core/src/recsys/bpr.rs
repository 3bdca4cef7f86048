//! Bayesian personalized ranking matrix factorization.
//!
//! Stochastic gradient ascent over sampled (user, positive, negative)
//! triples, maximizing `ln sigma(x_ui - x_uj) - reg * |theta|^2` for the
//! parameters involved in each triple. Negatives are drawn uniformly from
//! the items outside the user's profile. Epochs run single-threaded because
//! the sampling order defines the result: determinism over speed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::matrix::InteractionMatrix;
use crate::seed::Seed;

use super::{rank_dense_scores, Recommendations};

const USER_INIT_STREAM: u64 = 0x425052_55;
const ITEM_INIT_STREAM: u64 = 0x425052_49;
const EPOCH_STREAM: u64 = 0x425052_45;

#[derive(Debug, Clone, PartialEq)]
pub struct BprParams {
    pub factors: usize,
    pub learning_rate: f64,
    pub reg: f64,
    pub epochs: usize,
}

impl Default for BprParams {
    fn default() -> Self {
        BprParams {
            factors: 32,
            learning_rate: 0.05,
            reg: 0.01,
            epochs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprModel {
    pub user_factors: Vec<Vec<f64>>,
    pub item_factors: Vec<Vec<f64>>,
}

impl BprModel {
    pub fn score(&self, user: u32, item: u32) -> f64 {
        self.user_factors[user as usize]
            .iter()
            .zip(&self.item_factors[item as usize])
            .map(|(a, b)| a * b)
            .sum()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log of the per-triple objective:
/// `-ln sigma(p . (qi - qj)) + reg (|p|^2 + |qi|^2 + |qj|^2)`.
pub fn triple_loss(p: &[f64], qi: &[f64], qj: &[f64], reg: f64) -> f64 {
    let x: f64 = p.iter().zip(qi.iter().zip(qj)).map(|(pu, (i, j))| pu * (i - j)).sum();
    let norm: f64 = p.iter().chain(qi).chain(qj).map(|v| v * v).sum();
    // -ln sigma(x) = log(1 + e^-x), computed stably
    let nll = if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    };
    nll + reg * norm
}

/// Analytic gradients of [`triple_loss`] with respect to the user factors
/// and the positive and negative item factors.
pub fn triple_gradients(
    p: &[f64],
    qi: &[f64],
    qj: &[f64],
    reg: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let x: f64 = p.iter().zip(qi.iter().zip(qj)).map(|(pu, (i, j))| pu * (i - j)).sum();
    let s = sigmoid(-x); // d(-ln sigma(x))/dx = -sigma(-x)
    let grad_p: Vec<f64> = p
        .iter()
        .zip(qi.iter().zip(qj))
        .map(|(pu, (i, j))| -s * (i - j) + 2.0 * reg * pu)
        .collect();
    let grad_qi: Vec<f64> = qi
        .iter()
        .zip(p)
        .map(|(i, pu)| -s * pu + 2.0 * reg * i)
        .collect();
    let grad_qj: Vec<f64> = qj
        .iter()
        .zip(p)
        .map(|(j, pu)| s * pu + 2.0 * reg * j)
        .collect();
    (grad_p, grad_qi, grad_qj)
}

fn init_factors(n: u32, factors: usize, seed: Seed) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 0.01).expect("valid normal");
    (0..n)
        .map(|id| {
            let mut rng = seed.derive(id as u64).rng();
            (0..factors).map(|_| normal.sample(&mut rng)).collect()
        })
        .collect()
}

pub fn fit_bpr(train: &InteractionMatrix, params: &BprParams, seed: Seed) -> BprModel {
    assert!(params.factors >= 1 && params.epochs >= 1);
    let mut users = init_factors(train.n_users(), params.factors, seed.derive(USER_INIT_STREAM));
    let mut items = init_factors(train.n_items(), params.factors, seed.derive(ITEM_INIT_STREAM));
    let n_items = train.n_items();

    let positives: Vec<(u32, u32)> = train.entries().collect();
    let mut order: Vec<usize> = (0..positives.len()).collect();
    let lr = params.learning_rate;

    for epoch in 0..params.epochs {
        let mut rng = seed.derive(EPOCH_STREAM).derive(epoch as u64).rng();
        order.shuffle(&mut rng);
        for &idx in &order {
            let (u, i) = positives[idx];
            if train.profile(u).len() as u32 == n_items {
                continue; // no negative item exists for this user
            }
            let j = loop {
                let j = rng.random_range(0..n_items);
                if !train.contains(u, j) {
                    break j;
                }
            };
            let (gp, gi, gj) = triple_gradients(
                &users[u as usize],
                &items[i as usize],
                &items[j as usize],
                params.reg,
            );
            for (w, g) in users[u as usize].iter_mut().zip(&gp) {
                *w -= lr * g;
            }
            for (w, g) in items[i as usize].iter_mut().zip(&gi) {
                *w -= lr * g;
            }
            for (w, g) in items[j as usize].iter_mut().zip(&gj) {
                *w -= lr * g;
            }
        }
    }
    BprModel {
        user_factors: users,
        item_factors: items,
    }
}

pub fn bpr(
    train: &InteractionMatrix,
    params: &BprParams,
    seed: Seed,
    n: usize,
) -> Recommendations {
    let model = fit_bpr(train, params, seed);
    let lists = (0..train.n_users())
        .into_par_iter()
        .map(|u| {
            let scores: Vec<f64> = (0..train.n_items()).map(|i| model.score(u, i)).collect();
            rank_dense_scores(u, &scores, train, n)
        })
        .collect();
    Recommendations::new("bpr", lists)
}
