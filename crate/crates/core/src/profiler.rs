//! Representative-category discovery via one-vs-rest logistic regression.
//!
//! The training matrix is read transposed: items are observations, users are
//! binary features (`X_iu = 1` iff item `i` was interacted with by user `u`),
//! and the label for category `c` marks the items belonging to `c`. A user's
//! profile is the set of categories where their fitted coefficient is
//! strictly positive — the categories they are "indicative" of.
//!
//! The optimizer is full-batch gradient descent with Armijo backtracking on
//! the L2-regularized log-loss (intercept unpenalized): deterministic,
//! dependency-free, and adequate at the feature counts this pipeline sees.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::categories::{CategoryError, CategoryMap};
use crate::matrix::InteractionMatrix;

#[derive(Debug, Error)]
pub enum ProfilerError {
    #[error(transparent)]
    Category(#[from] CategoryError),
    #[error("malformed profile file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Gradient-descent settings for one category fit.
#[derive(Debug, Clone, Copy)]
pub struct FitParams {
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            l2: 1.0,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// Fitted one-vs-rest model for a single category.
#[derive(Debug, Clone)]
pub struct CategoryModel {
    pub category: u32,
    pub intercept: f64,
    /// One coefficient per user (the feature weights).
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective value per accepted step, starting at the zero vector.
    pub loss_trace: Vec<f64>,
}

/// Binary item labels for one category: `labels[i] = true` iff item `i`
/// belongs to the category. Membership, not exclusivity: a multi-category
/// item is positive for each of its categories.
pub fn build_item_labels(
    train: &InteractionMatrix,
    cats: &CategoryMap,
    category: u32,
) -> Result<Vec<bool>, ProfilerError> {
    let mut labels = vec![false; train.n_items() as usize];
    for item in 0..train.n_items() {
        labels[item as usize] = cats.categories(item)?.binary_search(&category).is_ok();
    }
    Ok(labels)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// log(1 + e^z) without overflow
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Objective<'a> {
    train: &'a InteractionMatrix,
    labels: &'a [bool],
    l2: f64,
}

impl Objective<'_> {
    fn linear_terms(&self, intercept: f64, weights: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for item in 0..self.train.n_items() {
            let mut z = intercept;
            for &u in self.train.item_users(item) {
                z += weights[u as usize];
            }
            out.push(z);
        }
    }

    fn loss(&self, z: &[f64], weights: &[f64]) -> f64 {
        let mut loss = 0.0;
        for (i, &zi) in z.iter().enumerate() {
            loss += log1p_exp(zi);
            if self.labels[i] {
                loss -= zi;
            }
        }
        loss + 0.5 * self.l2 * weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient of the loss. Residual r_i = sigma(z_i) - y_i flows to every
    /// user feature that is on for item i.
    fn gradient(&self, z: &[f64], weights: &[f64]) -> (f64, Vec<f64>) {
        let mut grad_w = vec![0.0; weights.len()];
        let mut grad_b = 0.0;
        for (i, &zi) in z.iter().enumerate() {
            let r = sigmoid(zi) - if self.labels[i] { 1.0 } else { 0.0 };
            grad_b += r;
            for &u in self.train.item_users(i as u32) {
                grad_w[u as usize] += r;
            }
        }
        for (g, w) in grad_w.iter_mut().zip(weights) {
            *g += self.l2 * w;
        }
        (grad_b, grad_w)
    }
}

/// Fit the logistic model for one category. Returns `None` (a skip, not a
/// failure) when the labels are degenerate: fewer than two positive items or
/// no negative item.
pub fn fit_category_model(
    train: &InteractionMatrix,
    category: u32,
    labels: &[bool],
    params: &FitParams,
) -> Option<CategoryModel> {
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives < 2 || negatives < 1 {
        return None;
    }

    let obj = Objective {
        train,
        labels,
        l2: params.l2,
    };
    let n_users = train.n_users() as usize;
    let mut weights = vec![0.0; n_users];
    let mut intercept = 0.0;

    let mut z = Vec::with_capacity(labels.len());
    let mut z_trial = Vec::with_capacity(labels.len());
    obj.linear_terms(intercept, &weights, &mut z);
    let mut loss = obj.loss(&z, &weights);
    let mut loss_trace = vec![loss];

    let mut converged = false;
    let mut iterations = 0;
    let mut trial_weights = vec![0.0; n_users];

    for iter in 0..params.max_iter {
        iterations = iter + 1;
        let (grad_b, grad_w) = obj.gradient(&z, &weights);

        let grad_inf = grad_w
            .iter()
            .fold(grad_b.abs(), |acc, g| acc.max(g.abs()));
        if grad_inf < params.tol {
            converged = true;
            iterations = iter;
            break;
        }

        let grad_sq = grad_b * grad_b + grad_w.iter().map(|g| g * g).sum::<f64>();

        // Armijo backtracking along the steepest-descent direction.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial_b = intercept - step * grad_b;
            for ((t, w), g) in trial_weights.iter_mut().zip(&weights).zip(&grad_w) {
                *t = w - step * g;
            }
            obj.linear_terms(trial_b, &trial_weights, &mut z_trial);
            let trial_loss = obj.loss(&z_trial, &trial_weights);
            if trial_loss <= loss - 1e-4 * step * grad_sq {
                intercept = trial_b;
                std::mem::swap(&mut weights, &mut trial_weights);
                std::mem::swap(&mut z, &mut z_trial);
                loss = trial_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // step underflow: gradient is numerically flat, stop here
            break;
        }
        debug_assert!(loss <= *loss_trace.last().unwrap() + 1e-12);
        loss_trace.push(loss);
    }

    Some(CategoryModel {
        category,
        intercept,
        coefficients: weights,
        converged,
        iterations,
        loss_trace,
    })
}

/// Fit every category in parallel; results come back in category-id order.
/// Degenerate categories are skipped and absent from the output.
pub fn fit_all(
    train: &InteractionMatrix,
    cats: &CategoryMap,
    params: &FitParams,
) -> Result<Vec<CategoryModel>, ProfilerError> {
    let mut labels = Vec::with_capacity(cats.n_categories() as usize);
    for c in 0..cats.n_categories() {
        labels.push(build_item_labels(train, cats, c)?);
    }
    let models: Vec<Option<CategoryModel>> = labels
        .par_iter()
        .enumerate()
        .map(|(c, y)| fit_category_model(train, c as u32, y, params))
        .collect();
    Ok(models.into_iter().flatten().collect())
}

/// Per-user representative categories: the `(category, coefficient)` pairs
/// with coefficient strictly above the threshold (paper value 0).
#[derive(Debug, Clone, PartialEq)]
pub struct UserCategoryProfile {
    per_user: Vec<Vec<(u32, f64)>>,
}

pub fn user_categories(
    models: &[CategoryModel],
    threshold: f64,
    n_users: u32,
) -> UserCategoryProfile {
    let mut per_user = vec![Vec::new(); n_users as usize];
    for model in models {
        for (u, &coef) in model.coefficients.iter().enumerate() {
            if coef > threshold {
                per_user[u].push((model.category, coef));
            }
        }
    }
    UserCategoryProfile { per_user }
}

impl UserCategoryProfile {
    pub fn new(per_user: Vec<Vec<(u32, f64)>>) -> Self {
        UserCategoryProfile { per_user }
    }

    pub fn n_users(&self) -> u32 {
        self.per_user.len() as u32
    }

    /// `(category, coefficient)` pairs for one user, ascending category id.
    pub fn categories(&self, user: u32) -> &[(u32, f64)] {
        &self.per_user[user as usize]
    }

    pub fn category_ids(&self, user: u32) -> impl Iterator<Item = u32> + '_ {
        self.per_user[user as usize].iter().map(|&(c, _)| c)
    }

    pub fn contains(&self, user: u32, category: u32) -> bool {
        self.per_user[user as usize]
            .binary_search_by_key(&category, |&(c, _)| c)
            .is_ok()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ProfilerError> {
        writeln!(w, "user,category,coefficient")?;
        for (u, cats) in self.per_user.iter().enumerate() {
            for &(c, coef) in cats {
                writeln!(w, "{u},{c},{coef}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv_file<P: AsRef<Path>>(path: P, n_users: u32) -> Result<Self, ProfilerError> {
        Self::read_csv(BufReader::new(File::open(path)?), n_users)
    }

    pub fn read_csv<R: BufRead>(reader: R, n_users: u32) -> Result<Self, ProfilerError> {
        let mut per_user = vec![Vec::new(); n_users as usize];
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') || line.starts_with("user,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(ProfilerError::BadFile(format!("line {}: expected 3 fields", idx + 1)));
            }
            let u: usize = fields[0]
                .parse()
                .map_err(|_| ProfilerError::BadFile(format!("line {}: bad user", idx + 1)))?;
            let c: u32 = fields[1]
                .parse()
                .map_err(|_| ProfilerError::BadFile(format!("line {}: bad category", idx + 1)))?;
            let coef: f64 = fields[2]
                .parse()
                .map_err(|_| ProfilerError::BadFile(format!("line {}: bad coefficient", idx + 1)))?;
            if u >= per_user.len() {
                return Err(ProfilerError::BadFile(format!("line {}: user out of range", idx + 1)));
            }
            per_user[u].push((c, coef));
        }
        for cats in &mut per_user {
            cats.sort_by_key(|&(c, _)| c);
        }
        Ok(UserCategoryProfile { per_user })
    }
}
