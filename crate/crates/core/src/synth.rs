//! Seeded synthetic data: a desk-scale stand-in for the news/book data sets.
//!
//! Items follow a power-law popularity with configurable exponent; every
//! user concentrates on two or three preferred categories so the
//! category-profiling step has real signal to find, with a configurable
//! fraction of off-preference noise.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::categories::CategoryMap;
use crate::matrix::InteractionMatrix;
use crate::seed::Seed;

const ITEM_CAT_STREAM: u64 = 0x53594e_43;
const POPULARITY_STREAM: u64 = 0x53594e_50;
const USER_STREAM: u64 = 0x53594e_55;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub users: u32,
    pub items: u32,
    pub categories: u32,
    /// Power-law exponent of item popularity; 0 is near-uniform.
    pub skew: f64,
    pub seed: Seed,
    pub min_profile: usize,
    pub max_profile: usize,
    /// Probability that a draw comes from the user's preferred categories.
    pub affinity: f64,
}

impl SynthParams {
    pub fn new(users: u32, items: u32, categories: u32, skew: f64, seed: Seed) -> Self {
        SynthParams {
            users,
            items,
            categories,
            skew,
            seed,
            min_profile: 5,
            max_profile: 60,
            affinity: 0.85,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub user_items: Vec<Vec<u32>>,
    pub item_category: Vec<u32>,
    pub category_names: Vec<String>,
    n_items: u32,
}

impl SynthDataset {
    pub fn matrix(&self) -> InteractionMatrix {
        InteractionMatrix::from_entries(
            self.user_items.len() as u32,
            self.n_items,
            self.user_items
                .iter()
                .enumerate()
                .flat_map(|(u, items)| items.iter().map(move |&i| (u as u32, i))),
        )
        .expect("generated ids are in range")
    }

    pub fn category_map(&self) -> CategoryMap {
        CategoryMap::from_entries(
            self.category_names.clone(),
            self.item_category
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as u32, vec![c])),
        )
        .expect("generated categories are valid")
    }

    /// Write `interactions.csv` (csv-pairs, `u<id>,i<id>`) and
    /// `categories.csv` (`i<id>,<category name>`); returns both paths.
    pub fn write_csv<P: AsRef<Path>>(&self, dir: P) -> Result<(PathBuf, PathBuf), io::Error> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let interactions = dir.join("interactions.csv");
        let categories = dir.join("categories.csv");

        let mut w = BufWriter::new(File::create(&interactions)?);
        for (u, items) in self.user_items.iter().enumerate() {
            for &i in items {
                writeln!(w, "u{u},i{i}")?;
            }
        }
        w.flush()?;

        let mut w = BufWriter::new(File::create(&categories)?);
        for (i, &c) in self.item_category.iter().enumerate() {
            writeln!(w, "i{i},{}", self.category_names[c as usize])?;
        }
        w.flush()?;
        Ok((interactions, categories))
    }
}

pub fn generate(params: &SynthParams) -> SynthDataset {
    assert!(params.users > 0 && params.items > 0);
    assert!(params.categories >= 1 && params.categories <= params.items);
    assert!(params.min_profile >= 1 && params.min_profile <= params.max_profile);
    assert!((0.0..=1.0).contains(&params.affinity));
    let n_items = params.items as usize;

    // every category appears at least once, the rest are assigned uniformly
    let mut cat_rng = params.seed.derive(ITEM_CAT_STREAM).rng();
    let item_category: Vec<u32> = (0..params.items)
        .map(|i| {
            if i < params.categories {
                i
            } else {
                cat_rng.random_range(0..params.categories)
            }
        })
        .collect();

    // popularity rank decoupled from item id by a seeded shuffle
    let mut pop_rng = params.seed.derive(POPULARITY_STREAM).rng();
    let mut rank_of: Vec<usize> = (0..n_items).collect();
    for i in (1..n_items).rev() {
        let j = pop_rng.random_range(0..=i);
        rank_of.swap(i, j);
    }
    let weight: Vec<f64> = (0..n_items)
        .map(|i| ((rank_of[i] + 1) as f64).powf(-params.skew))
        .collect();

    // cumulative weights, global and per category
    let global = Cumulative::over((0..n_items).map(|i| (i as u32, weight[i])));
    let per_category: Vec<Cumulative> = (0..params.categories)
        .map(|c| {
            Cumulative::over(
                (0..n_items)
                    .filter(|&i| item_category[i] == c)
                    .map(|i| (i as u32, weight[i])),
            )
        })
        .collect();

    let user_seed = params.seed.derive(USER_STREAM);
    let user_items: Vec<Vec<u32>> = (0..params.users)
        .map(|u| {
            let mut rng = user_seed.derive(u as u64).rng();
            let size = rng
                .random_range(params.min_profile..=params.max_profile)
                .min(n_items.saturating_sub(1).max(1));
            let n_prefs = if rng.random_range(0..2) == 0 { 2 } else { 3 };
            let mut prefs = Vec::with_capacity(n_prefs);
            while prefs.len() < n_prefs.min(params.categories as usize) {
                let c = rng.random_range(0..params.categories);
                if !prefs.contains(&c) {
                    prefs.push(c);
                }
            }
            let mut owned = vec![false; n_items];
            let mut profile = Vec::with_capacity(size);
            while profile.len() < size {
                let mut picked = None;
                for _ in 0..60 {
                    let source = if rng.random_range(0.0..1.0) < params.affinity {
                        &per_category[prefs[rng.random_range(0..prefs.len())] as usize]
                    } else {
                        &global
                    };
                    let item = source.sample(&mut rng);
                    if !owned[item as usize] {
                        picked = Some(item);
                        break;
                    }
                }
                // dense profiles can exhaust rejection sampling: fall back
                // to the most popular unowned item
                let item = picked.unwrap_or_else(|| {
                    (0..n_items)
                        .filter(|&i| !owned[i])
                        .min_by_key(|&i| rank_of[i])
                        .expect("size < n_items") as u32
                });
                owned[item as usize] = true;
                profile.push(item);
            }
            profile.sort_unstable();
            profile
        })
        .collect();

    let category_names = (0..params.categories).map(|c| format!("c{c:02}")).collect();
    SynthDataset {
        user_items,
        item_category,
        category_names,
        n_items: params.items,
    }
}

/// Cumulative weight table for O(log n) weighted sampling.
struct Cumulative {
    ids: Vec<u32>,
    cum: Vec<f64>,
}

impl Cumulative {
    fn over(weighted: impl Iterator<Item = (u32, f64)>) -> Self {
        let mut ids = Vec::new();
        let mut cum = Vec::new();
        let mut total = 0.0;
        for (id, w) in weighted {
            total += w;
            ids.push(id);
            cum.push(total);
        }
        Cumulative { ids, cum }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let total = *self.cum.last().expect("non-empty table");
        let r = rng.random_range(0.0..total);
        let idx = self.cum.partition_point(|&c| c <= r);
        self.ids[idx.min(self.ids.len() - 1)]
    }
}
