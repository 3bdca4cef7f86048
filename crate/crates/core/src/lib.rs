//! Diversity-oriented pre-processing for top-N recommenders.
//!
//! The pipeline takes a binary user-item interaction matrix, learns which
//! content categories are representative of each user, builds a personalized
//! list of category-novel candidate items per user, and then edits training
//! profiles by adding (one-step) or adding and removing (two-step)
//! interactions. A suite of collaborative-filtering recommenders and
//! accuracy / calibration / coverage / fairness metrics quantifies the effect
//! of the edits against an untouched test split.
//!
//! Modules follow the data flow:
//!
//! * [`matrix`], [`categories`], [`ranking`], [`seed`] — shared data model
//! * [`ingest`] — parsing, implicit conversion, train/test splitting
//! * [`profiler`] — per-category logistic regression over user features
//! * [`predictor`] — userKNN imputation producing candidate lists
//! * [`preprocess`] — addition lists and one-step / two-step / random edits
//! * [`recsys`] — MostPop, ItemKNN, implicit-feedback ALS, BPR
//! * [`metrics`] — MRR, nDCG, KL/JS calibration, coverage, Gini, fair-nDCG
//! * [`synth`] — seeded synthetic data generation for experiments and tests

pub mod categories;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod predictor;
pub mod preprocess;
pub mod profiler;
pub mod ranking;
pub mod recsys;
pub mod seed;
pub mod synth;

pub use categories::CategoryMap;
pub use matrix::InteractionMatrix;
pub use ranking::RankedList;
pub use seed::Seed;
