//! Explainable clustering of weighted time-series demographics.
//!
//! Demographics are clustered on a blend of a trend distance (DTW or
//! Euclidean over their series) and a feature distance (Jaccard or cosine over
//! their one-hot attributes). The number of clusters `k` and the blend weight
//! `alpha` are tuned jointly so that the cluster distortion `D` and the node
//! count `N` of a decision tree explaining the clusters are both small,
//! minimizing `D + lambda * N` by a monotone branch-and-bound over
//! `(k, alpha)` blocks.
//!
//! Every family of interchangeable algorithms sits behind a trait and a
//! name-keyed registry: [`clustering::Clusterer`], [`tree::TreeTrainer`] and
//! [`methods::Method`].

pub mod clustering;
pub mod config;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod evaluator;
pub mod evolve;
pub mod methods;
pub mod monotonicity;
pub mod optimizer;
pub mod output;
pub mod seed;
pub mod tree;

pub use error::{Error, Result};
