//! Importance-sampling coresets for Euclidean `(k, z)`-clustering.
//!
//! Pipeline: [`seeding`] finds a constant-factor solution, [`decomposition`]
//! splits the input into rings and groups around it, and [`sampler`] draws a
//! weighted sample per group. [`evaluator`] measures cost distortion of the
//! result, [`lowerbound`] builds the hard instances, and [`embeddings`]
//! provides the terminal embeddings.

pub mod decomposition;
pub mod embeddings;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod lowerbound;
pub mod rng;
pub mod sampler;
pub mod seeding;

pub use error::{Error, ParseError, Result};
pub use geometry::{cost_z, CenterSet, ClusteringParams, Point, WeightedPointSet};
pub use sampler::{build_coreset, construct, Coreset, CoresetConfig};
