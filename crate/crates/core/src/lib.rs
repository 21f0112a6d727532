//! Feature subset selection for software effort estimation.
//!
//! Nine subset-selection strategies (greedy wrappers and filters, stepwise
//! regression, genetic search and Garson pruning of a perceptron) scored by a
//! dual-form kernel ridge regressor, together with the data preparation,
//! split protocol and MMRE / PRED(l) reporting needed to compare them.
//!
//! With the default `parallel` feature, candidate evaluations, experiment
//! cells and architecture sweeps run on the rayon pool. Building with
//! `--no-default-features` runs everything sequentially with identical results.

pub mod ann;
pub mod cli;
pub mod cv;
pub mod dataset;
pub mod harness;
pub mod linalg;
pub mod linreg;
pub mod metrics;
pub mod parallel;
pub mod ridge;
pub mod rng;
pub mod search;
pub mod subset;

pub use dataset::{Dataset, FeatureDescriptor, FeatureKind, SplitPlan};
pub use harness::{ExperimentReport, MethodId, PartitionResult};
pub use metrics::EvalResult;
pub use ridge::{KernelConfig, RidgeConfig, RidgeModel};
pub use search::{Evaluator, TrainingSet};
pub use subset::FeatureSubset;

/// Score assigned to subsets that cannot be evaluated (the empty subset,
/// numerically failed fits). Every finite score beats it.
pub const WORST_SCORE: f64 = f64::INFINITY;
