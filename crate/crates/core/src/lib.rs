//! Cross-model graph-relation join optimization: a property graph engine
//! and a relational engine behind one middleware, a planner that decides
//! which tables move into the graph engine, and a learned plan comparator
//! that ranks the candidates.

pub mod algebra;
pub mod baselines;
pub mod benchgen;
pub mod cmlero;
pub mod datamodel;
pub mod engines;
mod error;
pub mod estimate;
pub mod explorer;
pub mod featurizer;
pub mod frontend;
pub mod harness;
pub mod fixtures;

pub use error::{Error, Result};

/// The guide's snippets, compiled and run as doc-tests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/data-model.md")]
    pub struct DataModel;
    #[doc = include_str!("../../../book/src/queries.md")]
    pub struct Queries;
    #[doc = include_str!("../../../book/src/plan-space.md")]
    pub struct PlanSpace;
    #[doc = include_str!("../../../book/src/execution.md")]
    pub struct Execution;
    #[doc = include_str!("../../../book/src/learning.md")]
    pub struct Learning;
    #[doc = include_str!("../../../book/src/benchmark.md")]
    pub struct Benchmark;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
}
