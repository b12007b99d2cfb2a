//! Offline evaluation workbench for diversified top-N recommendation.
//!
//! The pipeline trains a biased matrix-factorization baseline, re-ranks each
//! user's candidate set with greedy diversifiers (MMR, xQuAD, SPAD), scores
//! the resulting lists with diversity and relevance metrics, and compares the
//! algorithms head-to-head with the Sudden Death score.
//!
//! Per-user stages run on rayon when the default `parallel` feature is
//! enabled; see [`par::Execution`].

pub mod aspects;
pub mod corpus;
pub mod factorizer;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod reranker;
pub mod sudden_death;

pub use aspects::{AspectModel, DistanceModel, ItemDistance, SimilarityMatrix, Subprofile};
pub use corpus::{Rating, RelevanceJudgments, SplitCorpus};
pub use factorizer::{MfConfig, MfModel, ScoredCandidates};
pub use par::Execution;
pub use reranker::{DiversityKind, GreedyConfig, RankedList};
pub use sudden_death::{RunSet, SdReport};
