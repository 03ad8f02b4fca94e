#![forbid(unsafe_code)]

//! Correlation detection on random trees and message-passing partial
//! alignment of sparse correlated random graphs.
//!
//! The library is organized around five modules:
//!
//! - [`trees`]: labeled rooted trees, Galton-Watson samplers, pruning /
//!   subsampling / augmentation / relabeling operators, canonical codes and
//!   exact automorphism counting;
//! - [`likelihood`]: the per-node coupling weight ψ, the partial-matching
//!   kernel, and recursive log-domain likelihood ratios on tree pairs, with a
//!   brute-force oracle for small inputs;
//! - [`detection`]: Monte Carlo hypothesis-testing harness (KL estimates,
//!   exceedance curves) and the analytic phase-diagram predicates;
//! - [`graphs`]: sparse graphs, the correlated Erdős–Rényi sampler with a
//!   planted permutation, neighborhood trees, alignment metrics and file I/O;
//! - [`align`]: message passing of oriented likelihood ratios on graph
//!   pairs and the two aligners `mpalign` (thresholded triple-branch test)
//!   and `mpalign2` (argmax matching with match-edges iteration selection).
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```text
//! cargo run --release --example sample_trees        # tree model and operators
//! cargo run --release --example tree_likelihood     # likelihood ratios on tree pairs
//! cargo run --release --example detection_sweep     # KL / exceedance Monte Carlo
//! cargo run --release --example phase_diagram       # analytic (lambda, s) scan
//! cargo run --release --example align_graphs        # mpalign2 on a sampled pair
//! cargo run --release --example mpalign_onesided    # thresholded one-sided matching
//! cargo run --release --example generate_dataset    # graph-pair bundle round trip
//! ```
//!
//! A thin `treealign` binary exposes the same capabilities as the
//! subcommands `tree-sim`, `phase`, `align` and `gen`; see the [`cli`]
//! module and the README.

pub mod align;
pub mod cli;
pub mod detection;
pub mod graphs;
pub mod likelihood;
pub mod trees;

mod numeric;

pub use likelihood::LogWeight;
pub use trees::{ModelParams, RootedTree, Seed};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A sampler produced more nodes than the configured budget allows.
    #[error("node budget exceeded: reached {nodes} nodes, budget {budget}")]
    BudgetExceeded { nodes: usize, budget: usize },
    /// The smaller side of a matching-sum exceeds the bitmask degree cap.
    /// `at` names the offending node pair when raised from a graph sweep.
    #[error("degree cap exceeded: min(c, c') = {degree} > cap {cap}{at}")]
    DegreeCapExceeded { degree: usize, cap: usize, at: String },
    /// Brute-force oracle input beyond the exponential-cost guard.
    #[error("oracle input too large: {nodes} nodes > limit {limit}")]
    OracleTooLarge { nodes: usize, limit: usize },
    /// The operation needs the planted intersection tree of an H1 sample.
    #[error("sample carries no ground truth")]
    MissingGroundTruth,
    /// A partial map had a repeated left or right endpoint.
    #[error("partial map is not injective")]
    NonInjectiveInput,
    /// A dense message table would exceed the entry budget.
    #[error(
        "message table needs {entries} entries but the budget is {budget}; \
         shrink n or raise table_budget"
    )]
    MessageBudget { entries: u128, budget: u128 },
    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// Invalid experiment configuration; the message names the field.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
