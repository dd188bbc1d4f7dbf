//! Search games on rooted metric trees where the Searcher receives a noisy
//! signal at every branch node pointing towards the Hider's branch.
//!
//! * [`tree`]: parsing, validation and binarization of rooted metric trees.
//! * [`solver`]: the exact recursive solution (value, Hider distribution,
//!   favored branches and favoring biases).
//! * [`evaluator`]: exact expected capture times for arbitrary Searcher
//!   policies, best responses and per-node payoff matrices.
//! * [`oracle`]: brute-force verification through the full matrix game.
//! * [`simulator`]: seeded play-outs and Monte Carlo estimates.
//! * [`tables`]: parameter sweeps and the perfect-binary-tree table.

pub mod evaluator;
pub mod generate;
pub mod oracle;
pub mod report;
pub mod simulator;
pub mod solver;
pub mod tables;
pub mod tree;

pub use evaluator::SearcherPolicy;
pub use solver::{solve, SignalAccuracy, Solution};
pub use tree::{parse_tree, NodeId, RootedTree};
