//! Exact solution of the signalled search game by bottom-up recursion.
//!
//! At a branch node with branches `Q1`, `Q2` (arc plus everything below) of
//! lengths `mu1`, `mu2` and mean depths `D1 >= D2`, the favored branch is `Q1`
//! and
//!
//! ```text
//! hider mass split   p*mu1 : q*mu2
//! D    = (p*mu1*D1 + q*mu2*D2) / (p*mu1 + q*mu2)
//! V    = 2*q*mu + (p - q)*D
//! beta = (p - q)*(D1 - D2) / (2*(p*mu1 + q*mu2))
//! ```
//!
//! A single arc of length `l` above a subtree adds `l` to both `D` and `V`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{NodeId, RootedTree};

/// Leaf probabilities keyed by node.
pub type LeafDistribution = BTreeMap<NodeId, f64>;

/// Tolerance for the constant-depth test and other tree-level comparisons.
pub const DEPTH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("signal accuracy p = {0} is invalid: p must exceed 1/2 and be at most 1")]
    AccuracyOutOfRange(f64),
    #[error("cannot parse {0:?} as a probability (decimal or fraction a/b)")]
    BadNumber(String),
    #[error("tree is not in binary form; call normalize() first")]
    NotNormalized,
    #[error("branch lengths must be positive (long {long}, short {short})")]
    NonPositiveLength { long: f64, short: f64 },
    #[error("long arc {long} is shorter than short arc {short}")]
    LongShorterThanShort { long: f64, short: f64 },
    #[error("leaf depths range over [{min}, {max}]; tree does not have constant depth")]
    NonConstantDepth { min: f64, max: f64 },
}

/// Probability `p` that a signal points at the branch holding the Hider.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SignalAccuracy(f64);

impl SignalAccuracy {
    pub fn new(p: f64) -> Result<Self, SolveError> {
        if p.is_finite() && p > 0.5 && p <= 1.0 {
            Ok(Self(p))
        } else {
            Err(SolveError::AccuracyOutOfRange(p))
        }
    }

    pub fn p(self) -> f64 {
        self.0
    }

    pub fn q(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for SignalAccuracy {
    type Error = SolveError;
    fn try_from(p: f64) -> Result<Self, SolveError> {
        Self::new(p)
    }
}

impl From<SignalAccuracy> for f64 {
    fn from(acc: SignalAccuracy) -> f64 {
        acc.0
    }
}

impl FromStr for SignalAccuracy {
    type Err = SolveError;
    fn from_str(s: &str) -> Result<Self, SolveError> {
        Self::new(parse_ratio(s)?)
    }
}

impl fmt::Display for SignalAccuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parses `"0.75"`, `"3/4"` or `"7.5e-1"`. A fraction is divided once, after
/// both sides have been read, so `"2/3"` is the correctly rounded 2/3.
pub fn parse_ratio(s: &str) -> Result<f64, SolveError> {
    let bad = || SolveError::BadNumber(s.to_owned());
    let value = match s.trim().split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            num / den
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Length, mean depth and value of one branch seen from its branch node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchStats {
    pub child: NodeId,
    pub mu: f64,
    pub mean_depth: f64,
    pub value: f64,
}

/// Searcher choice at a branch node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchChoice {
    pub favored: BranchStats,
    pub other: BranchStats,
    /// Probability of searching the favored branch first without looking at the signal.
    pub beta: f64,
    /// Optimal Hider probability of the favored branch, `p*mu1 / (p*mu1 + q*mu2)`.
    pub favored_mass: f64,
}

/// Annotation of the subtree game rooted at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeSolution {
    pub mu: f64,
    pub mean_depth: f64,
    pub value: f64,
    pub branch: Option<BranchChoice>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub accuracy: SignalAccuracy,
    /// Indexed by [`NodeId::index`].
    pub nodes: Vec<NodeSolution>,
    pub lambda_bar: LeafDistribution,
    pub value: f64,
    pub mean_depth: f64,
    pub mu: f64,
}

impl Solution {
    pub fn node(&self, id: NodeId) -> &NodeSolution {
        &self.nodes[id.index()]
    }

    pub fn branch(&self, id: NodeId) -> Option<&BranchChoice> {
        self.nodes[id.index()].branch.as_ref()
    }

    /// Branch nodes with their choices, in preorder.
    pub fn branches(&self) -> impl Iterator<Item = (NodeId, &BranchChoice)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.branch.as_ref().map(|b| (NodeId::from_index(i), b)))
    }

    pub fn lambda(&self, leaf: NodeId) -> f64 {
        self.lambda_bar.get(&leaf).copied().unwrap_or(0.0)
    }
}

/// Solves `G(tree, root, p)` on a normalized tree.
pub fn solve(tree: &RootedTree, acc: SignalAccuracy) -> Result<Solution, SolveError> {
    if !tree.is_normalized() {
        return Err(SolveError::NotNormalized);
    }
    let (p, q) = (acc.p(), acc.q());
    let mut nodes = vec![
        NodeSolution { mu: 0.0, mean_depth: 0.0, value: 0.0, branch: None };
        tree.node_count()
    ];

    let through = |nodes: &[NodeSolution], c: NodeId| {
        let below = nodes[c.index()];
        let arc = tree.arc_length(c);
        BranchStats {
            child: c,
            mu: arc + below.mu,
            mean_depth: arc + below.mean_depth,
            value: arc + below.value,
        }
    };

    for v in tree.preorder().rev() {
        nodes[v.index()] = match *tree.children(v) {
            [] => NodeSolution { mu: 0.0, mean_depth: 0.0, value: 0.0, branch: None },
            [only] => {
                let b = through(&nodes, only);
                NodeSolution { mu: b.mu, mean_depth: b.mean_depth, value: b.value, branch: None }
            }
            [c1, c2] => {
                let (b1, b2) = (through(&nodes, c1), through(&nodes, c2));
                let (fav, other) = if b2.mean_depth > b1.mean_depth { (b2, b1) } else { (b1, b2) };
                let weight = p * fav.mu + q * other.mu;
                assert!(weight > 0.0, "branch node {} has no positive-length branch", tree.name(v));
                let mu = fav.mu + other.mu;
                let mean_depth = (p * fav.mu * fav.mean_depth + q * other.mu * other.mean_depth) / weight;
                NodeSolution {
                    mu,
                    mean_depth,
                    value: 2.0 * q * mu + (p - q) * mean_depth,
                    branch: Some(BranchChoice {
                        favored: fav,
                        other,
                        beta: (p - q) * (fav.mean_depth - other.mean_depth) / (2.0 * weight),
                        favored_mass: p * fav.mu / weight,
                    }),
                }
            }
            _ => unreachable!("normalized trees have at most two children"),
        };
    }

    let mut mass = vec![0.0; tree.node_count()];
    mass[tree.root().index()] = 1.0;
    let mut lambda_bar = LeafDistribution::new();
    for v in tree.preorder() {
        let m = mass[v.index()];
        match (tree.children(v), nodes[v.index()].branch) {
            ([], _) => {
                lambda_bar.insert(v, m);
            }
            (&[only], None) => mass[only.index()] = m,
            (_, Some(choice)) => {
                mass[choice.favored.child.index()] = m * choice.favored_mass;
                mass[choice.other.child.index()] = m * (1.0 - choice.favored_mass);
            }
            _ => unreachable!(),
        }
    }

    let top = nodes[tree.root().index()];
    Ok(Solution {
        accuracy: acc,
        value: top.value,
        mean_depth: top.mean_depth,
        mu: top.mu,
        nodes,
        lambda_bar,
    })
}

/// Closed forms for a branch node whose branches are two leaf arcs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenultimateSolution {
    pub beta: f64,
    /// Optimal probability of hiding at the end of the long arc.
    pub x_star: f64,
    pub value: f64,
}

pub fn penultimate_solution(
    long: f64,
    short: f64,
    acc: SignalAccuracy,
) -> Result<PenultimateSolution, SolveError> {
    if !(long > 0.0 && short > 0.0 && long.is_finite() && short.is_finite()) {
        return Err(SolveError::NonPositiveLength { long, short });
    }
    if long < short {
        return Err(SolveError::LongShorterThanShort { long, short });
    }
    let (p, q) = (acc.p(), acc.q());
    let weight = p * long + q * short;
    Ok(PenultimateSolution {
        beta: (p - q) * (long - short) / (2.0 * weight),
        x_star: p * long / weight,
        value: 2.0 * q * (long + short) + (p - q) * (p * long * long + q * short * short) / weight,
    })
}

/// Value on a tree whose leaves all sit at the same distance `r` from the root:
/// `2*q*mu + (p - q)*r`.
pub fn constant_depth_value(tree: &RootedTree, acc: SignalAccuracy) -> Result<f64, SolveError> {
    let depths = tree.leaf_depths();
    let min = depths.values().copied().fold(f64::INFINITY, f64::min);
    let max = depths.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - min > DEPTH_TOL {
        return Err(SolveError::NonConstantDepth { min, max });
    }
    Ok(2.0 * acc.q() * tree.total_length() + (acc.p() - acc.q()) * max)
}

/// Equal Branch Density distribution: the optimal Hider mix without signals,
/// splitting mass in proportion to branch lengths at every branch node.
pub fn ebd_distribution(tree: &RootedTree) -> LeafDistribution {
    let mut mass = vec![0.0; tree.node_count()];
    mass[tree.root().index()] = 1.0;
    let mut out = LeafDistribution::new();
    for v in tree.preorder() {
        let m = mass[v.index()];
        let kids = tree.children(v);
        if kids.is_empty() {
            out.insert(v, m);
            continue;
        }
        let total: f64 = kids.iter().map(|&c| tree.branch_length(c)).sum();
        for &c in kids {
            mass[c.index()] = m * tree.branch_length(c) / total;
        }
    }
    out
}
