//! Name-keyed, serializable view of a [`Solution`].

use serde::Serialize;

use crate::solver::Solution;
use crate::tree::RootedTree;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafMass {
    pub leaf: String,
    pub depth: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub node: String,
    pub favored: String,
    pub other: String,
    pub beta: f64,
    /// Share of the node's Hider mass placed in the favored branch.
    pub favored_mass: f64,
    pub value: f64,
    pub mean_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub tree_hash: String,
    pub p: f64,
    pub value: f64,
    pub mean_depth: f64,
    pub mu: f64,
    pub lambda_bar: Vec<LeafMass>,
    pub branches: Vec<BranchReport>,
}

impl SolutionReport {
    pub fn new(tree: &RootedTree, solution: &Solution) -> Self {
        let lambda_bar = solution
            .lambda_bar
            .iter()
            .map(|(&leaf, &mass)| LeafMass { leaf: tree.name(leaf).to_owned(), depth: tree.depth(leaf), mass })
            .collect();
        let branches = solution
            .branches()
            .map(|(v, b)| {
                let node = solution.node(v);
                BranchReport {
                    node: tree.name(v).to_owned(),
                    favored: tree.name(b.favored.child).to_owned(),
                    other: tree.name(b.other.child).to_owned(),
                    beta: b.beta,
                    favored_mass: b.favored_mass,
                    value: node.value,
                    mean_depth: node.mean_depth,
                }
            })
            .collect();
        SolutionReport {
            tree_hash: tree.fingerprint(),
            p: solution.accuracy.p(),
            value: solution.value,
            mean_depth: solution.mean_depth,
            mu: solution.mu,
            lambda_bar,
            branches,
        }
    }

    pub fn beta(&self, node: &str) -> Option<f64> {
        self.branches.iter().find(|b| b.node == node).map(|b| b.beta)
    }

    pub fn mass(&self, leaf: &str) -> Option<f64> {
        self.lambda_bar.iter().find(|l| l.leaf == leaf).map(|l| l.mass)
    }
}
