//! Exact expected capture times for biased depth-first Searcher policies.
//!
//! A policy fixes, at every branch node, a favored child and a bias `beta`:
//! with probability `beta` the favored branch is searched first regardless of
//! the signal, otherwise the signal is followed. For a Hider at leaf `v` the
//! Searcher loses `2 * mu(off-branch)` at each branch node on the path to `v`
//! where she enters the wrong branch first, which happens with probability
//! `(1 - beta) * q` when `v` is in the favored branch and
//! `beta + (1 - beta) * q` otherwise. Branch nodes off the path cost the same
//! under every policy and are already part of the branch lengths above them.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::solver::{LeafDistribution, SignalAccuracy, Solution};
use crate::tree::{NodeId, RootedTree};

pub const INDIFFERENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("policy has no rule for branch node {0:?}")]
    MissingRule(String),
    #[error("policy names {0:?}, which is not a branch node")]
    StrayRule(String),
    #[error("favored child {child:?} is not a child of {node:?}")]
    BadFavored { node: String, child: String },
    #[error("bias {beta} at {node:?} is outside [0, 1]")]
    BadBias { node: String, beta: f64 },
    #[error("{0:?} is not a leaf")]
    NotALeaf(String),
    #[error("hider distribution is invalid: {0}")]
    BadDistribution(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchRule {
    pub favored: NodeId,
    pub beta: f64,
}

/// Searcher mixed strategy: one [`BranchRule`] per branch node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearcherPolicy {
    rules: BTreeMap<NodeId, BranchRule>,
}

impl SearcherPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// The optimal policy carried by a solution.
    pub fn from_solution(solution: &Solution) -> Self {
        let rules = solution
            .branches()
            .map(|(v, b)| (v, BranchRule { favored: b.favored.child, beta: b.beta }))
            .collect();
        Self { rules }
    }

    /// Every branch node favors its first child with bias `beta`. Handy for
    /// degenerate policies such as "always follow" (`beta = 0`).
    pub fn uniform(tree: &RootedTree, beta: f64) -> Self {
        let rules = tree
            .branch_nodes()
            .into_iter()
            .map(|v| (v, BranchRule { favored: tree.children(v)[0], beta }))
            .collect();
        Self { rules }
    }

    pub fn set(&mut self, node: NodeId, favored: NodeId, beta: f64) -> &mut Self {
        self.rules.insert(node, BranchRule { favored, beta });
        self
    }

    pub fn rule(&self, node: NodeId) -> Option<&BranchRule> {
        self.rules.get(&node)
    }

    pub fn rules(&self) -> impl Iterator<Item = (NodeId, &BranchRule)> {
        self.rules.iter().map(|(k, v)| (*k, v))
    }

    /// Checks the policy against a normalized tree.
    pub fn validate(&self, tree: &RootedTree) -> Result<(), EvalError> {
        let branch = tree.branch_nodes();
        for &v in &branch {
            let rule = self.rules.get(&v).ok_or_else(|| EvalError::MissingRule(tree.name(v).into()))?;
            if !tree.children(v).contains(&rule.favored) {
                return Err(EvalError::BadFavored {
                    node: tree.name(v).into(),
                    child: name_or_index(tree, rule.favored),
                });
            }
            if !(0.0..=1.0).contains(&rule.beta) {
                return Err(EvalError::BadBias { node: tree.name(v).into(), beta: rule.beta });
            }
        }
        if let Some(stray) = self.rules.keys().find(|k| !branch.contains(k)) {
            return Err(EvalError::StrayRule(name_or_index(tree, *stray)));
        }
        Ok(())
    }
}

fn name_or_index(tree: &RootedTree, id: NodeId) -> String {
    if id.index() < tree.node_count() {
        tree.name(id).to_owned()
    } else {
        id.to_string()
    }
}

/// Expected time for `policy` to reach a Hider at `leaf`.
pub fn expected_capture_time(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    leaf: NodeId,
    acc: SignalAccuracy,
) -> Result<f64, EvalError> {
    policy.validate(tree)?;
    if !tree.is_leaf(leaf) {
        return Err(EvalError::NotALeaf(tree.name(leaf).into()));
    }
    Ok(capture_time_unchecked(tree, policy, leaf, acc))
}

fn capture_time_unchecked(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    leaf: NodeId,
    acc: SignalAccuracy,
) -> f64 {
    let q = acc.q();
    let mut time = tree.depth(leaf);
    let mut below = leaf;
    while let Some(up) = tree.parent(below) {
        if let &[a, b] = tree.children(up) {
            let rule = policy.rules[&up];
            let off = if a == below { b } else { a };
            let wrong = if rule.favored == below {
                (1.0 - rule.beta) * q
            } else {
                rule.beta + (1.0 - rule.beta) * q
            };
            time += wrong * 2.0 * tree.branch_length(off);
        }
        below = up;
    }
    time
}

/// Expected capture time for every leaf, in preorder.
pub fn leaf_times(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    acc: SignalAccuracy,
) -> Result<Vec<(NodeId, f64)>, EvalError> {
    policy.validate(tree)?;
    Ok(tree.leaves().map(|l| (l, capture_time_unchecked(tree, policy, l, acc))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    pub leaf: NodeId,
    pub time: f64,
}

/// The Hider's best pure reply. Ties go to the lexicographically first leaf name.
pub fn hider_best_response(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    acc: SignalAccuracy,
) -> Result<BestResponse, EvalError> {
    let times = leaf_times(tree, policy, acc)?;
    let best = times
        .into_iter()
        .max_by(|(la, ta), (lb, tb)| ta.total_cmp(tb).then_with(|| tree.name(*lb).cmp(tree.name(*la))))
        .expect("a tree has at least one leaf");
    Ok(BestResponse { leaf: best.0, time: best.1 })
}

/// Checks that `lambda` is a probability distribution over leaves of `tree`.
pub fn validate_distribution(tree: &RootedTree, lambda: &LeafDistribution) -> Result<(), EvalError> {
    let bad = |m: String| Err(EvalError::BadDistribution(m));
    let mut total = 0.0;
    for (&leaf, &x) in lambda {
        if leaf.index() >= tree.node_count() || !tree.is_leaf(leaf) {
            return bad(format!("{} is not a leaf", name_or_index(tree, leaf)));
        }
        if !(x.is_finite() && x >= 0.0) {
            return bad(format!("probability {x} at {}", tree.name(leaf)));
        }
        total += x;
    }
    if (total - 1.0).abs() > 1e-9 {
        return bad(format!("probabilities sum to {total}"));
    }
    Ok(())
}

/// Expected capture time when the Hider mixes according to `lambda`.
pub fn hider_expected_time(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    lambda: &LeafDistribution,
    acc: SignalAccuracy,
) -> Result<f64, EvalError> {
    policy.validate(tree)?;
    validate_distribution(tree, lambda)?;
    Ok(lambda
        .iter()
        .map(|(&leaf, &x)| x * capture_time_unchecked(tree, policy, leaf, acc))
        .sum())
}

/// Searcher pure rules at a single branch node, indexed as in the payoff table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeColumn {
    /// `[1,1]`: favored branch first whatever the signal.
    Favored,
    /// `[2,2]`: other branch first whatever the signal.
    Other,
    /// `[1,2]`: search the signalled branch first.
    Follow,
    /// `[2,1]`: search the branch the signal points away from.
    Opposite,
}

impl NodeColumn {
    pub const ALL: [NodeColumn; 4] =
        [NodeColumn::Favored, NodeColumn::Other, NodeColumn::Follow, NodeColumn::Opposite];
}

/// 2x4 payoff matrix at one branch node; rows hide in the favored / other
/// branch (each played optimally), columns follow [`NodeColumn::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeMatrix {
    pub entries: [[f64; 4]; 2],
}

impl NodeMatrix {
    pub fn get(&self, row: usize, col: NodeColumn) -> f64 {
        self.entries[row][col as usize]
    }

    /// Opposite column minus follow column.
    pub fn opposite_excess(&self) -> [f64; 2] {
        [0, 1].map(|r| self.get(r, NodeColumn::Opposite) - self.get(r, NodeColumn::Follow))
    }

    /// Payoff of column `col` when the Hider picks row 0 with probability `x`.
    pub fn line(&self, col: NodeColumn, x: f64) -> f64 {
        x * self.get(0, col) + (1.0 - x) * self.get(1, col)
    }
}

pub fn node_matrix(mu1: f64, mu2: f64, v1: f64, v2: f64, acc: SignalAccuracy) -> NodeMatrix {
    let (p, q) = (acc.p(), acc.q());
    NodeMatrix {
        entries: [
            [v1, 2.0 * mu2 + v1, 2.0 * q * mu2 + v1, 2.0 * p * mu2 + v1],
            [2.0 * mu1 + v2, v2, 2.0 * q * mu1 + v2, 2.0 * p * mu1 + v2],
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// A leaf with positive Hider mass is not reached in expected time `V`.
    LeafTime { leaf: String, time: f64, value: f64 },
    /// The favored-branch mass of the Hider distribution disagrees with `x*`.
    MassRatio { node: String, x_star: f64, lambda_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndifferenceReport {
    pub value: f64,
    pub leaf_times: Vec<(String, f64)>,
    pub violations: Vec<Violation>,
}

impl IndifferenceReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks Hider indifference for the solution's own policy.
pub fn verify_indifference(
    tree: &RootedTree,
    solution: &Solution,
    acc: SignalAccuracy,
) -> Result<IndifferenceReport, EvalError> {
    verify_policy_indifference(tree, solution, &SearcherPolicy::from_solution(solution), acc)
}

/// Checks that every leaf in the support of `solution.lambda_bar` is reached
/// in expected time `solution.value` under `policy`, and that the Hider's
/// favored-branch mass at each branch node is `p*mu1 / (p*mu1 + q*mu2)`.
pub fn verify_policy_indifference(
    tree: &RootedTree,
    solution: &Solution,
    policy: &SearcherPolicy,
    acc: SignalAccuracy,
) -> Result<IndifferenceReport, EvalError> {
    let times = leaf_times(tree, policy, acc)?;
    let mut violations = Vec::new();
    for &(leaf, time) in &times {
        if solution.lambda(leaf) > 0.0 && (time - solution.value).abs() > INDIFFERENCE_TOL {
            violations.push(Violation::LeafTime {
                leaf: tree.name(leaf).into(),
                time,
                value: solution.value,
            });
        }
    }

    let (p, q) = (acc.p(), acc.q());
    let mut subtree_mass = vec![0.0; tree.node_count()];
    for (&leaf, &x) in &solution.lambda_bar {
        for v in tree.ancestors(leaf) {
            subtree_mass[v.index()] += x;
        }
    }
    for v in tree.branch_nodes() {
        let Some(choice) = solution.branch(v) else { continue };
        let total = subtree_mass[v.index()];
        if total <= 0.0 {
            continue;
        }
        let x_star = p * choice.favored.mu / (p * choice.favored.mu + q * choice.other.mu);
        let lambda_ratio = subtree_mass[choice.favored.child.index()] / total;
        if (x_star - lambda_ratio).abs() > INDIFFERENCE_TOL {
            violations.push(Violation::MassRatio { node: tree.name(v).into(), x_star, lambda_ratio });
        }
    }

    Ok(IndifferenceReport {
        value: solution.value,
        leaf_times: times.into_iter().map(|(l, t)| (tree.name(l).to_owned(), t)).collect(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::solver::solve;
    use crate::tree::fixtures::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const V_FIG1: f64 = 223.0 / 28.0;

    fn acc(p: f64) -> SignalAccuracy {
        SignalAccuracy::new(p).unwrap()
    }

    fn fig1_optimal() -> (RootedTree, Solution, SearcherPolicy) {
        let t = fig1();
        let s = solve(&t, acc(2.0 / 3.0)).unwrap();
        let policy = SearcherPolicy::from_solution(&s);
        (t, s, policy)
    }

    #[test]
    fn four_leaf_times() {
        let (t, _, policy) = fig1_optimal();
        let a = acc(2.0 / 3.0);
        let r = expected_capture_time(&t, &policy, t.id("R").unwrap(), a).unwrap();
        assert!((r - (4.0 + (111.0 / 112.0) * (1.0 / 3.0) * 12.0)).abs() < 1e-12);
        assert!((r - V_FIG1).abs() < 1e-12);
        let l2 = expected_capture_time(&t, &policy, t.id("L2").unwrap(), a).unwrap();
        assert!((l2 - (4.0 + (19.0 / 56.0) * 8.0 + (5.0 / 16.0) * 4.0)).abs() < 1e-12);
        assert!((l2 - V_FIG1).abs() < 1e-12);
    }

    #[test]
    fn single_arc_time_is_length() {
        let t = single_arc(7.0);
        let policy = SearcherPolicy::new();
        assert_eq!(expected_capture_time(&t, &policy, t.id("A").unwrap(), acc(0.9)).unwrap(), 7.0);
        let lambda = LeafDistribution::from([(t.id("A").unwrap(), 1.0)]);
        assert_eq!(hider_expected_time(&t, &policy, &lambda, acc(0.6)).unwrap(), 7.0);
    }

    #[test]
    fn best_responses() {
        let (t, s, policy) = fig1_optimal();
        let a = acc(2.0 / 3.0);
        let br = hider_best_response(&t, &policy, a).unwrap();
        assert!((br.time - V_FIG1).abs() < 1e-12);
        assert_eq!(t.name(br.leaf), "L1");

        let mut follow_at_root = policy.clone();
        let fav = s.branch(t.root()).unwrap().favored.child;
        follow_at_root.set(t.root(), fav, 0.0);
        let br = hider_best_response(&t, &follow_at_root, a).unwrap();
        assert!(br.time > V_FIG1 + 1e-3);
        assert_eq!(t.name(br.leaf), "R");

        let two = two_arc(3.0, 5.0);
        let mut long_first = SearcherPolicy::new();
        long_first.set(two.root(), two.id("B").unwrap(), 1.0);
        let br = hider_best_response(&two, &long_first, a).unwrap();
        assert_eq!(two.name(br.leaf), "A");
        assert_eq!(br.time, 13.0);
    }

    #[test]
    fn expected_time_under_lambda_bar() {
        let (t, s, policy) = fig1_optimal();
        let a = acc(2.0 / 3.0);
        let v = hider_expected_time(&t, &policy, &s.lambda_bar, a).unwrap();
        assert!((v - V_FIG1).abs() < 1e-12);
        let point = LeafDistribution::from([(t.id("L1").unwrap(), 1.0)]);
        assert!((hider_expected_time(&t, &policy, &point, a).unwrap() - V_FIG1).abs() < 1e-12);
    }

    #[test]
    fn policy_and_distribution_errors() {
        let (t, _, policy) = fig1_optimal();
        let a = acc(0.7);
        assert!(matches!(
            expected_capture_time(&t, &policy, t.id("A").unwrap(), a),
            Err(EvalError::NotALeaf(_))
        ));
        let mut partial = SearcherPolicy::new();
        partial.set(t.root(), t.id("R").unwrap(), 0.1);
        assert_eq!(
            expected_capture_time(&t, &partial, t.id("R").unwrap(), a),
            Err(EvalError::MissingRule("A".into()))
        );
        let mut wrong_child = policy.clone();
        wrong_child.set(t.root(), t.id("L1").unwrap(), 0.1);
        assert!(matches!(wrong_child.validate(&t), Err(EvalError::BadFavored { .. })));
        let mut bad_beta = policy.clone();
        bad_beta.set(t.root(), t.id("R").unwrap(), 1.5);
        assert!(matches!(bad_beta.validate(&t), Err(EvalError::BadBias { .. })));
        let mut stray = policy.clone();
        stray.set(t.id("R").unwrap(), t.id("R").unwrap(), 0.0);
        assert_eq!(stray.validate(&t), Err(EvalError::StrayRule("R".into())));

        let short = LeafDistribution::from([(t.id("L1").unwrap(), 0.5)]);
        assert!(matches!(
            hider_expected_time(&t, &policy, &short, a),
            Err(EvalError::BadDistribution(_))
        ));
        let on_internal = LeafDistribution::from([(t.id("A").unwrap(), 1.0)]);
        assert!(hider_expected_time(&t, &policy, &on_internal, a).is_err());
    }

    #[test]
    fn node_matrix_entries() {
        let m = node_matrix(5.0, 3.0, 5.0, 3.0, acc(2.0 / 3.0));
        let want = [[5.0, 11.0, 7.0, 9.0], [13.0, 3.0, 19.0 / 3.0, 29.0 / 3.0]];
        for (got, want) in m.entries.iter().flatten().zip(want.iter().flatten()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let m = node_matrix(5.0, 3.0, 5.0, 3.0, acc(1.0));
        assert_eq!(m.entries, [[5.0, 11.0, 5.0, 11.0], [13.0, 3.0, 3.0, 13.0]]);
    }

    #[test]
    fn indifference_reports() {
        let (t, s, policy) = fig1_optimal();
        let a = acc(2.0 / 3.0);
        let rep = verify_indifference(&t, &s, a).unwrap();
        assert!(rep.pass(), "{:?}", rep.violations);
        assert!(rep.leaf_times.iter().all(|(_, time)| (time - V_FIG1).abs() < 1e-12));

        let b3 = generate::perfect_binary_tree(3, 1.0 / 14.0);
        let s3 = solve(&b3, acc(0.9)).unwrap();
        assert!(verify_indifference(&b3, &s3, acc(0.9)).unwrap().pass());

        let mut perturbed = policy.clone();
        let rule = *perturbed.rule(t.root()).unwrap();
        perturbed.set(t.root(), rule.favored, rule.beta + 0.05);
        let rep = verify_policy_indifference(&t, &s, &perturbed, a).unwrap();
        assert!(!rep.pass());
        let named: Vec<&str> = rep
            .violations
            .iter()
            .filter_map(|v| match v {
                Violation::LeafTime { leaf, .. } => Some(leaf.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(named, ["L1", "L2", "R"]);
    }

    fn arb_case() -> impl Strategy<Value = (RootedTree, f64)> {
        (any::<u64>(), 1usize..9, 0.5001f64..=1.0).prop_map(|(seed, leaves, p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (generate::random_tree(&mut rng, leaves, 0.1..10.0), p)
        })
    }

    fn arb_policy(tree: &RootedTree, seed: u64) -> SearcherPolicy {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut policy = SearcherPolicy::new();
        for v in tree.branch_nodes() {
            let kids = tree.children(v);
            policy.set(v, kids[rng.random_range(0..2)], rng.random::<f64>());
        }
        policy
    }

    proptest! {
        #[test]
        fn optimal_policy_makes_hider_indifferent((t, p) in arb_case()) {
            let a = acc(p);
            let s = solve(&t, a).unwrap();
            let rep = verify_indifference(&t, &s, a).unwrap();
            prop_assert!(rep.pass(), "{:?}", rep.violations);
        }

        #[test]
        fn no_policy_beats_the_value((t, p) in arb_case(), seed in any::<u64>()) {
            let a = acc(p);
            let s = solve(&t, a).unwrap();
            let policy = arb_policy(&t, seed);
            let br = hider_best_response(&t, &policy, a).unwrap();
            prop_assert!(br.time >= s.value - 1e-12);
            let guaranteed = hider_expected_time(&t, &policy, &s.lambda_bar, a).unwrap();
            prop_assert!(guaranteed >= s.value - 1e-12);
        }

        #[test]
        fn node_matrix_geometry((t, p) in arb_case()) {
            let a = acc(p);
            let s = solve(&t, a).unwrap();
            for (_, c) in s.branches() {
                let (mu1, mu2) = (c.favored.mu, c.other.mu);
                let m = node_matrix(mu1, mu2, c.favored.value, c.other.value, a);
                let excess = m.opposite_excess();
                prop_assert!((excess[0] - 2.0 * mu2 * (2.0 * p - 1.0)).abs() < 1e-12 * (1.0 + mu2));
                prop_assert!((excess[1] - 2.0 * mu1 * (2.0 * p - 1.0)).abs() < 1e-12 * (1.0 + mu1));
                prop_assert!(excess[0] > 0.0 && excess[1] > 0.0);

                let slope = |col| m.get(0, col) - m.get(1, col);
                prop_assert!(slope(NodeColumn::Favored) < 0.0);
                prop_assert!(slope(NodeColumn::Other) > 0.0);
                let d_gap = (p - (1.0 - p)) * (c.favored.mean_depth - c.other.mean_depth);
                prop_assert!((slope(NodeColumn::Follow) - d_gap).abs() < 1e-9);

                let x_bar = mu1 / (mu1 + mu2);
                let gap = m.line(NodeColumn::Other, x_bar) - m.line(NodeColumn::Follow, x_bar);
                let want = 2.0 * mu1 * mu2 * (1.0 - 2.0 * a.q()) / (mu1 + mu2);
                prop_assert!((gap - want).abs() < 1e-9);
                prop_assert!(gap > 0.0);

                // optimal Hider mix equalizes [1,1] and follow at the value
                let x = c.favored_mass;
                let node_value = 2.0 * a.q() * (mu1 + mu2)
                    + (2.0 * p - 1.0) * (x * c.favored.mean_depth + (1.0 - x) * c.other.mean_depth);
                prop_assert!((m.line(NodeColumn::Favored, x) - node_value).abs() < 1e-9);
                prop_assert!((m.line(NodeColumn::Follow, x) - node_value).abs() < 1e-9);
            }
        }
    }
}
