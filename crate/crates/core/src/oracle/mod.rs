//! Brute-force check of the recursive solution.
//!
//! Every signal-contingent pure depth-first strategy is enumerated (four rules
//! per branch node), the exact expected capture time of each against each
//! leaf is tabulated, and the resulting zero-sum game is solved by linear
//! programming. Nothing here calls into the recursion except
//! [`cross_validate`], which compares the two.

mod simplex;

use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::evaluator::SearcherPolicy;
use crate::generate;
use crate::solver::{self, SignalAccuracy, SolveError};
use crate::tree::{NodeId, RootedTree};

pub use simplex::{bilinear, residual, solve_matrix_game, GameSolution, LpError};

/// Default limit on branch nodes (4^8 = 65536 columns).
pub const DEFAULT_CAP: usize = 8;
/// Agreement required between the LP value and the recursion.
pub const VALUE_TOL: f64 = 1e-9;
/// Agreement required between the LP Hider mix and the recursive one.
pub const MIX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("tree has {branch_nodes} branch nodes; the enumeration cap is {cap}")]
    CapExceeded { branch_nodes: usize, cap: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Pure rule at a branch node, relative to the canonical child order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    /// `[1,1]`: first child first, whatever the signal.
    First,
    /// `[2,2]`: second child first, whatever the signal.
    Second,
    /// `[1,2]`: the signalled child first.
    Follow,
    /// `[2,1]`: the child the signal points away from first.
    Opposite,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::First, Rule::Second, Rule::Follow, Rule::Opposite];

    /// Probability that a Hider below child `k` (0 or 1) sees the other child
    /// searched first.
    fn wrong_first(self, k: usize, acc: SignalAccuracy) -> f64 {
        match self {
            Rule::First => f64::from(u8::from(k == 1)),
            Rule::Second => f64::from(u8::from(k == 0)),
            Rule::Follow => acc.q(),
            Rule::Opposite => acc.p(),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Rule::First => "[1,1]",
            Rule::Second => "[2,2]",
            Rule::Follow => "follow",
            Rule::Opposite => "opposite",
        }
    }
}

/// One rule per branch node, aligned with [`RootedTree::branch_nodes`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PureStrategy {
    pub rules: Vec<Rule>,
}

impl PureStrategy {
    pub fn uses_opposite(&self) -> bool {
        self.rules.contains(&Rule::Opposite)
    }
}

impl fmt::Display for PureStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.rules.iter().map(|r| r.label()).collect();
        write!(f, "<{}>", labels.join(" "))
    }
}

fn check_cap(tree: &RootedTree, cap: usize) -> Result<usize, OracleError> {
    let b = tree.branch_nodes().len();
    if b > cap {
        return Err(OracleError::CapExceeded { branch_nodes: b, cap });
    }
    Ok(b)
}

/// All `4^b` pure strategies. The first branch node (in preorder) is the
/// most significant digit, rules ordered as [`Rule::ALL`].
pub fn enumerate_strategies(tree: &RootedTree, cap: usize) -> Result<Vec<PureStrategy>, OracleError> {
    let b = check_cap(tree, cap)?;
    let total = 1usize << (2 * b);
    Ok((0..total)
        .map(|code| PureStrategy {
            rules: (0..b).map(|i| Rule::ALL[(code >> (2 * (b - 1 - i))) & 3]).collect(),
        })
        .collect())
}

/// Position of each branch node in the strategy vectors.
struct BranchIndex(Vec<Option<usize>>);

impl BranchIndex {
    fn new(tree: &RootedTree) -> Self {
        let mut slots = vec![None; tree.node_count()];
        for (i, v) in tree.branch_nodes().into_iter().enumerate() {
            slots[v.index()] = Some(i);
        }
        BranchIndex(slots)
    }
}

/// Exact expected capture time of a pure strategy against a leaf: the leaf's
/// depth plus, at each branch node on its path, the probability of entering
/// the other branch first times twice that branch's length.
pub fn pure_payoff(tree: &RootedTree, strat: &PureStrategy, leaf: NodeId, acc: SignalAccuracy) -> f64 {
    payoff_indexed(tree, &BranchIndex::new(tree), strat, leaf, acc)
}

fn payoff_indexed(
    tree: &RootedTree,
    index: &BranchIndex,
    strat: &PureStrategy,
    leaf: NodeId,
    acc: SignalAccuracy,
) -> f64 {
    let mut time = tree.depth(leaf);
    let mut below = leaf;
    while let Some(up) = tree.parent(below) {
        if let (&[c0, c1], Some(slot)) = (tree.children(up), index.0[up.index()]) {
            let (k, off) = if below == c0 { (0, c1) } else { (1, c0) };
            time += strat.rules[slot].wrong_first(k, acc) * 2.0 * tree.branch_length(off);
        }
        below = up;
    }
    time
}

/// The full game: rows are leaves (Hider), columns pure strategies (Searcher).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    pub rows: Vec<NodeId>,
    pub columns: Vec<PureStrategy>,
    pub payoffs: Vec<Vec<f64>>,
}

impl MatrixGame {
    pub fn build(tree: &RootedTree, acc: SignalAccuracy, cap: usize) -> Result<Self, OracleError> {
        let columns = enumerate_strategies(tree, cap)?;
        let rows: Vec<NodeId> = tree.leaves().collect();
        let index = BranchIndex::new(tree);
        let payoffs = rows
            .iter()
            .map(|&leaf| columns.iter().map(|s| payoff_indexed(tree, &index, s, leaf, acc)).collect())
            .collect();
        Ok(MatrixGame { rows, columns, payoffs })
    }

    pub fn solve(&self) -> Result<GameSolution, LpError> {
        solve_matrix_game(&self.payoffs)
    }

    /// The same game restricted to columns that never use [`Rule::Opposite`].
    pub fn without_opposite(&self) -> MatrixGame {
        let keep: Vec<usize> = (0..self.columns.len()).filter(|&j| !self.columns[j].uses_opposite()).collect();
        MatrixGame {
            rows: self.rows.clone(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            payoffs: self.payoffs.iter().map(|row| keep.iter().map(|&j| row[j]).collect()).collect(),
        }
    }

    /// Column index of a strategy, given the enumeration order.
    fn column_of(strat: &PureStrategy) -> usize {
        strat.rules.iter().fold(0, |code, r| (code << 2) | Rule::ALL.iter().position(|x| x == r).unwrap())
    }

    /// True when every column using "opposite" somewhere is weakly dominated
    /// (for the minimizer) by the column that follows the signal instead.
    pub fn opposite_is_dominated(&self) -> bool {
        self.columns.iter().enumerate().filter(|(_, s)| s.uses_opposite()).all(|(j, s)| {
            let swapped = PureStrategy {
                rules: s.rules.iter().map(|&r| if r == Rule::Opposite { Rule::Follow } else { r }).collect(),
            };
            let k = Self::column_of(&swapped);
            self.payoffs.iter().all(|row| row[j] >= row[k] - 1e-12)
        })
    }

    /// Lower bound a Hider mix (indexed like `rows`) guarantees.
    pub fn guarantee(&self, row_mix: &[f64]) -> f64 {
        (0..self.columns.len())
            .map(|j| self.payoffs.iter().zip(row_mix).map(|(row, x)| row[j] * x).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Sufficient test that the Hider's optimal mix is unique. Any optimal
    /// Hider mix `x` pays exactly the value against every column in the
    /// support of `sol.col_mix` and puts no mass on rows that do worse than
    /// the value against it; if those equations plus `sum(x) = 1` have full
    /// rank, `x` is pinned down.
    pub fn row_mix_is_unique(&self, sol: &GameSolution) -> bool {
        let m = self.rows.len();
        let mut eqs = vec![vec![1.0; m]];
        for (j, &y) in sol.col_mix.iter().enumerate() {
            if y > 1e-9 {
                eqs.push(self.payoffs.iter().map(|row| row[j]).collect());
            }
        }
        for (i, row) in self.payoffs.iter().enumerate() {
            let against: f64 = row.iter().zip(&sol.col_mix).map(|(a, y)| a * y).sum();
            if against < sol.value - 1e-9 {
                eqs.push((0..m).map(|k| f64::from(u8::from(k == i))).collect());
            }
        }
        simplex::rank(eqs, 1e-9) == m
    }
}

/// Column mix induced by a behavioural Searcher policy: at every branch node
/// independently, the favored-first rule with probability `beta` and "follow"
/// otherwise.
pub fn policy_column_mix(tree: &RootedTree, policy: &SearcherPolicy, columns: &[PureStrategy]) -> Vec<f64> {
    let branch = tree.branch_nodes();
    columns
        .iter()
        .map(|s| {
            s.rules
                .iter()
                .zip(&branch)
                .map(|(&r, &v)| {
                    let rule = policy.rule(v).expect("policy covers every branch node");
                    let fixed = if tree.children(v)[0] == rule.favored { Rule::First } else { Rule::Second };
                    match r {
                        Rule::Follow => 1.0 - rule.beta,
                        r if r == fixed => rule.beta,
                        _ => 0.0,
                    }
                })
                .product()
        })
        .collect()
}

/// Summary emitted by the oracle for one tree and accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub tree_hash: String,
    pub p: f64,
    pub recursion_value: f64,
    pub lp_value: f64,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidation {
    pub report: OracleReport,
    /// LP value once every "opposite" column is deleted.
    pub reduced_lp_value: f64,
    pub opposite_dominated: bool,
    /// Worst case payoff the recursive Hider mix guarantees in the full game.
    pub lambda_guarantee: f64,
    pub row_mix_unique: bool,
    /// Largest gap between the LP and recursive Hider mixes (when unique).
    pub row_mix_deviation: Option<f64>,
    pub failures: Vec<String>,
}

/// Solves the full matrix game on a normalized tree and compares it with the
/// recursion.
pub fn cross_validate(tree: &RootedTree, acc: SignalAccuracy, cap: usize) -> Result<CrossValidation, OracleError> {
    let rec = solver::solve(tree, acc)?;
    let game = MatrixGame::build(tree, acc, cap)?;
    let sol = game.solve()?;
    let reduced = game.without_opposite().solve()?;
    let mut failures = Vec::new();

    if (sol.value - rec.value).abs() > VALUE_TOL {
        failures.push(format!("LP value {} differs from recursion value {}", sol.value, rec.value));
    }
    if sol.max_residual > VALUE_TOL {
        failures.push(format!("LP residual {} exceeds {VALUE_TOL}", sol.max_residual));
    }
    if (reduced.value - sol.value).abs() > VALUE_TOL {
        failures.push(format!("dropping opposite columns moves the value to {}", reduced.value));
    }
    let opposite_dominated = game.opposite_is_dominated();
    if !opposite_dominated {
        failures.push("some opposite column is not dominated by its follow twin".into());
    }
    let lambda: Vec<f64> = game.rows.iter().map(|&l| rec.lambda(l)).collect();
    let lambda_guarantee = game.guarantee(&lambda);
    if lambda_guarantee < sol.value - VALUE_TOL {
        failures.push(format!("recursive Hider mix only guarantees {lambda_guarantee}"));
    }
    let row_mix_unique = game.row_mix_is_unique(&sol);
    let row_mix_deviation = row_mix_unique.then(|| {
        sol.row_mix.iter().zip(&lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    });
    if let Some(dev) = row_mix_deviation.filter(|&d| d > MIX_TOL) {
        failures.push(format!("LP Hider mix deviates from the recursive one by {dev}"));
    }

    Ok(CrossValidation {
        report: OracleReport {
            tree_hash: tree.fingerprint(),
            p: acc.p(),
            recursion_value: rec.value,
            lp_value: sol.value,
            max_residual: sol.max_residual,
            pass: failures.is_empty(),
        },
        reduced_lp_value: reduced.value,
        opposite_dominated,
        lambda_guarantee,
        row_mix_unique,
        row_mix_deviation,
        failures,
    })
}

/// Settings for a batch of random cross-validations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomBatch {
    pub count: usize,
    pub max_leaves: usize,
    pub seed: u64,
    pub lengths: Range<f64>,
    pub cap: usize,
}

impl RandomBatch {
    pub fn new(count: usize, max_leaves: usize, seed: u64) -> Self {
        RandomBatch { count, max_leaves, seed, lengths: 0.1..10.0, cap: DEFAULT_CAP }
    }

    /// Draws `(tree, p)` cases: leaf count uniform in `1..=max_leaves`,
    /// arc lengths uniform in `lengths`, `p` uniform in `(1/2, 1)`. The RNG is
    /// ChaCha8 seeded with `seed`.
    pub fn cases(&self) -> Vec<(RootedTree, SignalAccuracy)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                let leaves = rng.random_range(1..=self.max_leaves.max(1));
                let tree = generate::random_tree(&mut rng, leaves, self.lengths.clone());
                let p = loop {
                    let p: f64 = rng.random_range(0.5..1.0);
                    if p > 0.5 {
                        break p;
                    }
                };
                (tree, SignalAccuracy::new(p).expect("p drawn inside (1/2, 1)"))
            })
            .collect()
    }

    pub fn run(&self) -> Result<Vec<CrossValidation>, OracleError> {
        self.cases().iter().map(|(t, acc)| cross_validate(t, *acc, self.cap)).collect()
    }
}
