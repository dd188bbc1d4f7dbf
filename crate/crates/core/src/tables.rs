//! Parameter sweeps over `p` and the table for perfect binary trees.

use serde::Serialize;
use thiserror::Error;

use crate::generate::perfect_binary_tree;
use crate::solver::{solve, SignalAccuracy, SolveError};
use crate::tree::RootedTree;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("p grid needs 1/2 < start <= stop <= 1 and step > 0 (got {start}..{stop} step {step})")]
    BadGrid { start: f64, stop: f64, step: f64 },
    #[error("n_max must be at least 1")]
    NoRows,
    #[error("arc scale must be positive and finite (got {0})")]
    BadScale(f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Evenly spaced values of `p`. Points are computed from their index, and the
/// last one is snapped to `stop` when within half a step of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl PGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, TableError> {
        let ok = start > 0.5 && start <= stop && stop <= 1.0 && step > 0.0 && step.is_finite();
        if !ok {
            return Err(TableError::BadGrid { start, stop, step });
        }
        Ok(PGrid { start, stop, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let span = (self.stop - self.start) / self.step;
        let count = (span + 1e-9).floor() as usize + 1;
        let mut pts: Vec<f64> = (0..count).map(|i| self.start + i as f64 * self.step).collect();
        if let Some(last) = pts.last_mut() {
            if (self.stop - *last).abs() < 0.5 * self.step {
                *last = self.stop;
            }
        }
        pts
    }
}

/// One CSV-shaped table: a header and rows of numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Solves `tree` at every grid point. Columns: `p`, `V`, `D`, then
/// `beta:<node>` per branch node and `lambda:<leaf>` per leaf.
pub fn sweep(tree: &RootedTree, grid: &PGrid) -> Result<Table, TableError> {
    let branch_nodes = tree.branch_nodes();
    let leaves: Vec<_> = tree.leaves().collect();
    let mut header = vec!["p".to_owned(), "V".to_owned(), "D".to_owned()];
    header.extend(branch_nodes.iter().map(|&v| format!("beta:{}", tree.name(v))));
    header.extend(leaves.iter().map(|&l| format!("lambda:{}", tree.name(l))));

    let mut rows = Vec::new();
    for p in grid.points() {
        let s = solve(tree, SignalAccuracy::new(p)?)?;
        let mut row = vec![p, s.value, s.mean_depth];
        row.extend(branch_nodes.iter().map(|&v| s.branch(v).map_or(0.0, |b| b.beta)));
        row.extend(leaves.iter().map(|&l| s.lambda(l)));
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// `2q + (p - q) n / (2^(n+1) - 2)`: the value on `B_n` scaled to total length 1.
pub fn bn_value(n: u32, acc: SignalAccuracy) -> f64 {
    let arcs = 2f64.powi(n as i32 + 1) - 2.0;
    2.0 * acc.q() + (acc.p() - acc.q()) * n as f64 / arcs
}

/// Rows `n, mu, depth, V, V_solve` for `B_1..=B_n_max`. Every arc has length
/// `scale / (2^(n+1) - 2)`, so the total length is `scale`; `V` is the closed
/// form times `scale`, `V_solve` the recursion on the generated tree.
pub fn bn_table(n_max: u32, acc: SignalAccuracy, scale: f64) -> Result<Table, TableError> {
    if n_max == 0 {
        return Err(TableError::NoRows);
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(TableError::BadScale(scale));
    }
    let header = ["n", "mu", "depth", "V", "V_solve"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let arc = scale / (2f64.powi(n as i32 + 1) - 2.0);
        let tree = perfect_binary_tree(n, arc);
        let s = solve(&tree, acc)?;
        rows.push(vec![n as f64, tree.total_length(), n as f64 * arc, scale * bn_value(n, acc), s.value]);
    }
    Ok(Table { header, rows })
}
