//! Dense tableau simplex for two-player zero-sum matrix games.
//!
//! The row player maximizes and the column player minimizes. With all
//! payoffs shifted to be positive the column player's problem becomes
//!
//! ```text
//! maximize sum(w)  subject to  A w <= 1,  w >= 0
//! ```
//!
//! whose optimum is `1 / value`; `w * value` is the column mix and the duals,
//! scaled the same way, are the row mix. Once the simplex settles on a
//! basis, primal and dual values are recomputed from the basis matrix with
//! partial-pivot elimination so the reported mixes do not carry the
//! accumulated tableau round-off.

use serde::Serialize;
use thiserror::Error;

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-12;
/// Switch from Dantzig's rule to Bland's after this many degenerate pivots.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("payoff matrix is empty")]
    Empty,
    #[error("payoff matrix rows have different lengths")]
    Ragged,
    #[error("payoff matrix has a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("simplex did not converge after {0} pivots")]
    IterationLimit(usize),
}

/// Optimal strategies and value of a zero-sum game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSolution {
    pub value: f64,
    /// Maximizer (row) mixed strategy.
    pub row_mix: Vec<f64>,
    /// Minimizer (column) mixed strategy.
    pub col_mix: Vec<f64>,
    /// Largest violation of feasibility or of the saddle-point conditions.
    pub max_residual: f64,
}

/// Solves the zero-sum game with payoff matrix `payoffs[row][col]` paid by the
/// column player to the row player.
pub fn solve_matrix_game(payoffs: &[Vec<f64>]) -> Result<GameSolution, LpError> {
    let m = payoffs.len();
    let n = payoffs.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(LpError::Empty);
    }
    let mut lowest = f64::INFINITY;
    for (i, row) in payoffs.iter().enumerate() {
        if row.len() != n {
            return Err(LpError::Ragged);
        }
        for (j, &a) in row.iter().enumerate() {
            if !a.is_finite() {
                return Err(LpError::NonFinite(i, j));
            }
            lowest = lowest.min(a);
        }
    }
    let shift = if lowest > 0.0 { 0.0 } else { 1.0 - lowest };
    let a: Vec<Vec<f64>> =
        payoffs.iter().map(|row| row.iter().map(|&x| x + shift).collect()).collect();

    let basis = Tableau::new(&a).run()?;
    let (w, u) = basis_solve(&a, &basis).unwrap_or_else(|| Tableau::new(&a).readout(&basis));

    let mut col_mix: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
    let mut row_mix: Vec<f64> = u.iter().map(|&x| x.max(0.0)).collect();
    normalize(&mut col_mix);
    normalize(&mut row_mix);

    let value = bilinear(payoffs, &row_mix, &col_mix);
    let max_residual = residual(payoffs, &row_mix, &col_mix, value);
    Ok(GameSolution { value, row_mix, col_mix, max_residual })
}

/// Saddle-point residual of `(row_mix, col_mix)` at `value`: how far any pure
/// deviation improves on `value`, together with simplex-membership errors.
pub fn residual(payoffs: &[Vec<f64>], row_mix: &[f64], col_mix: &[f64], value: f64) -> f64 {
    let n = col_mix.len();
    let mut worst: f64 = 0.0;
    for row in payoffs {
        let row_payoff: f64 = row.iter().zip(col_mix).map(|(a, y)| a * y).sum();
        worst = worst.max(row_payoff - value);
    }
    for j in 0..n {
        let col_payoff: f64 = (0..payoffs.len()).map(|i| payoffs[i][j] * row_mix[i]).sum();
        worst = worst.max(value - col_payoff);
    }
    for &x in row_mix.iter().chain(col_mix) {
        worst = worst.max(-x);
    }
    worst = worst.max((row_mix.iter().sum::<f64>() - 1.0).abs());
    worst.max((col_mix.iter().sum::<f64>() - 1.0).abs())
}

pub fn bilinear(payoffs: &[Vec<f64>], row_mix: &[f64], col_mix: &[f64]) -> f64 {
    payoffs
        .iter()
        .zip(row_mix)
        .map(|(row, &x)| x * row.iter().zip(col_mix).map(|(a, y)| a * y).sum::<f64>())
        .sum()
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
}

struct Tableau {
    m: usize,
    n: usize,
    /// m rows of n structural + m slack coefficients, then the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs of the n + m columns.
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(a: &[Vec<f64>]) -> Self {
        let (m, n) = (a.len(), a[0].len());
        let rows = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = Vec::with_capacity(n + m + 1);
                r.extend_from_slice(row);
                r.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
                r.push(1.0);
                r
            })
            .collect();
        let mut cost = vec![1.0; n];
        cost.extend(std::iter::repeat_n(0.0, m));
        Tableau { m, n, rows, cost, basis: (n..n + m).collect() }
    }

    /// Pivots to optimality and returns the final basis.
    fn run(mut self) -> Result<Vec<usize>, LpError> {
        let limit = 50 * (self.n + self.m) + 1000;
        let mut streak = 0;
        for _ in 0..limit {
            let bland = streak >= DEGENERATE_STREAK;
            let Some(enter) = self.entering(bland) else {
                return Ok(self.basis);
            };
            let leave = self.leaving(enter).expect("A > 0 keeps the problem bounded");
            let rhs = self.rows[leave][self.n + self.m];
            streak = if rhs.abs() <= PIVOT_EPS { streak + 1 } else { 0 };
            self.pivot(leave, enter);
        }
        Err(LpError::IterationLimit(limit))
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, &c) in self.cost.iter().enumerate() {
            if c > COST_EPS {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((j, c));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, enter: usize) -> Option<usize> {
        let rhs = self.n + self.m;
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = row[enter];
            if a > PIVOT_EPS {
                let ratio = row[rhs] / a;
                let better = match best {
                    None => true,
                    Some((k, r)) => {
                        ratio < r - 1e-15 || (ratio <= r + 1e-15 && self.basis[i] < self.basis[k])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, leave: usize, enter: usize) {
        let width = self.n + self.m + 1;
        let pivot = self.rows[leave][enter];
        for x in self.rows[leave].iter_mut() {
            *x /= pivot;
        }
        let pivot_row = self.rows[leave].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            let factor = row[enter];
            if i != leave && factor != 0.0 {
                for k in 0..width {
                    row[k] -= factor * pivot_row[k];
                }
                row[enter] = 0.0;
            }
        }
        let factor = self.cost[enter];
        for (c, a) in self.cost.iter_mut().zip(&pivot_row) {
            *c -= factor * a;
        }
        self.cost[enter] = 0.0;
        self.basis[leave] = enter;
    }

    /// Primal `w` and dual `u` read straight off a tableau pivoted to `basis`.
    fn readout(mut self, basis: &[usize]) -> (Vec<f64>, Vec<f64>) {
        for (i, &b) in basis.iter().enumerate() {
            if self.basis[i] != b {
                let row = (0..self.m).find(|&r| self.rows[r][b].abs() > PIVOT_EPS).unwrap_or(i);
                self.pivot(row, b);
            }
        }
        let mut w = vec![0.0; self.n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                w[b] = self.rows[i][self.n + self.m];
            }
        }
        let u = (0..self.m).map(|k| -self.cost[self.n + k]).collect();
        (w, u)
    }
}

/// Recomputes `w` (from `B w_B = 1`) and `u` (from `B^T u = c_B`) for an
/// optimal basis. Returns `None` if the basis matrix is numerically singular.
fn basis_solve(a: &[Vec<f64>], basis: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let (m, n) = (a.len(), a[0].len());
    let column = |j: usize, i: usize| if j < n { a[i][j] } else if j - n == i { 1.0 } else { 0.0 };
    let b: Vec<Vec<f64>> = (0..m).map(|i| basis.iter().map(|&j| column(j, i)).collect()).collect();
    let bt: Vec<Vec<f64>> = (0..m).map(|k| (0..m).map(|i| b[i][k]).collect()).collect();

    let w_basic = gauss_solve(b, vec![1.0; m])?;
    let c_basis = basis.iter().map(|&j| if j < n { 1.0 } else { 0.0 }).collect();
    let u = gauss_solve(bt, c_basis)?;

    let mut w = vec![0.0; n];
    for (k, &j) in basis.iter().enumerate() {
        if j < n {
            w[j] = w_basic[k];
        }
    }
    Some((w, u))
}

/// Solves a square system by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub(crate) fn gauss_solve(mut mat: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let m = rhs.len();
    let scale = mat.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs())).max(1.0);
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs()))?;
        if mat[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..m {
            let f = mat[r][col] / mat[col][col];
            if f != 0.0 {
                for k in col..m {
                    mat[r][k] -= f * mat[col][k];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let tail: f64 = (r + 1..m).map(|k| mat[r][k] * x[k]).sum();
        x[r] = (rhs[r] - tail) / mat[r][r];
    }
    Some(x)
}

/// Numerical rank of a (possibly rectangular) matrix.
#[allow(clippy::needless_range_loop)]
pub(crate) fn rank(mut mat: Vec<Vec<f64>>, tol: f64) -> usize {
    let rows = mat.len();
    let cols = mat.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let piv = (rank..rows)
            .max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs()))
            .expect("rank < rows");
        if mat[piv][col].abs() <= tol {
            continue;
        }
        mat.swap(rank, piv);
        for r in rank + 1..rows {
            let f = mat[r][col] / mat[rank][col];
            for k in col..cols {
                mat[r][k] -= f * mat[rank][k];
            }
        }
        rank += 1;
    }
    rank
}
