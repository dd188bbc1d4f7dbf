//! Browser bindings: solve a tree, trace `V(p)` and tabulate `B_n`.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond `JSON.parse`. The `*_json` functions hold the logic and run natively
//! in tests; the `#[wasm_bindgen]` wrappers only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sigsearch::report::SolutionReport;
use sigsearch::tables::{bn_table, PGrid};
use sigsearch::{parse_tree, solve, RootedTree, SignalAccuracy};

const MAX_CURVE_POINTS: usize = 2000;
const MAX_BN: u32 = 16;

fn load(tree_json: &str) -> Result<RootedTree, String> {
    Ok(parse_tree(tree_json).map_err(|e| e.to_string())?.normalize())
}

fn accuracy(p: &str) -> Result<SignalAccuracy, String> {
    p.parse().map_err(|e: sigsearch::solver::SolveError| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn solve_json(tree_json: &str, p: &str) -> Result<String, String> {
    let tree = load(tree_json)?;
    let solution = solve(&tree, accuracy(p)?).map_err(|e| e.to_string())?;
    to_json(&SolutionReport::new(&tree, &solution))
}

#[derive(Serialize)]
struct Curve {
    mu: f64,
    p: Vec<f64>,
    value: Vec<f64>,
    mean_depth: Vec<f64>,
}

/// `V` and `D` at `points` evenly spaced values of `p` in `(1/2, 1]`.
pub fn value_curve_json(tree_json: &str, points: usize) -> Result<String, String> {
    if !(1..=MAX_CURVE_POINTS).contains(&points) {
        return Err(format!("points must be between 1 and {MAX_CURVE_POINTS}"));
    }
    let tree = load(tree_json)?;
    let step = 0.5 / points as f64;
    let grid = PGrid::new(0.5 + step, 1.0, step).map_err(|e| e.to_string())?;
    let mut curve = Curve { mu: tree.total_length(), p: Vec::new(), value: Vec::new(), mean_depth: Vec::new() };
    for p in grid.points() {
        let acc = SignalAccuracy::new(p).map_err(|e| e.to_string())?;
        let s = solve(&tree, acc).map_err(|e| e.to_string())?;
        curve.p.push(p);
        curve.value.push(s.value);
        curve.mean_depth.push(s.mean_depth);
    }
    to_json(&curve)
}

#[derive(Serialize)]
struct BnRow {
    n: u32,
    depth: f64,
    value: f64,
}

/// Values on `B_1 ..= B_n_max`, each scaled to total length 1.
pub fn bn_values_json(n_max: u32, p: &str) -> Result<String, String> {
    if !(1..=MAX_BN).contains(&n_max) {
        return Err(format!("n must be between 1 and {MAX_BN}"));
    }
    let table = bn_table(n_max, accuracy(p)?, 1.0).map_err(|e| e.to_string())?;
    let rows: Vec<BnRow> = table
        .rows
        .iter()
        .map(|r| BnRow { n: r[0] as u32, depth: r[2], value: r[4] })
        .collect();
    to_json(&rows)
}

#[wasm_bindgen]
pub fn solve_tree(tree_json: &str, p: &str) -> Result<String, JsError> {
    solve_json(tree_json, p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn value_curve(tree_json: &str, points: usize) -> Result<String, JsError> {
    value_curve_json(tree_json, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bn_values(n_max: u32, p: &str) -> Result<String, JsError> {
    bn_values_json(n_max, p).map_err(|e| JsError::new(&e))
}
