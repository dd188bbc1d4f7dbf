use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use sigsearch::evaluator::{hider_expected_time, verify_indifference};
use sigsearch::oracle::{cross_validate, CrossValidation, OracleReport, RandomBatch};
use sigsearch::report::SolutionReport;
use sigsearch::simulator::{monte_carlo_logged, monte_carlo_value, write_play_log_line, McEstimate};
use sigsearch::solver::parse_ratio;
use sigsearch::tables::{bn_table, sweep, PGrid, Table};
use sigsearch::{parse_tree, solve, RootedTree, SearcherPolicy, SignalAccuracy};

use crate::output::{emit, json_text, num, rounded_json, table_json, Format, Sheet};
use crate::{Command, Outcome, OutputArgs};

pub fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Solve { tree, p, output } => cmd_solve(&tree, &p, &output),
        Command::Oracle { tree: Some(tree), p: Some(p), cap, output, .. } => cmd_oracle_tree(&tree, &p, cap, &output),
        Command::Oracle { random: Some(count), max_leaves, seed, cap, output, .. } => {
            cmd_oracle_random(count, max_leaves, seed, cap, &output)
        }
        Command::Oracle { .. } => bail!("oracle needs --tree with --p, or --random"),
        Command::Sweep { tree, start, stop, step, output } => cmd_sweep(&tree, &start, &stop, &step, &output),
        Command::BnTable { n_max, p, scale, output } => cmd_bn_table(n_max, &p, &scale, &output),
        Command::Simulate { tree, p, n, seed, policy, play_log, output } => {
            cmd_simulate(&tree, &p, n, seed, policy.as_deref(), play_log.as_deref(), &output)
        }
    }
}

/// Reads, validates and binarizes a tree file.
fn load_tree(path: &Path) -> Result<RootedTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let tree = parse_tree(&text).with_context(|| format!("in tree file {}", path.display()))?;
    Ok(tree.normalize())
}

fn accuracy(p: &str) -> Result<SignalAccuracy> {
    p.parse().with_context(|| format!("bad --p {p:?}"))
}

fn number(flag: &str, s: &str) -> Result<f64> {
    parse_ratio(s).with_context(|| format!("bad --{flag} {s:?}"))
}

fn write(text: &str, output: &OutputArgs) -> Result<()> {
    emit(text, output.out.as_deref())
}

fn cmd_solve(path: &Path, p: &str, output: &OutputArgs) -> Result<Outcome> {
    let tree = load_tree(path)?;
    let acc = accuracy(p)?;
    let solution = solve(&tree, acc)?;
    let report = SolutionReport::new(&tree, &solution);

    let check = verify_indifference(&tree, &solution, acc)?;
    let outcome = if check.pass() {
        Outcome::Ok
    } else {
        for v in &check.violations {
            eprintln!("indifference check failed: {v:?}");
        }
        Outcome::VerificationFailed
    };

    let text = match output.format.unwrap_or(Format::Text) {
        Format::Json => json_text(&rounded_json(&report)?)?,
        Format::Csv => {
            let mut sheet = Sheet::new(["quantity", "node", "favored", "value"]);
            sheet.push(["V", "", "", &num(report.value)]);
            sheet.push(["D", "", "", &num(report.mean_depth)]);
            sheet.push(["mu", "", "", &num(report.mu)]);
            for l in &report.lambda_bar {
                sheet.push(["lambda", &l.leaf, "", &num(l.mass)]);
            }
            for b in &report.branches {
                sheet.push(["beta", &b.node, &b.favored, &num(b.beta)]);
            }
            sheet.csv()?
        }
        Format::Text => {
            let mut out = format!(
                "tree  {}\np     {}\nV     {}\nD     {}\nmu    {}\n\n",
                report.tree_hash,
                num(report.p),
                num(report.value),
                num(report.mean_depth),
                num(report.mu)
            );
            let mut leaves = Sheet::new(["leaf", "depth", "lambda"]);
            for l in &report.lambda_bar {
                leaves.push([l.leaf.clone(), num(l.depth), num(l.mass)]);
            }
            out.push_str(&leaves.text());
            if !report.branches.is_empty() {
                let mut nodes = Sheet::new(["node", "favored", "beta", "V", "D"]);
                for b in &report.branches {
                    nodes.push([b.node.clone(), b.favored.clone(), num(b.beta), num(b.value), num(b.mean_depth)]);
                }
                out.push('\n');
                out.push_str(&nodes.text());
            }
            out
        }
    };
    write(&text, output)?;
    Ok(outcome)
}

const ORACLE_COLUMNS: [&str; 6] = ["tree_hash", "p", "recursion_value", "lp_value", "max_residual", "pass"];

fn oracle_row(r: &OracleReport) -> [String; 6] {
    [
        r.tree_hash.clone(),
        num(r.p),
        num(r.recursion_value),
        num(r.lp_value),
        num(r.max_residual),
        r.pass.to_string(),
    ]
}

fn oracle_outcome(runs: &[CrossValidation]) -> Outcome {
    let mut outcome = Outcome::Ok;
    for run in runs.iter().filter(|r| !r.report.pass) {
        eprintln!("oracle mismatch on tree {}: {}", run.report.tree_hash, run.failures.join("; "));
        outcome = Outcome::VerificationFailed;
    }
    outcome
}

fn cmd_oracle_tree(path: &Path, p: &str, cap: usize, output: &OutputArgs) -> Result<Outcome> {
    let tree = load_tree(path)?;
    let run = cross_validate(&tree, accuracy(p)?, cap)?;
    let r = &run.report;
    let text = match output.format.unwrap_or(Format::Text) {
        Format::Json => json_text(&rounded_json(r)?)?,
        Format::Csv => {
            let mut sheet = Sheet::new(ORACLE_COLUMNS);
            sheet.push(oracle_row(r));
            sheet.csv()?
        }
        Format::Text => {
            let mut sheet = Sheet::new(["field", "value"]);
            for (k, v) in ORACLE_COLUMNS.iter().zip(oracle_row(r)) {
                sheet.push([k.to_string(), v]);
            }
            sheet.push(["reduced_lp_value".into(), num(run.reduced_lp_value)]);
            sheet.push(["opposite_dominated".into(), run.opposite_dominated.to_string()]);
            sheet.push(["lambda_guarantee".into(), num(run.lambda_guarantee)]);
            sheet.push(["row_mix_unique".into(), run.row_mix_unique.to_string()]);
            if let Some(d) = run.row_mix_deviation {
                sheet.push(["row_mix_deviation".into(), num(d)]);
            }
            sheet.text()
        }
    };
    write(&text, output)?;
    Ok(oracle_outcome(std::slice::from_ref(&run)))
}

#[derive(Serialize)]
struct BatchSummary<'a> {
    count: usize,
    max_leaves: usize,
    seed: u64,
    passed: usize,
    max_value_gap: f64,
    reports: Vec<&'a OracleReport>,
}

fn cmd_oracle_random(count: usize, max_leaves: usize, seed: u64, cap: usize, output: &OutputArgs) -> Result<Outcome> {
    ensure!(count >= 1, "--random needs at least one tree");
    ensure!(max_leaves >= 1, "--max-leaves must be at least 1");
    let batch = RandomBatch { cap, ..RandomBatch::new(count, max_leaves, seed) };
    let runs = batch.run()?;
    let summary = BatchSummary {
        count,
        max_leaves,
        seed,
        passed: runs.iter().filter(|r| r.report.pass).count(),
        max_value_gap: runs
            .iter()
            .map(|r| (r.report.lp_value - r.report.recursion_value).abs())
            .fold(0.0, f64::max),
        reports: runs.iter().map(|r| &r.report).collect(),
    };
    let text = match output.format.unwrap_or(Format::Text) {
        Format::Json => json_text(&rounded_json(&summary)?)?,
        Format::Csv => {
            let mut sheet = Sheet::new(std::iter::once("case").chain(ORACLE_COLUMNS));
            for (i, r) in summary.reports.iter().enumerate() {
                sheet.push(std::iter::once(i.to_string()).chain(oracle_row(r)));
            }
            sheet.csv()?
        }
        Format::Text => format!(
            "{}/{} pass (seed {seed}, up to {max_leaves} leaves), max |LP - recursion| {}\n",
            summary.passed,
            summary.count,
            num(summary.max_value_gap)
        ),
    };
    write(&text, output)?;
    Ok(oracle_outcome(&runs))
}

fn emit_table(table: &Table, output: &OutputArgs) -> Result<()> {
    let text = match output.format.unwrap_or(Format::Csv) {
        Format::Csv => Sheet::from_table(table).csv()?,
        Format::Text => Sheet::from_table(table).text(),
        Format::Json => json_text(&table_json(table)?)?,
    };
    write(&text, output)
}

fn cmd_sweep(path: &Path, start: &str, stop: &str, step: &str, output: &OutputArgs) -> Result<Outcome> {
    let tree = load_tree(path)?;
    let grid = PGrid::new(number("start", start)?, number("stop", stop)?, number("step", step)?)?;
    emit_table(&sweep(&tree, &grid)?, output)?;
    Ok(Outcome::Ok)
}

fn cmd_bn_table(n_max: u32, p: &str, scale: &str, output: &OutputArgs) -> Result<Outcome> {
    ensure!((1..=20).contains(&n_max), "--n-max must be between 1 and 20");
    emit_table(&bn_table(n_max, accuracy(p)?, number("scale", scale)?)?, output)?;
    Ok(Outcome::Ok)
}

/// Searcher policy file: one rule per branch node, by name.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    rules: Vec<PolicyRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyRule {
    node: String,
    favored: String,
    beta: f64,
}

fn load_policy(path: &Path, tree: &RootedTree) -> Result<SearcherPolicy> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: PolicyFile = serde_json::from_str(&text).with_context(|| format!("in policy file {}", path.display()))?;
    let mut policy = SearcherPolicy::new();
    for rule in &file.rules {
        policy.set(tree.id(&rule.node)?, tree.id(&rule.favored)?, rule.beta);
    }
    policy.validate(tree)?;
    Ok(policy)
}

#[derive(Serialize)]
struct SimulationReport {
    #[serde(flatten)]
    estimate: McEstimate,
    exact: f64,
    z_score: f64,
}

fn cmd_simulate(
    path: &Path,
    p: &str,
    n: u64,
    seed: u64,
    policy_path: Option<&Path>,
    play_log: Option<&Path>,
    output: &OutputArgs,
) -> Result<Outcome> {
    ensure!(n >= 1, "--n must be at least 1");
    let tree = load_tree(path)?;
    let acc = accuracy(p)?;
    let solution = solve(&tree, acc)?;
    let policy = match policy_path {
        Some(path) => load_policy(path, &tree)?,
        None => SearcherPolicy::from_solution(&solution),
    };
    let lambda = &solution.lambda_bar;
    let exact = hider_expected_time(&tree, &policy, lambda, acc)?;

    let estimate = match play_log {
        None => monte_carlo_value(&tree, &policy, lambda, acc, n, seed)?,
        Some(log_path) => {
            let file = File::create(log_path).with_context(|| format!("creating {}", log_path.display()))?;
            let mut log = BufWriter::new(file);
            let mut failure = None;
            let estimate = monte_carlo_logged(&tree, &policy, lambda, acc, n, seed, &mut |record| {
                if failure.is_none() {
                    failure = write_play_log_line(&tree, &record, &mut log).err();
                }
            })?;
            if let Some(err) = failure {
                return Err(err).with_context(|| format!("writing {}", log_path.display()));
            }
            log.flush()?;
            estimate
        }
    };
    let report = SimulationReport { z_score: estimate.z_score(exact), estimate, exact };

    let text = match output.format.unwrap_or(Format::Text) {
        Format::Json => json_text(&rounded_json(&report)?)?,
        Format::Csv => {
            let mut sheet = Sheet::new(["n", "seed", "generator", "mean", "std_error", "exact", "z_score"]);
            let e = &report.estimate;
            sheet.push([
                e.n.to_string(),
                e.seed.to_string(),
                e.generator.to_string(),
                num(e.mean),
                num(e.std_error),
                num(report.exact),
                num(report.z_score),
            ]);
            sheet.csv()?
        }
        Format::Text => {
            let e = &report.estimate;
            format!(
                "plays      {}\nseed       {} ({}, {})\nestimate   {}\nstd_error  {}\nexact      {}\nz_score    {}\n",
                e.n,
                e.seed,
                e.generator,
                e.streams,
                num(e.mean),
                num(e.std_error),
                num(report.exact),
                num(report.z_score)
            )
        }
    };
    write(&text, output)?;
    Ok(Outcome::Ok)
}
