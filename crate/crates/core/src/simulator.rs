//! Seeded play-outs of the search.
//!
//! A play walks the tree depth first from the root. On first arrival at a
//! branch node the Searcher tosses the bias coin (probability `beta`: favored
//! branch first); only if that fails is a signal drawn and followed. A signal
//! points at the Hider's branch with probability `p`; at branch nodes whose
//! subtree does not hold the Hider it is a fair coin. The play stops when the
//! Hider's leaf is reached.
//!
//! All randomness comes from a `ChaCha8Rng` seeded with a 64-bit seed and
//! consumed as a single stream in play order.

use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::evaluator::{validate_distribution, EvalError, SearcherPolicy};
use crate::solver::{LeafDistribution, SignalAccuracy};
use crate::tree::{NodeId, RootedTree};

pub const GENERATOR: &str = "ChaCha8Rng";
pub const STREAM_LAYOUT: &str = "single stream, plays in order";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot degrade a signal of accuracy {p} to {target}; need 1/2 < target <= p <= 1")]
    BadDegrade { p: f64, target: f64 },
    #[error("need at least one play")]
    NoPlays,
}

/// Which of the two branches at a node a signal points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    First,
    Second,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::First => 0,
            Side::Second => 1,
        }
    }

    fn from_index(k: usize) -> Self {
        if k == 0 {
            Side::First
        } else {
            Side::Second
        }
    }

    fn flip(self) -> Self {
        Self::from_index(1 - self.index())
    }

    fn coin<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_index(usize::from(rng.random_bool(0.5)))
    }
}

/// Mixing weight `x` with `x*p + (1 - x)/2 = target`.
///
/// Both accuracies are read as the shortest decimals that round-trip to
/// them, and `x = (2 target - 1) / (2 p - 1)` is evaluated on those integers
/// with a single final rounding, so `degrade_factor(0.9, 0.6)` is exactly
/// `0.25`.
pub fn degrade_factor(p: f64, target: f64) -> Result<f64, SimError> {
    if !(target > 0.5 && target <= p && p <= 1.0) {
        return Err(SimError::BadDegrade { p, target });
    }
    if let (Some((a, ka)), Some((b, kb))) = (shortest_decimal(target), shortest_decimal(p)) {
        let k = ka.max(kb);
        if let Some(ten_k) = 10i128.checked_pow(k) {
            let a = a * 10i128.pow(k - ka);
            let b = b * 10i128.pow(k - kb);
            return Ok((2 * a - ten_k) as f64 / (2 * b - ten_k) as f64);
        }
    }
    Ok((target - 0.5) / (p - 0.5))
}

/// `v` as `digits / 10^scale`, from its shortest round-trip representation.
fn shortest_decimal(v: f64) -> Option<(i128, u32)> {
    let text = v.to_string();
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let scale = u32::try_from(frac.len()).ok().filter(|&k| k <= 30)?;
    let digits = format!("{int}{frac}").parse().ok()?;
    Some((digits, scale))
}

/// Turns a signal of accuracy `p` into one of accuracy `target`: the raw
/// signal is kept with probability [`degrade_factor`], otherwise replaced by
/// a fair coin.
pub fn degrade_signal<R: Rng + ?Sized>(
    p: f64,
    target: f64,
    raw: Side,
    rng: &mut R,
) -> Result<Side, SimError> {
    let x = degrade_factor(p, target)?;
    Ok(if rng.random_bool(x) { raw } else { Side::coin(rng) })
}

/// What happened at one branch node during a play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeRecord {
    pub node: NodeId,
    /// Child the signal pointed to; `None` when the bias coin decided.
    pub signal: Option<NodeId>,
    pub used_bias: bool,
    pub chosen_first: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayRecord {
    pub hider_leaf: NodeId,
    /// Branch nodes in order of first arrival.
    pub decisions: Vec<NodeRecord>,
    pub capture_time: f64,
}

#[derive(Debug, Clone, Copy)]
enum Channel {
    Direct,
    /// Raw signal kept with probability `x`, else a fair coin.
    Degraded { x: f64 },
}

struct Play<'a, R: ?Sized> {
    tree: &'a RootedTree,
    policy: &'a SearcherPolicy,
    hider: NodeId,
    p: f64,
    channel: Channel,
    rng: &'a mut R,
    time: f64,
    log: Option<Vec<NodeRecord>>,
}

impl<R: Rng + ?Sized> Play<'_, R> {
    /// Searches the subtree at `v`; true once the Hider has been reached.
    fn visit(&mut self, v: NodeId) -> bool {
        if v == self.hider {
            return true;
        }
        let tree = self.tree;
        let order = match *tree.children(v) {
            [] => return false,
            [only] => [Some(only), None],
            [c0, c1] => {
                let first = self.choose(v, [c0, c1]);
                let second = if first == c0 { c1 } else { c0 };
                [Some(first), Some(second)]
            }
            _ => unreachable!("policy validation requires a normalized tree"),
        };
        for c in order.into_iter().flatten() {
            let arc = tree.arc_length(c);
            self.time += arc;
            if self.visit(c) {
                return true;
            }
            self.time += arc;
        }
        false
    }

    fn choose(&mut self, v: NodeId, kids: [NodeId; 2]) -> NodeId {
        let rule = self.policy.rule(v).expect("validated policy");
        let (first, signal, used_bias) = if self.rng.random_bool(rule.beta) {
            (rule.favored, None, true)
        } else {
            let truth = kids.iter().position(|&c| self.tree.is_below(self.hider, c)).map(Side::from_index);
            let raw = match truth {
                Some(side) if self.rng.random_bool(self.p) => side,
                Some(side) => side.flip(),
                None => Side::coin(self.rng),
            };
            let shown = match self.channel {
                Channel::Direct => raw,
                Channel::Degraded { x } => {
                    if self.rng.random_bool(x) {
                        raw
                    } else {
                        Side::coin(self.rng)
                    }
                }
            };
            let pointed = kids[shown.index()];
            (pointed, Some(pointed), false)
        };
        if let Some(log) = self.log.as_mut() {
            log.push(NodeRecord { node: v, signal, used_bias, chosen_first: first });
        }
        first
    }
}

fn play<R: Rng + ?Sized>(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    hider: NodeId,
    p: f64,
    channel: Channel,
    rng: &mut R,
    record: bool,
) -> (f64, Option<Vec<NodeRecord>>) {
    let mut run = Play { tree, policy, hider, p, channel, rng, time: 0.0, log: record.then(Vec::new) };
    let found = run.visit(tree.root());
    debug_assert!(found, "a depth-first tour reaches every leaf");
    (run.time, run.log)
}

/// One full play against a Hider at `hider_leaf`.
pub fn simulate_play<R: Rng + ?Sized>(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    hider_leaf: NodeId,
    acc: SignalAccuracy,
    rng: &mut R,
) -> Result<PlayRecord, SimError> {
    policy.validate(tree)?;
    if !tree.is_leaf(hider_leaf) {
        return Err(EvalError::NotALeaf(tree.name(hider_leaf).into()).into());
    }
    let (capture_time, log) = play(tree, policy, hider_leaf, acc.p(), Channel::Direct, rng, true);
    Ok(PlayRecord { hider_leaf, decisions: log.unwrap_or_default(), capture_time })
}

/// Monte Carlo estimate of an expected capture time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub n: u64,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero when `n == 1`.
    pub std_error: f64,
    pub seed: u64,
    pub generator: &'static str,
    pub streams: &'static str,
}

impl McEstimate {
    /// `(mean - exact) / std_error`, or zero when both agree exactly.
    pub fn z_score(&self, exact: f64) -> f64 {
        let diff = self.mean - exact;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

/// Running mean and variance (Welford).
#[derive(Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        }
    }
}

/// Plays `n` independent games with the Hider drawn from `lambda` each time.
/// `on_play`, when given, receives every play record in order.
#[allow(clippy::too_many_arguments)]
fn run_plays(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    lambda: &LeafDistribution,
    p: f64,
    channel: Channel,
    n: u64,
    seed: u64,
    mut on_play: Option<&mut dyn FnMut(PlayRecord)>,
) -> Result<McEstimate, SimError> {
    if n == 0 {
        return Err(SimError::NoPlays);
    }
    policy.validate(tree)?;
    validate_distribution(tree, lambda)?;
    let leaves: Vec<NodeId> = lambda.keys().copied().collect();
    let pick = WeightedIndex::new(lambda.values().copied())
        .map_err(|e| EvalError::BadDistribution(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moments = Moments::default();
    for _ in 0..n {
        let hider = leaves[pick.sample(&mut rng)];
        let (time, log) = play(tree, policy, hider, p, channel, &mut rng, on_play.is_some());
        moments.push(time);
        if let Some(sink) = on_play.as_mut() {
            sink(PlayRecord { hider_leaf: hider, decisions: log.unwrap_or_default(), capture_time: time });
        }
    }
    Ok(McEstimate {
        n,
        mean: moments.mean,
        std_error: moments.std_error(),
        seed,
        generator: GENERATOR,
        streams: STREAM_LAYOUT,
    })
}

pub fn monte_carlo_value(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    lambda: &LeafDistribution,
    acc: SignalAccuracy,
    n: u64,
    seed: u64,
) -> Result<McEstimate, SimError> {
    run_plays(tree, policy, lambda, acc.p(), Channel::Direct, n, seed, None)
}

/// Like [`monte_carlo_value`], passing every play to `on_play`. Uses the same
/// random stream, so the estimate is identical.
pub fn monte_carlo_logged(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    lambda: &LeafDistribution,
    acc: SignalAccuracy,
    n: u64,
    seed: u64,
    on_play: &mut dyn FnMut(PlayRecord),
) -> Result<McEstimate, SimError> {
    run_plays(tree, policy, lambda, acc.p(), Channel::Direct, n, seed, Some(on_play))
}

/// Plays in the game with accuracy `acc` while the Searcher degrades every
/// signal to accuracy `target` before using it.
pub fn monte_carlo_degraded(
    tree: &RootedTree,
    policy: &SearcherPolicy,
    lambda: &LeafDistribution,
    acc: SignalAccuracy,
    target: SignalAccuracy,
    n: u64,
    seed: u64,
) -> Result<McEstimate, SimError> {
    let x = degrade_factor(acc.p(), target.p())?;
    run_plays(tree, policy, lambda, acc.p(), Channel::Degraded { x }, n, seed, None)
}

#[derive(Serialize)]
struct LogDecision<'a> {
    node: &'a str,
    signal: Option<&'a str>,
    used_bias: bool,
    chosen_first: &'a str,
}

#[derive(Serialize)]
struct LogLine<'a> {
    hider_leaf: &'a str,
    decisions: Vec<LogDecision<'a>>,
    capture_time: f64,
}

/// Writes one play as a JSON line, with nodes named.
pub fn write_play_log_line<W: Write>(tree: &RootedTree, record: &PlayRecord, out: &mut W) -> io::Result<()> {
    let line = LogLine {
        hider_leaf: tree.name(record.hider_leaf),
        decisions: record
            .decisions
            .iter()
            .map(|d| LogDecision {
                node: tree.name(d.node),
                signal: d.signal.map(|s| tree.name(s)),
                used_bias: d.used_bias,
                chosen_first: tree.name(d.chosen_first),
            })
            .collect(),
        capture_time: record.capture_time,
    };
    serde_json::to_writer(&mut *out, &line)?;
    out.write_all(b"\n")
}
