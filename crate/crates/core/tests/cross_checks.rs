use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sigsearch::evaluator::{expected_capture_time, hider_best_response, hider_expected_time};
use sigsearch::generate::{perfect_binary_tree, random_tree};
use sigsearch::oracle::{cross_validate, DEFAULT_CAP};
use sigsearch::simulator::{monte_carlo_value, simulate_play};
use sigsearch::{solve, SearcherPolicy, SignalAccuracy};

fn acc(p: f64) -> SignalAccuracy {
    SignalAccuracy::new(p).unwrap()
}

#[test]
fn b2_monte_carlo_matches_closed_form() {
    let t = perfect_binary_tree(2, 1.0 / 6.0);
    let a: SignalAccuracy = "2/3".parse().unwrap();
    let s = solve(&t, a).unwrap();
    assert!((s.value - 7.0 / 9.0).abs() < 1e-12);
    let est = monte_carlo_value(&t, &SearcherPolicy::from_solution(&s), &s.lambda_bar, a, 300_000, 2).unwrap();
    assert!(est.z_score(7.0 / 9.0).abs() <= 3.0, "{est:?}");
}

#[test]
fn oracle_handles_the_largest_enumerable_tree() {
    let t = perfect_binary_tree(3, 1.0);
    let run = cross_validate(&t, acc(0.8), DEFAULT_CAP).unwrap();
    assert!(run.report.pass, "{:?}", run.failures);
    assert!(run.opposite_dominated);
    assert!((run.lambda_guarantee - run.report.recursion_value).abs() < 1e-9);
}

#[test]
fn oracle_on_five_leaf_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..10 {
        let t = random_tree(&mut rng, 5, 0.1..10.0);
        let p = rng.random_range(0.51..0.99);
        let run = cross_validate(&t, acc(p), DEFAULT_CAP).unwrap();
        assert!(run.report.pass, "{:?}", run.failures);
        assert!((run.reduced_lp_value - run.report.lp_value).abs() < 1e-9);
    }
}

/// Every play's capture time equals the leaf depth plus twice the length of
/// each branch searched in full before the Hider's branch.
#[test]
fn plays_are_depth_first_walks() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..30 {
        let leaves = rng.random_range(1..=7);
        let t = random_tree(&mut rng, leaves, 0.1..10.0);
        let a = acc(rng.random_range(0.51..1.0));
        let policy = SearcherPolicy::from_solution(&solve(&t, a).unwrap());
        let hiders: Vec<_> = t.leaves().collect();
        for &h in &hiders {
            let rec = simulate_play(&t, &policy, h, a, &mut rng).unwrap();
            let mut implied = t.depth(h);
            for d in &rec.decisions {
                if t.is_below(h, d.node) && !t.is_below(h, d.chosen_first) {
                    implied += 2.0 * t.branch_length(d.chosen_first);
                }
            }
            assert!((rec.capture_time - implied).abs() < 1e-9);
            let first_arrivals: Vec<_> = rec.decisions.iter().map(|d| d.node).collect();
            let mut dedup = first_arrivals.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), first_arrivals.len(), "signals are drawn once per node");
        }
    }
}

#[test]
fn any_fixed_policy_is_exploitable_above_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for _ in 0..50 {
        let leaves = rng.random_range(2..=8);
        let t = random_tree(&mut rng, leaves, 0.1..10.0);
        let a = acc(rng.random_range(0.51..1.0));
        let s = solve(&t, a).unwrap();
        for beta in [0.0, 0.25, 0.5, 1.0] {
            let policy = SearcherPolicy::uniform(&t, beta);
            let best = hider_best_response(&t, &policy, a).unwrap();
            assert!(best.time >= s.value - 1e-9);
            assert!(hider_expected_time(&t, &policy, &s.lambda_bar, a).unwrap() >= s.value - 1e-9);
            assert!((expected_capture_time(&t, &policy, best.leaf, a).unwrap() - best.time).abs() < 1e-12);
        }
    }
}
