//! Tree families used by the tables, the oracle sweeps and the tests.

use std::ops::Range;

use rand::Rng;

use crate::tree::RootedTree;

/// The perfect binary tree `B_n`: `2^n` leaves, `2^(n+1) - 2` arcs, every arc
/// of length `arc_len`. Nodes are named `O` and `v` followed by the left/right
/// path bits, e.g. `v01`.
pub fn perfect_binary_tree(n: u32, arc_len: f64) -> RootedTree {
    assert!(n >= 1, "B_n needs n >= 1");
    let mut edges = Vec::new();
    let mut frontier = vec![String::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for path in &frontier {
            let parent = if path.is_empty() { "O".to_string() } else { format!("v{path}") };
            for bit in ['0', '1'] {
                let child = format!("{path}{bit}");
                edges.push((parent.clone(), format!("v{child}"), arc_len));
                next.push(child);
            }
        }
        frontier = next;
    }
    RootedTree::from_edges("O", edges.iter().map(|(a, b, l)| (a.as_str(), b.as_str(), *l)))
        .expect("perfect binary tree is valid")
}

/// A random binary tree with exactly `leaves` leaves and arc lengths drawn
/// uniformly from `lengths`. Grown by splitting a uniformly chosen leaf; with
/// probability 1/4 the root gets a single stem arc above the first split.
/// Node names are `O`, `n1`, `n2`, ...
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, leaves: usize, lengths: Range<f64>) -> RootedTree {
    assert!(leaves >= 1, "a tree needs a leaf");
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    let mut counter = 0usize;
    let mut fresh = || {
        counter += 1;
        format!("n{counter}")
    };

    let top = if leaves == 1 || rng.random_bool(0.25) {
        let stem = fresh();
        edges.push(("O".into(), stem.clone(), rng.random_range(lengths.clone())));
        stem
    } else {
        "O".to_string()
    };

    let mut open = vec![top];
    if leaves > 1 {
        while open.len() < leaves {
            let at = open.swap_remove(rng.random_range(0..open.len()));
            for _ in 0..2 {
                let child = fresh();
                edges.push((at.clone(), child.clone(), rng.random_range(lengths.clone())));
                open.push(child);
            }
        }
    }
    RootedTree::from_edges("O", edges.iter().map(|(a, b, l)| (a.as_str(), b.as_str(), *l)))
        .expect("generated tree is valid")
}
