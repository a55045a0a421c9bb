//! Seeded random instances shared by tests and benchmarks.
//!
//! Transition rows use sparse supports with weights bounded away from zero,
//! so the exact positivity tests and the numeric divergence probes agree on
//! every generated game.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hypergraph::{Hyperarc, Hypergraph};
use crate::model::{GameModel, MaxAction, MinAction, RiskSensitiveModel};
use crate::state_set::StateSet;

/// Two states; in state 1 the minimizer picks between staying put and moving
/// to the absorbing state 2. A minimal instance where one player can force a
/// set the other cannot.
pub fn stay_or_go() -> GameModel {
    GameModel::new(vec![
        vec![
            MinAction::new("stay", vec![MaxAction::new("b", 0.0, vec![1.0, 0.0])]),
            MinAction::new("go", vec![MaxAction::new("b", 0.0, vec![0.0, 1.0])]),
        ],
        vec![MinAction::new(
            "loop",
            vec![MaxAction::new("b", 0.0, vec![0.0, 1.0])],
        )],
    ])
    .expect("fixed instance is valid")
}

/// Random finite game with exactly `a_count` minimizer actions and `b_count`
/// maximizer replies per state. Supports have 1..=3 states; weights are drawn
/// from [0.2, 1] and normalized, so every positive mass is at least ~0.04.
pub fn random_game(n: usize, a_count: usize, b_count: usize, seed: u64) -> GameModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..n)
        .map(|_| {
            (0..a_count)
                .map(|a| {
                    let replies = (0..b_count)
                        .map(|b| {
                            let support_size = rng.gen_range(1..=3.min(n));
                            let mut row = vec![0.0; n];
                            let mut chosen = 0;
                            while chosen < support_size {
                                let j = rng.gen_range(0..n);
                                if row[j] == 0.0 {
                                    row[j] = rng.gen_range(0.2..1.0);
                                    chosen += 1;
                                }
                            }
                            let sum: f64 = row.iter().sum();
                            for p in row.iter_mut() {
                                *p /= sum;
                            }
                            MaxAction::new(format!("b{b}"), rng.gen_range(-5.0..5.0), row)
                        })
                        .collect();
                    MinAction::new(format!("a{a}"), replies)
                })
                .collect()
        })
        .collect();
    GameModel::new(states).expect("generated game is valid")
}

/// Random strictly positive matrix with entries in [0.1, 10].
pub fn random_positive_matrix(n: usize, seed: u64) -> RiskSensitiveModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(0.1..10.0)).collect())
        .collect();
    RiskSensitiveModel::new(matrix).expect("positive matrix is valid")
}

/// Random hypergraph with general (possibly non-singleton) heads.
pub fn random_hypergraph(n: usize, max_arcs: usize, seed: u64) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arc_count = rng.gen_range(0..=max_arcs);
    let arcs = (0..arc_count)
        .filter_map(|_| {
            let tail = random_subset(n, &mut rng)?;
            let head = random_subset(n, &mut rng)?;
            Some(Hyperarc::new(tail, head).unwrap())
        })
        .collect();
    Hypergraph::new(n, arcs).expect("generated arcs are in range")
}

/// Random hypergraph whose heads are all singletons, as produced by the
/// divergence-pair builders.
pub fn random_singleton_head_hypergraph(n: usize, max_arcs: usize, seed: u64) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arc_count = rng.gen_range(0..=max_arcs);
    let arcs = (0..arc_count)
        .filter_map(|_| {
            let tail = random_subset(n, &mut rng)?;
            let head = rng.gen_range(1..=n as u32);
            Some(Hyperarc::new(tail, StateSet::singleton(head)).unwrap())
        })
        .collect();
    Hypergraph::new(n, arcs).expect("generated arcs are in range")
}

fn random_subset(n: usize, rng: &mut ChaCha8Rng) -> Option<StateSet> {
    let members: Vec<u32> = (1..=n as u32).filter(|_| rng.gen_bool(0.4)).collect();
    if members.is_empty() {
        // Retry once with a forced single member to keep arc counts up.
        return Some(StateSet::singleton(rng.gen_range(1..=n as u32)));
    }
    Some(StateSet::new(members))
}

/// Reference reachability oracle: iterates the recursive definition (a node
/// is reachable if it is in the source, or heads an arc whose tail is fully
/// reachable) to a fixed point. Quadratic, independent of the counter-based
/// engine.
pub fn naive_reach(g: &Hypergraph, source: &StateSet) -> StateSet {
    let mut reached: Vec<bool> = vec![false; g.n()];
    for s in source.iter() {
        reached[(s - 1) as usize] = true;
    }
    loop {
        let mut changed = false;
        for arc in g.arcs() {
            if arc.tail().iter().all(|s| reached[(s - 1) as usize]) {
                for s in arc.head().iter() {
                    if !reached[(s - 1) as usize] {
                        reached[(s - 1) as usize] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    StateSet::new(
        reached
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| i as u32 + 1),
    )
}
