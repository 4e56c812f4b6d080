//! Asynchronous label propagation.
//!
//! Every node starts with a unique label. Sweeps visit nodes in a fresh
//! seeded random order; a node adopts a majority label among its neighbors
//! (weighted by edge weight), keeping its current label whenever that label
//! is already among the maxima and otherwise breaking ties uniformly at
//! random. Propagation stops when a full sweep changes nothing or after
//! `max_iters` sweeps. Edgeless nodes keep their own label and end up as
//! singleton communities.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::communities::Cover;
use crate::graph::Graph;

/// Label propagation with a seeded visit order. Directed inputs are
/// symmetrized. `max_iters = 0` returns the all-singleton cover.
pub fn label_propagation(g: &Graph, seed: u64, max_iters: usize) -> Cover {
    let und = g.undirected();
    let n = und.n();
    let mut labels: Vec<usize> = (0..n).collect();
    if n == 0 {
        return Cover::from_partition(&labels);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut vote: Vec<f64> = vec![0.0; n];
    let mut seen: Vec<usize> = Vec::new();

    for _ in 0..max_iters {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &v in &order {
            let neigh = und.neighbors(v);
            if neigh.is_empty() {
                continue;
            }
            seen.clear();
            for e in neigh {
                let lab = labels[e.to as usize];
                if vote[lab] == 0.0 {
                    seen.push(lab);
                }
                vote[lab] += e.weight;
            }
            seen.sort_unstable();
            let best = seen.iter().map(|&l| vote[l]).fold(f64::MIN, f64::max);
            let current = labels[v as usize];
            let current_is_max = vote.get(current).copied().unwrap_or(0.0) == best
                && seen.binary_search(&current).is_ok();
            if !current_is_max {
                let winners: Vec<usize> =
                    seen.iter().copied().filter(|&l| vote[l] == best).collect();
                let pick = winners[rng.random_range(0..winners.len())];
                labels[v as usize] = pick;
                changed = true;
            }
            for &l in &seen {
                vote[l] = 0.0;
            }
        }
        if !changed {
            break;
        }
    }
    Cover::from_partition(&labels)
}
