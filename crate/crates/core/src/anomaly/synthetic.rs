//! Labeled synthetic benchmark for the anomaly pipeline.
//!
//! The graph mixes three normal populations with one planted anomaly
//! population:
//!
//! * eight planted blocks of core nodes (dense inside, sparse across),
//! * hub-and-spoke stars: a hub plus its private degree-one leaves,
//! * anomalies: star centers whose spokes reach into one core node of
//!   several *different* blocks.
//!
//! Hubs and anomalies are built as exact structural twins — same degree
//! range, same star-shaped closed ego-net — so the purely local features
//! (dispersion, cliqueness, starkness, weight ratio) cannot tell them
//! apart. What separates them is where their edges land: an anomaly's
//! spokes cross community borders, a hub's never do. Detecting the planted
//! anomalies therefore requires the membership features that a real cover
//! (plus auxiliary communities) provides, and the single-community
//! baseline measurably trails any decent detector on this graph.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, GraphBuilder};

const BLOCKS: usize = 8;
const CORE_PER_BLOCK: usize = 160;
const P_IN: f64 = 0.12;
const P_OUT: f64 = 0.0008;
const HUBS: usize = 96;
const LEAVES: usize = 662;
const ANOMALIES: usize = 250;

/// Builds the benchmark graph (undirected, unweighted, external ids
/// `"0".."2287"`) and its binary node labels: 2,038 normal nodes (cores,
/// hubs, leaves) followed by 250 anomalies, in node-index order.
/// Deterministic for a fixed seed.
pub fn synthetic_benchmark(seed: u64) -> (Graph, Vec<usize>) {
    let core = BLOCKS * CORE_PER_BLOCK;
    let n = core + HUBS + LEAVES + ANOMALIES;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new(false, false);
    for v in 0..n {
        b.node(&v.to_string());
    }

    // Planted blocks over the core nodes.
    for u in 0..core {
        for v in (u + 1)..core {
            let p = if u / CORE_PER_BLOCK == v / CORE_PER_BLOCK { P_IN } else { P_OUT };
            if rng.random::<f64>() < p {
                b.edge_idx(u as u32, v as u32, 1.0);
            }
        }
    }

    // Hub stars: leaf j hangs off hub j mod HUBS, so the first
    // LEAVES mod HUBS hubs get one leaf more than the rest.
    for j in 0..LEAVES {
        let hub = (core + j % HUBS) as u32;
        let leaf = (core + HUBS + j) as u32;
        b.edge_idx(hub, leaf, 1.0);
    }

    // Anomaly stars, degree-matched to the hubs: each picks that many
    // distinct blocks and points one spoke at a random core node of each.
    let mut blocks: Vec<usize> = (0..BLOCKS).collect();
    for a in 0..ANOMALIES {
        let v = (core + HUBS + LEAVES + a) as u32;
        let degree = LEAVES / HUBS + usize::from(a % HUBS < LEAVES % HUBS);
        blocks.shuffle(&mut rng);
        for &block in &blocks[..degree] {
            let target = block * CORE_PER_BLOCK + rng.random_range(0..CORE_PER_BLOCK);
            b.edge_idx(v, target as u32, 1.0);
        }
    }

    let mut labels = vec![0usize; core + HUBS + LEAVES];
    labels.extend(std::iter::repeat_n(1usize, ANOMALIES));
    (b.build(), labels)
}
