//! Synthetic review-site corpus shared by the acceptance tests.
//!
//! The generator builds a directed who-trusts-whom graph together with a
//! `user item rating` table, shaped like a product-review site dump. The
//! trust graph carries a planted block structure, and inside every block
//! the strength of a user's rating bias follows that user's closeness
//! within the block — so propensity weighting built on closeness can, in
//! principle, explain the ratings exactly, while degree or betweenness
//! weighting can only approximate them.
//!
//! Each block mixes three positional tiers so that closeness and degree
//! separate structurally instead of just statistically:
//!
//! * a fully connected core of 5 users (high degree, high closeness),
//! * 30 mid users wired to a couple of cores and a couple of peers
//!   (low degree, but still close to everything through the core),
//! * 5 outskirt users attached to a single mid in each direction
//!   (minimal degree, and a full extra hop away from the core).
//!
//! Normalized in-block closeness lands roughly at 1.0 / 0.7 / 0.5 for the
//! three tiers while normalized degree lands near 1.0 / 0.15 / 0.07, so a
//! rating signal proportional to closeness is badly misfit by any global
//! rescaling of degree.

use std::collections::HashSet;

use rand::Rng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const BLOCKS: usize = 50;
pub const BLOCK_SIZE: usize = 40;
pub const CORES: usize = 5;
pub const OUTSKIRTS: usize = 5;
pub const ITEMS_PER_BLOCK: usize = 60;

const INTER_ARCS: usize = 800;
const SIGNAL_GAIN: f64 = 1.1;
const NOISE_STD: f64 = 0.3;

/// A generated corpus, as file bodies ready to write to disk.
pub struct ReviewSite {
    /// Directed edge list, one `uA uB` arc per line.
    pub edge_list: String,
    /// Ratings table, one `uA iB value` triple per line.
    pub ratings: String,
}

/// Directed closeness of every node of one block's intra-block arc set:
/// with `r` nodes reachable from `v` (excluding `v`) at total hop
/// distance `D`, the score is `r^2 / ((n-1) * D)`, and 0 when nothing is
/// reachable.
fn block_closeness(n: usize, arcs: &HashSet<(usize, usize)>) -> Vec<f64> {
    let mut out = vec![Vec::new(); n];
    for &(u, v) in arcs {
        out[u].push(v);
    }
    let mut scores = vec![0.0f64; n];
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[s] = 0;
        queue.push_back(s);
        let (mut reached, mut total) = (0u64, 0u64);
        while let Some(v) = queue.pop_front() {
            for &w in &out[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    reached += 1;
                    total += dist[w] as u64;
                    queue.push_back(w);
                }
            }
        }
        if total > 0 {
            scores[s] = (reached * reached) as f64 / ((n as u64 - 1) * total) as f64;
        }
    }
    scores
}

fn sample_normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generates the corpus. Deterministic for a fixed seed.
pub fn review_site(seed: u64) -> ReviewSite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_users = BLOCKS * BLOCK_SIZE;
    let block_of: Vec<usize> = (0..n_users).map(|u| u / BLOCK_SIZE).collect();

    // --- trust arcs ---------------------------------------------------
    let mut edge_list = String::new();
    let mut alpha = vec![0.0f64; n_users];
    let mids = CORES..BLOCK_SIZE - OUTSKIRTS;
    for b in 0..BLOCKS {
        let base = b * BLOCK_SIZE;
        let mut arcs: HashSet<(usize, usize)> = HashSet::new();
        for i in 0..CORES {
            for j in 0..CORES {
                if i != j {
                    arcs.insert((i, j));
                }
            }
        }
        for u in mids.clone() {
            // two cores the user trusts, one core trusting back
            let mut cores: Vec<usize> = (0..CORES).collect();
            cores.shuffle(&mut rng);
            arcs.insert((u, cores[0]));
            arcs.insert((u, cores[1]));
            arcs.insert((cores[2], u));
            // a couple of peers, sometimes a third
            let n_peers = 2 + usize::from(rng.random::<f64>() < 0.5);
            for _ in 0..n_peers {
                loop {
                    let v = rng.random_range(mids.clone());
                    if v != u {
                        arcs.insert((u, v));
                        break;
                    }
                }
            }
        }
        for u in BLOCK_SIZE - OUTSKIRTS..BLOCK_SIZE {
            let via = rng.random_range(mids.clone());
            let back = rng.random_range(mids.clone());
            arcs.insert((u, via));
            arcs.insert((back, u));
        }

        let mut sorted: Vec<(usize, usize)> = arcs.iter().copied().collect();
        sorted.sort_unstable();
        for &(u, v) in &sorted {
            edge_list.push_str(&format!("u{} u{}\n", base + u, base + v));
        }

        let closeness = block_closeness(BLOCK_SIZE, &arcs);
        let max = closeness.iter().copied().fold(0.0f64, f64::max);
        for (local, &c) in closeness.iter().enumerate() {
            alpha[base + local] = if max > 0.0 { c / max } else { 0.0 };
        }
    }
    let mut placed = 0usize;
    while placed < INTER_ARCS {
        let u = rng.random_range(0..n_users);
        let v = rng.random_range(0..n_users);
        if block_of[u] == block_of[v] {
            continue;
        }
        edge_list.push_str(&format!("u{u} u{v}\n"));
        placed += 1;
    }

    // --- item catalogue ------------------------------------------------
    let n_items = BLOCKS * ITEMS_PER_BLOCK;
    let mut item_mean = vec![0.0f64; n_items];
    let mut item_taste = vec![0.0f64; n_items];
    for i in 0..n_items {
        item_mean[i] = rng.random_range(2.3..3.7);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        item_taste[i] = sign * rng.random_range(0.5..1.2);
    }

    // --- ratings --------------------------------------------------------
    let mut ratings = String::new();
    for u in 0..n_users {
        let b = block_of[u];
        let own_base = b * ITEMS_PER_BLOCK;
        let n_own = 32 + u % 7;
        let mut pool: Vec<usize> = (0..ITEMS_PER_BLOCK).collect();
        pool.shuffle(&mut rng);
        for &j in pool.iter().take(n_own) {
            let item = own_base + j;
            let value = item_mean[item]
                + SIGNAL_GAIN * alpha[u] * item_taste[item]
                + sample_normal(&mut rng, NOISE_STD);
            ratings.push_str(&format!("u{u} i{item} {:.4}\n", value.clamp(1.0, 5.0)));
        }
        let n_foreign = 5 + u % 3;
        let mut seen: HashSet<usize> = HashSet::new();
        while seen.len() < n_foreign {
            let item = rng.random_range(0..n_items);
            if item / ITEMS_PER_BLOCK == b || !seen.insert(item) {
                continue;
            }
            let value = item_mean[item] + sample_normal(&mut rng, NOISE_STD);
            ratings.push_str(&format!("u{u} i{item} {:.4}\n", value.clamp(1.0, 5.0)));
        }
    }

    ReviewSite { edge_list, ratings }
}
