//! Synthetic benchmark graphs with known community structure.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::communities::Cover;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};

/// Planted-partition graph: `k` blocks of `size` nodes each; every
/// intra-block pair is an edge with probability `p_in`, every inter-block
/// pair with probability `p_out`. Undirected, unweighted, external ids
/// `"0".."n-1"`. Returns the graph together with the ground-truth block
/// partition. Deterministic for a fixed seed.
pub fn planted_partition(
    k: usize,
    size: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Cover)> {
    if k == 0 || size == 0 {
        return Err(Error::validation("planted partition needs k >= 1 and size >= 1"));
    }
    if !(0.0..=1.0).contains(&p_out) || !(p_out..=1.0).contains(&p_in) {
        return Err(Error::validation(format!(
            "planted partition requires 0 <= p_out <= p_in <= 1, got p_in={p_in} p_out={p_out}"
        )));
    }
    let n = k
        .checked_mul(size)
        .filter(|&n| n <= u32::MAX as usize)
        .ok_or_else(|| Error::validation("planted partition size overflows node index"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new(false, false);
    for v in 0..n {
        b.node(&v.to_string());
    }
    let block = |v: usize| v / size;
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block(u) == block(v) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                b.edge_idx(u as u32, v as u32, 1.0);
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(block).collect();
    Ok((b.build(), Cover::from_partition(&labels)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let (g1, _) = planted_partition(3, 10, 0.8, 0.05, 7).unwrap();
        let (g2, _) = planted_partition(3, 10, 0.8, 0.05, 7).unwrap();
        assert_eq!(g1.content_hash(), g2.content_hash());
        let (g3, _) = planted_partition(3, 10, 0.8, 0.05, 8).unwrap();
        assert_ne!(g1.content_hash(), g3.content_hash());
    }

    #[test]
    fn blocks_match_ground_truth() {
        let (g, truth) = planted_partition(4, 25, 0.9, 0.01, 42).unwrap();
        assert_eq!(g.n(), 100);
        assert_eq!(truth.k(), 4);
        assert!(truth.is_partition());
        // dense intra-block wiring: each block is much denser than the cut
        let intra = g
            .edges()
            .filter(|&(u, v, _)| (u as usize / 25) == (v as usize / 25))
            .count();
        assert!(intra as f64 > 0.8 * g.m() as f64);
    }

    #[test]
    fn extreme_probabilities() {
        let (g, _) = planted_partition(2, 3, 1.0, 0.0, 1).unwrap();
        assert_eq!(g.m(), 6); // two disjoint triangles
        let (empty, truth) = planted_partition(2, 3, 0.0, 0.0, 1).unwrap();
        assert_eq!(empty.m(), 0);
        assert_eq!(truth.k(), 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(planted_partition(0, 5, 0.5, 0.1, 1).is_err());
        assert!(planted_partition(2, 5, 0.1, 0.5, 1).is_err()); // p_out > p_in
        assert!(planted_partition(2, 5, 1.5, 0.1, 1).is_err());
    }
}
