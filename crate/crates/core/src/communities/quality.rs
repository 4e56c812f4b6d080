//! Cover quality functions: modularity for partitions, density per
//! community.

use crate::communities::{Cover, QualityKind, QualityScore};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Modularity of a partition: `(1/2m) * sum over ordered node pairs (u,v),
/// including u = v, of [A_uv - deg(u)deg(v)/(2m)] * X_uv`, where `X_uv` is 1
/// when u and v share a community. Self-adjacency `A_uu` is 0 (the
/// substrate drops self-loops) but the diagonal degree term is included.
/// Weighted graphs use edge weights for both `A` and degrees; directed
/// graphs are measured on their undirected view.
///
/// Errors: edgeless graph (2m = 0) and overlapping covers.
pub fn modularity(g: &Graph, cover: &Cover) -> Result<QualityScore> {
    if cover.n_nodes() != g.n() {
        return Err(Error::validation(format!(
            "cover is over {} nodes but the graph has {}",
            cover.n_nodes(),
            g.n()
        )));
    }
    if !cover.is_partition() {
        return Err(Error::validation(
            "modularity is defined for partitions only",
        ));
    }
    let und = g.undirected();
    let two_m = 2.0 * und.total_weight();
    if two_m == 0.0 {
        return Err(Error::validation("modularity is undefined on an edgeless graph"));
    }
    // Per-community form of the pair sum: sum_c [ w_in_c/2m - (vol_c/2m)^2 ]
    // where w_in_c counts ordered intra pairs (twice each undirected edge).
    let mut internal = vec![0.0f64; cover.k()];
    let mut volume = vec![0.0f64; cover.k()];
    for v in und.node_indices() {
        let c = cover.memberships(v)[0] as usize;
        volume[c] += und.weighted_degree(v);
        for e in und.neighbors(v) {
            if cover.memberships(e.to)[0] as usize == c {
                internal[c] += e.weight; // ordered pairs: each edge hit twice
            }
        }
    }
    let value: f64 = (0..cover.k())
        .map(|c| internal[c] / two_m - (volume[c] / two_m).powi(2))
        .sum();
    Ok(QualityScore { kind: QualityKind::Modularity, value })
}

/// Density of one community: `2 m_c / (n_c (n_c - 1))` with `m_c` the edge
/// count of the induced subgraph (undirected view, edge presence only).
/// Singleton communities score 0 by convention; an empty node list is an
/// error.
pub fn density(g: &Graph, community: &[u32]) -> Result<QualityScore> {
    let mut nodes: Vec<u32> = community.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() {
        return Err(Error::validation("density of an empty community is undefined"));
    }
    for &v in &nodes {
        if v as usize >= g.n() {
            return Err(Error::validation(format!("node {v} is outside the graph")));
        }
    }
    let n_c = nodes.len();
    if n_c == 1 {
        return Ok(QualityScore { kind: QualityKind::Density, value: 0.0 });
    }
    let und = g.undirected();
    let m_c = und.subgraph(&nodes).m();
    let value = 2.0 * m_c as f64 / (n_c as f64 * (n_c as f64 - 1.0));
    Ok(QualityScore { kind: QualityKind::Density, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{planted_partition, GraphBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_triangles() -> Graph {
        let mut b = GraphBuilder::new(false, false);
        for (u, v) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            b.edge(&u.to_string(), &v.to_string(), 1.0);
        }
        b.build()
    }

    #[test]
    fn two_disjoint_triangles_score_half() {
        let g = two_triangles();
        let cover = Cover::from_partition(&[0, 0, 0, 1, 1, 1]);
        let q = modularity(&g, &cover).unwrap();
        assert!((q.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singleton_partition_of_single_edge_is_minus_half() {
        let mut b = GraphBuilder::new(false, false);
        b.edge("a", "b", 1.0);
        let g = b.build();
        let q = modularity(&g, &Cover::from_partition(&[0, 1])).unwrap();
        assert!((q.value + 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_in_one_partition_scores_zero() {
        let g = two_triangles();
        let q = modularity(&g, &Cover::single_community(6)).unwrap();
        assert!(q.value.abs() < 1e-12);
    }

    #[test]
    fn modularity_rejects_edgeless_and_overlap() {
        let mut b = GraphBuilder::new(false, false);
        b.node("a");
        b.node("b");
        let g = b.build();
        assert!(modularity(&g, &Cover::from_partition(&[0, 1])).is_err());

        let g = two_triangles();
        let overlapping =
            Cover::from_memberships(vec![vec![0, 1], vec![0], vec![0], vec![1], vec![1], vec![1]]);
        assert!(modularity(&g, &overlapping).is_err());
    }

    /// Brute-force ordered-pair evaluation of the modularity formula,
    /// weights included; the fast path must agree to 1e-12.
    fn modularity_brute(g: &Graph, cover: &Cover) -> f64 {
        let und = g.undirected();
        let two_m = 2.0 * und.total_weight();
        let mut q = 0.0;
        for u in und.node_indices() {
            for v in und.node_indices() {
                if cover.memberships(u)[0] != cover.memberships(v)[0] {
                    continue;
                }
                let a_uv = if u == v { 0.0 } else { und.edge_weight(u, v).unwrap_or(0.0) };
                q += a_uv - und.weighted_degree(u) * und.weighted_degree(v) / two_m;
            }
        }
        q / two_m
    }

    #[test]
    fn matches_brute_force_on_random_weighted_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.random_range(2..=8);
            let mut b = GraphBuilder::new(false, true);
            for v in 0..n {
                b.node(&v.to_string());
            }
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.5 {
                        b.edge_idx(u as u32, v as u32, rng.random_range(0.5..3.0));
                    }
                }
            }
            let g = b.build();
            if g.m() == 0 {
                continue;
            }
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let cover = Cover::from_partition(&labels);
            let fast = modularity(&g, &cover).unwrap().value;
            let brute = modularity_brute(&g, &cover);
            assert!((fast - brute).abs() < 1e-12, "fast={fast} brute={brute}");
            assert!((-1.0..=1.0).contains(&fast));
        }
    }

    #[test]
    fn density_examples() {
        let g = two_triangles();
        // a triangle is fully dense
        assert_eq!(density(&g, &[0, 1, 2]).unwrap().value, 1.0);
        // singleton scores 0 by convention
        assert_eq!(density(&g, &[0]).unwrap().value, 0.0);
        // nodes 0,1,2,3: triangle plus an isolated member -> 3 edges of 6 pairs
        assert!((density(&g, &[0, 1, 2, 3]).unwrap().value - 0.5).abs() < 1e-12);
        assert!(density(&g, &[]).is_err());
    }

    #[test]
    fn density_counts_presence_not_weight() {
        let mut b = GraphBuilder::new(false, true);
        b.edge("a", "b", 7.5);
        let g = b.build();
        assert_eq!(density(&g, &[0, 1]).unwrap().value, 1.0);
    }

    #[test]
    fn planted_partition_truth_has_positive_modularity() {
        let (g, truth) = planted_partition(4, 25, 0.9, 0.01, 5).unwrap();
        let q = modularity(&g, &truth).unwrap();
        assert!(q.value > 0.5, "strong planted structure, got {}", q.value);
    }
}
