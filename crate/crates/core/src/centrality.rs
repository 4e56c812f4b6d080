//! Node centralities and the community-propensity weights built from them.
//!
//! Centralities serve two downstream roles: normalized per-community
//! propensities α_uc feeding the recommender, and center selection for
//! trust prediction. Betweenness and closeness treat every graph as a
//! hop-count graph (the trust datasets carry no meaningful edge
//! distances); degree-family scores sum arc weights, which on unweighted
//! graphs is the plain arc count.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::communities::Cover;
use crate::error::{Error, Result};
use crate::graph::{external_id_order, Graph};

/// Which node statistic to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityKind {
    Degree,
    Betweenness,
    Closeness,
    Eigenvector,
    Indegree,
    Outdegree,
    Random,
}

impl CentralityKind {
    pub fn name(self) -> &'static str {
        match self {
            CentralityKind::Degree => "degree",
            CentralityKind::Betweenness => "betweenness",
            CentralityKind::Closeness => "closeness",
            CentralityKind::Eigenvector => "eigenvector",
            CentralityKind::Indegree => "indegree",
            CentralityKind::Outdegree => "outdegree",
            CentralityKind::Random => "random",
        }
    }
}

impl std::fmt::Display for CentralityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CentralityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "degree" => CentralityKind::Degree,
            "betweenness" => CentralityKind::Betweenness,
            "closeness" => CentralityKind::Closeness,
            "eigenvector" => CentralityKind::Eigenvector,
            "indegree" => CentralityKind::Indegree,
            "outdegree" => CentralityKind::Outdegree,
            "random" => CentralityKind::Random,
            other => {
                return Err(Error::validation(format!(
                    "unknown centrality kind `{other}`"
                )))
            }
        })
    }
}

/// Per-node community influence weights α_uc in [0,1]. Entries exist
/// exactly for (node, community) pairs where the node is a member, stored
/// parallel to the cover's membership lists.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityMap {
    /// communities[u] = sorted community ids containing u.
    communities: Vec<Vec<u32>>,
    /// values[u][i] = α for communities[u][i].
    values: Vec<Vec<f64>>,
}

impl PropensityMap {
    /// The all-zero map over a cover; community terms vanish from any
    /// model consuming it.
    pub fn zero(cover: &Cover) -> Self {
        let communities: Vec<Vec<u32>> = (0..cover.n_nodes())
            .map(|u| cover.memberships(u as u32).to_vec())
            .collect();
        let values = communities.iter().map(|cs| vec![0.0; cs.len()]).collect();
        PropensityMap { communities, values }
    }

    pub fn n_nodes(&self) -> usize {
        self.communities.len()
    }

    /// The (community id, α) pairs of one node.
    pub fn of_node(&self, u: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.communities[u as usize]
            .iter()
            .copied()
            .zip(self.values[u as usize].iter().copied())
    }

    /// α_uc, or None when u is not a member of c.
    pub fn get(&self, u: u32, c: u32) -> Option<f64> {
        let i = self.communities[u as usize].binary_search(&c).ok()?;
        Some(self.values[u as usize][i])
    }
}

/// Computes the chosen centrality for every node of `g`.
///
/// Betweenness is the unnormalized Brandes accumulation; closeness is the
/// component-scaled form (reachable−1)² / ((n−1)·Σ distances), which keeps
/// disconnected subgraphs comparable; eigenvector is the dominant
/// eigenvector of the symmetrized adjacency; `random` draws one seeded
/// uniform score per node.
pub fn centrality_scores(g: &Graph, kind: CentralityKind, seed: u64) -> Result<Vec<f64>> {
    if g.n() == 0 {
        return Err(Error::validation("centrality of an empty graph is undefined"));
    }
    match kind {
        CentralityKind::Degree => {
            Ok(g.node_indices().map(|v| g.weighted_degree(v)).collect())
        }
        CentralityKind::Indegree | CentralityKind::Outdegree => {
            if !g.is_directed() {
                return Err(Error::validation(format!(
                    "{kind} centrality requires a directed graph"
                )));
            }
            let score = |v: u32| -> f64 {
                let arcs = if kind == CentralityKind::Indegree {
                    g.in_neighbors(v)
                } else {
                    g.neighbors(v)
                };
                arcs.iter().map(|e| e.weight).sum()
            };
            Ok(g.node_indices().map(score).collect())
        }
        CentralityKind::Betweenness => Ok(betweenness(g)),
        CentralityKind::Closeness => Ok(closeness(g)),
        CentralityKind::Eigenvector => Ok(eigenvector(g)),
        CentralityKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..g.n()).map(|_| rng.random::<f64>()).collect())
        }
    }
}

/// Brandes betweenness on hop-count shortest paths. Directed graphs
/// accumulate over ordered pairs; undirected results are halved so each
/// pair counts once.
fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut bc = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut sigma = vec![0.0f64; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut order: Vec<u32> = Vec::with_capacity(n);
    let mut queue = VecDeque::new();

    for s in 0..n {
        for v in 0..n {
            dist[v] = -1;
            sigma[v] = 0.0;
            delta[v] = 0.0;
            preds[v].clear();
        }
        order.clear();
        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s as u32);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for e in g.neighbors(v) {
                let w = e.to as usize;
                if dist[w] < 0 {
                    dist[w] = dist[v as usize] + 1;
                    queue.push_back(e.to);
                }
                if dist[w] == dist[v as usize] + 1 {
                    sigma[w] += sigma[v as usize];
                    preds[w].push(v);
                }
            }
        }
        for &w in order.iter().rev() {
            let coeff = (1.0 + delta[w as usize]) / sigma[w as usize];
            for &v in &preds[w as usize] {
                delta[v as usize] += sigma[v as usize] * coeff;
            }
            if w as usize != s {
                bc[w as usize] += delta[w as usize];
            }
        }
    }
    if !g.is_directed() {
        for v in &mut bc {
            *v /= 2.0;
        }
    }
    bc
}

/// Component-scaled closeness: with r nodes reachable from v (v excluded)
/// at total hop distance D, the score is r² / ((n−1)·D). Nothing
/// reachable → 0.
fn closeness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut scores = vec![0.0f64; n];
    if n <= 1 {
        return scores;
    }
    let mut dist = vec![-1i64; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        for d in dist.iter_mut() {
            *d = -1;
        }
        dist[s] = 0;
        queue.push_back(s as u32);
        let mut reached = 0u64;
        let mut total = 0u64;
        while let Some(v) = queue.pop_front() {
            for e in g.neighbors(v) {
                let w = e.to as usize;
                if dist[w] < 0 {
                    dist[w] = dist[v as usize] + 1;
                    reached += 1;
                    total += dist[w] as u64;
                    queue.push_back(e.to);
                }
            }
        }
        if total > 0 {
            scores[s] = (reached * reached) as f64 / ((n as u64 - 1) * total) as f64;
        }
    }
    scores
}

const EIG_TOL: f64 = 1e-9;
const EIG_MAX_ITERS: usize = 1000;

/// Dominant eigenvector of the symmetrized adjacency by power iteration,
/// L2-normalized. Iterating on A + I instead of A leaves the eigenvectors
/// untouched while guaranteeing convergence on bipartite components,
/// where A alone oscillates between ±λ.
fn eigenvector(g: &Graph) -> Vec<f64> {
    let sym = g.undirected();
    let n = sym.n();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0f64; n];
    for _ in 0..EIG_MAX_ITERS {
        for v in 0..n {
            let mut acc = x[v]; // the +I shift
            for e in sym.neighbors(v as u32) {
                acc += e.weight * x[e.to as usize];
            }
            next[v] = acc;
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return x; // unreachable with the shift, but keep it safe
        }
        for v in next.iter_mut() {
            *v /= norm;
        }
        let change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut x, &mut next);
        if change <= EIG_TOL {
            break;
        }
    }
    x
}

/// α_uc for every (member, community) pair of the cover: the member's
/// centrality within the community subgraph, divided by the community
/// max. An all-zero community (singletons for most kinds) maps to all-zero
/// propensities. Only degree, betweenness and closeness are valid here.
pub fn propensity(
    g: &Graph,
    cover: &Cover,
    kind: CentralityKind,
    seed: u64,
) -> Result<PropensityMap> {
    if !matches!(
        kind,
        CentralityKind::Degree | CentralityKind::Betweenness | CentralityKind::Closeness
    ) {
        return Err(Error::validation(format!(
            "propensity supports degree, betweenness or closeness, not {kind}"
        )));
    }
    if cover.n_nodes() != g.n() {
        return Err(Error::validation(format!(
            "cover describes {} nodes but the graph has {}",
            cover.n_nodes(),
            g.n()
        )));
    }
    let communities: Vec<Vec<u32>> = (0..cover.n_nodes())
        .map(|u| cover.memberships(u as u32).to_vec())
        .collect();
    let mut values: Vec<Vec<f64>> =
        communities.iter().map(|cs| vec![0.0; cs.len()]).collect();

    for c in 0..cover.k() as u32 {
        let members = cover.members(c);
        let sub = g.subgraph(members);
        let scores = centrality_scores(&sub, kind, derive_seed(seed, c as u64))?;
        let max = scores.iter().copied().fold(0.0f64, f64::max);
        // the subgraph re-indexes members in sorted order, matching the
        // cover's sorted member list position-for-position
        for (i, &u) in members.iter().enumerate() {
            let alpha = if max > 0.0 { scores[i] / max } else { 0.0 };
            let slot = communities[u as usize]
                .binary_search(&c)
                .expect("cover membership lists its own member");
            values[u as usize][slot] = alpha;
        }
    }
    for row in &values {
        debug_assert!(row.iter().all(|a| a.is_finite() && (0.0..=1.0).contains(a)));
    }
    Ok(PropensityMap { communities, values })
}

/// The member with the highest centrality inside the community subgraph.
/// Indegree/outdegree keep the full graph's direction restricted to the
/// members; ties go to the smallest external id; `random` picks a seeded
/// uniform member.
pub fn community_center(
    g: &Graph,
    community: &[u32],
    kind: CentralityKind,
    seed: u64,
) -> Result<u32> {
    if community.is_empty() {
        return Err(Error::validation("cannot pick a center of an empty community"));
    }
    if kind == CentralityKind::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(community[rng.random_range(0..community.len())]);
    }
    let sub = g.subgraph(community);
    let scores = centrality_scores(&sub, kind, seed)?;
    let mut best = 0u32;
    for i in 1..scores.len() as u32 {
        if scores[i as usize] > scores[best as usize] {
            best = i;
        } else if scores[i as usize] == scores[best as usize]
            && external_id_order(sub.external_id(i), sub.external_id(best)).is_lt()
        {
            best = i;
        }
    }
    let ext = sub.external_id(best);
    Ok(g.node_index(ext).expect("subgraph nodes exist in the parent"))
}

/// Splitmix-style stream splitting: one independent sub-seed per
/// community (or matrix cell), so parallel work stays order-free.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
