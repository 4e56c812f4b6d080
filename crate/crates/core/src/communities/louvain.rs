//! Louvain modularity optimisation: greedy local moving plus graph
//! aggregation, followed by a node-level refinement sweep so the returned
//! partition is a genuine single-node-move local optimum of modularity
//! (resolution 1) on the original graph.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::communities::Cover;
use crate::graph::Graph;

/// Working graph for one aggregation level. Aggregated nodes carry their
/// internal edge mass as a self weight (counted once here, twice in node
/// strength, matching the modularity volume terms).
#[derive(Clone)]
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_w: Vec<f64>,
    total_w: f64,
}

impl LevelGraph {
    fn from_graph(g: &Graph) -> LevelGraph {
        let n = g.n();
        let mut adj = vec![Vec::new(); n];
        for (u, v, w) in g.edges() {
            adj[u as usize].push((v as usize, w));
            adj[v as usize].push((u as usize, w));
        }
        LevelGraph { adj, self_w: vec![0.0; n], total_w: g.total_weight() }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    fn strength(&self, v: usize) -> f64 {
        let s: f64 = self.adj[v].iter().map(|&(_, w)| w).sum();
        s + 2.0 * self.self_w[v]
    }
}

/// One local-moving pass: sweeps nodes in a seeded random order, moving
/// each to the adjacent community with the largest strictly positive
/// modularity gain (isolation into a fresh community counts as a
/// candidate), until a full sweep makes no move. Returns whether anything
/// moved. Gains are compared through the standard reduced form
/// `k_{u,c} - tot_c * k_u / 2W`, which is modularity change scaled by W.
fn local_moving(lg: &LevelGraph, com: &mut [usize], rng: &mut ChaCha8Rng) -> bool {
    let n = lg.n();
    let two_w = 2.0 * lg.total_w;
    if two_w == 0.0 {
        return false;
    }
    let strength: Vec<f64> = (0..n).map(|v| lg.strength(v)).collect();
    let max_com = com.iter().copied().max().map_or(0, |m| m + 1);
    let mut tot = vec![0.0f64; max_com];
    for v in 0..n {
        tot[com[v]] += strength[v];
    }
    let mut free_coms: Vec<usize> = Vec::new();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut moved_any = false;
    let mut neigh_w: Vec<f64> = vec![0.0; tot.len()];
    for _sweep in 0..1000 {
        let mut moved = false;
        for &u in &order {
            let cu = com[u];
            // weights from u to each adjacent community
            let mut touched: Vec<usize> = Vec::new();
            for &(v, w) in &lg.adj[u] {
                let c = com[v];
                if neigh_w[c] == 0.0 && !touched.contains(&c) {
                    touched.push(c);
                }
                neigh_w[c] += w;
            }
            touched.sort_unstable();

            tot[cu] -= strength[u];
            let k_u = strength[u];
            let mut best = cu;
            let mut best_gain = neigh_w.get(cu).copied().unwrap_or(0.0) - tot[cu] * k_u / two_w;
            // isolation candidate: gain 0 relative to the removed state
            let isolate_gain = 0.0;
            if isolate_gain > best_gain + 1e-12 {
                best_gain = isolate_gain;
                best = usize::MAX; // placeholder for "fresh community"
            }
            for &c in &touched {
                if c == cu {
                    continue;
                }
                let gain = neigh_w[c] - tot[c] * k_u / two_w;
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    best = c;
                }
            }
            for &c in &touched {
                neigh_w[c] = 0.0;
            }

            let target = if best == usize::MAX {
                match free_coms.pop() {
                    Some(c) => c,
                    None => {
                        tot.push(0.0);
                        neigh_w.push(0.0);
                        tot.len() - 1
                    }
                }
            } else {
                best
            };
            tot[target] += k_u;
            if target != cu {
                com[u] = target;
                moved = true;
                moved_any = true;
                if tot[cu] == 0.0 {
                    free_coms.push(cu);
                }
            }
        }
        if !moved {
            break;
        }
    }
    moved_any
}

/// Relabels communities densely (order of first appearance) and returns
/// the community count.
fn compact(com: &mut [usize]) -> usize {
    let mut remap: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for c in com.iter_mut() {
        let next = remap.len();
        *c = *remap.entry(*c).or_insert(next);
    }
    remap.len()
}

/// Collapses communities into super-nodes, preserving total weight.
fn aggregate(lg: &LevelGraph, com: &[usize], k: usize) -> LevelGraph {
    let mut self_w = vec![0.0f64; k];
    let mut cross: std::collections::HashMap<(usize, usize), f64> = std::collections::HashMap::new();
    for v in 0..lg.n() {
        self_w[com[v]] += lg.self_w[v];
        for &(u, w) in &lg.adj[v] {
            if u <= v {
                continue; // each undirected edge once
            }
            let (a, b) = (com[v], com[u]);
            if a == b {
                self_w[a] += w;
            } else {
                let key = if a < b { (a, b) } else { (b, a) };
                *cross.entry(key).or_insert(0.0) += w;
            }
        }
    }
    let mut adj = vec![Vec::new(); k];
    let mut pairs: Vec<((usize, usize), f64)> = cross.into_iter().collect();
    pairs.sort_by_key(|&(key, _)| key);
    for ((a, b), w) in pairs {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    LevelGraph { adj, self_w, total_w: lg.total_w }
}

/// Louvain community detection. Directed inputs are symmetrized; weights
/// are respected. Deterministic for a fixed `(graph, seed)` pair. The
/// returned partition admits no single-node move (to any community, or to
/// isolation) that increases modularity.
pub fn louvain(g: &Graph, seed: u64) -> Cover {
    let und = g.undirected();
    let n = und.n();
    if n == 0 {
        return Cover::from_partition(&[]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level0 = LevelGraph::from_graph(&und);
    if level0.total_w == 0.0 {
        let labels: Vec<usize> = (0..n).collect();
        return Cover::from_partition(&labels);
    }

    let mut node_com: Vec<usize> = (0..n).collect();
    let mut lg = level0.clone();
    loop {
        let mut com: Vec<usize> = (0..lg.n()).collect();
        let improved = local_moving(&lg, &mut com, &mut rng);
        let k = compact(&mut com);
        for c in node_com.iter_mut() {
            *c = com[*c];
        }
        if !improved || k == lg.n() {
            break;
        }
        lg = aggregate(&lg, &com, k);
    }

    // Refinement at node level: the aggregated optimum may still allow an
    // improving move of one original node; sweep until none remains.
    local_moving(&level0, &mut node_com, &mut rng);
    compact(&mut node_com);
    Cover::from_partition(&node_com)
}
