//! Ego-splitting into overlapping communities.
//!
//! Each node's ego network (its neighborhood, the node itself excluded) is
//! partitioned locally with label propagation; each local part becomes a
//! persona of the node. Every original edge is rewired to the matching
//! persona pair, the persona graph is partitioned globally with label
//! propagation, and persona communities map back to their owning nodes,
//! giving nodes one membership per persona. Neighbors that are isolated
//! inside an ego network share a single local part - they provide no
//! evidence of separate contexts, and this keeps stars intact rather than
//! splitting a hub into one persona per leaf. Isolated nodes get one
//! edgeless persona and end up as singleton communities.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::communities::{label_propagation, Cover};
use crate::graph::{Graph, GraphBuilder};

const LOCAL_LPA_ITERS: usize = 50;
const GLOBAL_LPA_ITERS: usize = 100;

/// Overlapping community detection via ego-net splitting. Directed inputs
/// are symmetrized. Deterministic for a fixed `(graph, seed)` pair; every
/// node is covered.
pub fn ego_splitting(g: &Graph, seed: u64) -> Cover {
    let und = g.undirected();
    let n = und.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node_seeds: Vec<u64> = (0..n).map(|_| rng.random()).collect();
    let global_seed: u64 = rng.random();

    // persona -> owning node; per node, per neighbor-position -> persona
    let mut persona_owner: Vec<u32> = Vec::new();
    let mut persona_at: Vec<Vec<u32>> = Vec::with_capacity(n);

    for v in 0..n as u32 {
        let neigh = und.neighbors(v);
        if neigh.is_empty() {
            persona_owner.push(v);
            persona_at.push(Vec::new());
            continue;
        }
        let ids: Vec<u32> = neigh.iter().map(|e| e.to).collect();
        let ego = und.subgraph(&ids);
        let local = label_propagation(&ego, node_seeds[v as usize], LOCAL_LPA_ITERS);

        // local part per neighbor; all ego-isolated neighbors share a part
        let isolated_part = u32::MAX;
        let mut remap: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
        let mut personas_here: Vec<u32> = Vec::with_capacity(neigh.len());
        for e in neigh {
            let ei = ego
                .node_index(und.external_id(e.to))
                .expect("neighbor present in its ego network");
            let part = if ego.degree(ei) == 0 {
                isolated_part
            } else {
                local.memberships(ei)[0]
            };
            let next = persona_owner.len() as u32;
            let p = *remap.entry(part).or_insert_with(|| {
                persona_owner.push(v);
                next
            });
            personas_here.push(p);
        }
        persona_at.push(personas_here);
    }

    // rewire each original edge to the matching persona pair
    let mut pb = GraphBuilder::new(false, und.is_weighted());
    for p in 0..persona_owner.len() {
        pb.node(&p.to_string());
    }
    for (u, v, w) in und.edges() {
        let pos_v = und.neighbors(u).binary_search_by_key(&v, |e| e.to).unwrap();
        let pos_u = und.neighbors(v).binary_search_by_key(&u, |e| e.to).unwrap();
        pb.edge_idx(persona_at[u as usize][pos_v], persona_at[v as usize][pos_u], w);
    }
    let persona_graph = pb.build();
    let persona_cover = label_propagation(&persona_graph, global_seed, GLOBAL_LPA_ITERS);

    let mut memberships: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (p, &owner) in persona_owner.iter().enumerate() {
        let c = persona_cover.memberships(p as u32)[0] as usize;
        memberships[owner as usize].push(c);
    }
    Cover::from_memberships(memberships)
}
