//! Sparse graph substrate shared by every algorithm in the crate.
//!
//! Graphs are immutable after construction: per-node neighbor lists sorted
//! by target index, optional positive edge weights (unweighted edges carry
//! weight 1.0), and a bijection between external string ids and dense
//! internal indices. Directed graphs keep both out- and in-adjacency;
//! algorithms that need an undirected view call [`Graph::symmetrized`].
//! Self-loops are dropped at construction and duplicate edges collapse into
//! one (weights summed when the graph is weighted).

mod io;
mod synth;

pub use io::{load_edge_list, load_node_labels, parse_edge_list, parse_node_labels, write_edge_list};
pub(crate) use io::split_fields;
pub use synth::planted_partition;

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One adjacency entry: target node and edge weight (1.0 when unweighted).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: u32,
    pub weight: f64,
}

/// Immutable sparse graph with external string ids.
#[derive(Debug, Clone)]
pub struct Graph {
    directed: bool,
    weighted: bool,
    out_adj: Vec<Vec<Edge>>,
    /// In-adjacency, populated only for directed graphs.
    in_adj: Vec<Vec<Edge>>,
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

/// Orders external ids numerically when both parse as integers, otherwise
/// lexicographically. Used for every "smallest external id" tie-break and
/// for cover serialization, so that integer-labelled datasets sort the way
/// a human expects ("9" before "10").
pub fn external_id_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u128>(), b.parse::<u128>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Incremental construction of a [`Graph`]; collapses duplicates and drops
/// self-loops so the finished graph upholds the substrate invariants.
#[derive(Debug)]
pub struct GraphBuilder {
    directed: bool,
    weighted: bool,
    ids: Vec<String>,
    index: HashMap<String, u32>,
    edges: HashMap<(u32, u32), f64>,
}

impl GraphBuilder {
    pub fn new(directed: bool, weighted: bool) -> Self {
        GraphBuilder {
            directed,
            weighted,
            ids: Vec::new(),
            index: HashMap::new(),
            edges: HashMap::new(),
        }
    }

    /// Interns an external id, returning its dense internal index.
    pub fn node(&mut self, ext: &str) -> u32 {
        if let Some(&i) = self.index.get(ext) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(ext.to_string());
        self.index.insert(ext.to_string(), i);
        i
    }

    /// Adds an edge by external ids. Self-loops are ignored (the endpoints
    /// are still interned); duplicates collapse, summing weights when the
    /// graph is weighted.
    pub fn edge(&mut self, src: &str, dst: &str, weight: f64) {
        let u = self.node(src);
        let v = self.node(dst);
        self.edge_idx(u, v, weight);
    }

    /// Adds an edge between already-interned nodes.
    pub fn edge_idx(&mut self, u: u32, v: u32, weight: f64) {
        if u == v {
            return;
        }
        let key = if self.directed || u < v { (u, v) } else { (v, u) };
        let entry = self.edges.entry(key).or_insert(0.0);
        if self.weighted {
            *entry += weight;
        } else {
            *entry = 1.0;
        }
    }

    pub fn build(self) -> Graph {
        let n = self.ids.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); if self.directed { n } else { 0 }];
        for (&(u, v), &w) in &self.edges {
            out_adj[u as usize].push(Edge { to: v, weight: w });
            if self.directed {
                in_adj[v as usize].push(Edge { to: u, weight: w });
            } else {
                out_adj[v as usize].push(Edge { to: u, weight: w });
            }
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_by_key(|e| e.to);
        }
        Graph {
            directed: self.directed,
            weighted: self.weighted,
            out_adj,
            in_adj,
            ids: self.ids,
            index: self.index,
        }
    }
}

impl Graph {
    pub fn builder(directed: bool, weighted: bool) -> GraphBuilder {
        GraphBuilder::new(directed, weighted)
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.out_adj.len()
    }

    /// Number of edges (arcs for directed graphs).
    pub fn m(&self) -> usize {
        let total: usize = self.out_adj.iter().map(Vec::len).sum();
        if self.directed {
            total
        } else {
            total / 2
        }
    }

    /// Total edge weight (arc weight for directed graphs).
    pub fn total_weight(&self) -> f64 {
        let total: f64 = self
            .out_adj
            .iter()
            .flat_map(|l| l.iter().map(|e| e.weight))
            .sum();
        if self.directed {
            total
        } else {
            total / 2.0
        }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    /// Out-neighbors (all neighbors for undirected graphs), sorted by index.
    pub fn neighbors(&self, v: u32) -> &[Edge] {
        &self.out_adj[v as usize]
    }

    /// In-neighbors; equals [`Graph::neighbors`] for undirected graphs.
    pub fn in_neighbors(&self, v: u32) -> &[Edge] {
        if self.directed {
            &self.in_adj[v as usize]
        } else {
            &self.out_adj[v as usize]
        }
    }

    /// Neighbor count: out-degree plus in-degree for directed graphs.
    pub fn degree(&self, v: u32) -> usize {
        if self.directed {
            self.out_adj[v as usize].len() + self.in_adj[v as usize].len()
        } else {
            self.out_adj[v as usize].len()
        }
    }

    pub fn out_degree(&self, v: u32) -> usize {
        self.out_adj[v as usize].len()
    }

    pub fn in_degree(&self, v: u32) -> usize {
        if self.directed {
            self.in_adj[v as usize].len()
        } else {
            self.out_adj[v as usize].len()
        }
    }

    /// Sum of incident edge weights (both directions for directed graphs).
    pub fn weighted_degree(&self, v: u32) -> f64 {
        let out: f64 = self.out_adj[v as usize].iter().map(|e| e.weight).sum();
        if self.directed {
            let inc: f64 = self.in_adj[v as usize].iter().map(|e| e.weight).sum();
            out + inc
        } else {
            out
        }
    }

    /// Tests u -> v adjacency (symmetric for undirected graphs).
    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.out_adj[u as usize]
            .binary_search_by_key(&v, |e| e.to)
            .is_ok()
    }

    /// Weight of the u -> v edge, if present.
    pub fn edge_weight(&self, u: u32, v: u32) -> Option<f64> {
        self.out_adj[u as usize]
            .binary_search_by_key(&v, |e| e.to)
            .ok()
            .map(|i| self.out_adj[u as usize][i].weight)
    }

    pub fn external_id(&self, v: u32) -> &str {
        &self.ids[v as usize]
    }

    pub fn node_index(&self, ext: &str) -> Option<u32> {
        self.index.get(ext).copied()
    }

    pub fn node_indices(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.n() as u32).into_iter()
    }

    /// Iterates every edge once: `(u, v, w)` with u < v for undirected
    /// graphs, every arc for directed ones.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.out_adj.iter().enumerate().flat_map(move |(u, list)| {
            let u = u as u32;
            list.iter()
                .filter(move |e| self.directed || e.to > u)
                .map(move |e| (u, e.to, e.weight))
        })
    }

    /// Undirected view: an edge exists when either direction does, with the
    /// two arc weights summed. Borrows `self` when already undirected.
    pub fn undirected(&self) -> Cow<'_, Graph> {
        if !self.directed {
            return Cow::Borrowed(self);
        }
        Cow::Owned(self.symmetrized())
    }

    /// Undirected copy of a directed graph (edge if either arc exists, arc
    /// weights summed); clones undirected graphs unchanged.
    pub fn symmetrized(&self) -> Graph {
        if !self.directed {
            return self.clone();
        }
        let mut b = GraphBuilder::new(false, self.weighted);
        for id in &self.ids {
            b.node(id);
        }
        for (u, v, w) in self.edges() {
            b.edge_idx(u, v, w);
        }
        b.build()
    }

    /// Induced subgraph on `nodes` (internal indices, deduplicated). The
    /// subgraph is densely re-indexed in the sorted order of `nodes` and
    /// keeps the original external ids, so results map back by id.
    pub fn subgraph(&self, nodes: &[u32]) -> Graph {
        let mut sorted: Vec<u32> = nodes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut b = GraphBuilder::new(self.directed, self.weighted);
        for &v in &sorted {
            b.node(&self.ids[v as usize]);
        }
        let rank: HashMap<u32, u32> = sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        for &v in &sorted {
            for e in &self.out_adj[v as usize] {
                if let Some(&t) = rank.get(&e.to) {
                    if self.directed || e.to > v {
                        b.edge_idx(rank[&v], t, e.weight);
                    }
                }
            }
        }
        b.build()
    }

    /// Ego network of `v`: the induced subgraph on its neighbors (undirected
    /// view for the neighborhood), including `v` itself when `include_ego`.
    pub fn ego_network(&self, v: u32, include_ego: bool) -> Graph {
        let mut nodes: Vec<u32> = self.neighbors(v).iter().map(|e| e.to).collect();
        if self.directed {
            nodes.extend(self.in_neighbors(v).iter().map(|e| e.to));
        }
        if include_ego {
            nodes.push(v);
        }
        self.subgraph(&nodes)
    }

    /// Structural equality under external ids: same node set, same edges
    /// with the same weights, same direction/weight flags. Internal index
    /// assignment is allowed to differ.
    pub fn same_structure(&self, other: &Graph) -> bool {
        if self.directed != other.directed
            || self.weighted != other.weighted
            || self.n() != other.n()
            || self.m() != other.m()
        {
            return false;
        }
        let mut mine: Vec<&str> = self.ids.iter().map(String::as_str).collect();
        let mut theirs: Vec<&str> = other.ids.iter().map(String::as_str).collect();
        mine.sort_unstable();
        theirs.sort_unstable();
        if mine != theirs {
            return false;
        }
        self.edges().all(|(u, v, w)| {
            let (a, b) = (self.external_id(u), self.external_id(v));
            match (other.node_index(a), other.node_index(b)) {
                (Some(x), Some(y)) => other.edge_weight(x, y) == Some(w),
                _ => false,
            }
        })
    }

    /// Content digest over ids, flags and the weighted edge set; stable
    /// across runs and processes. Keys the on-disk cover cache.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update([self.directed as u8, self.weighted as u8]);
        h.update((self.n() as u64).to_le_bytes());
        for id in &self.ids {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
        }
        for (u, v, w) in self.edges() {
            h.update(u.to_le_bytes());
            h.update(v.to_le_bytes());
            h.update(w.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks the substrate invariants; used by tests and after loads.
    pub fn check_invariants(&self) -> Result<()> {
        for (v, list) in self.out_adj.iter().enumerate() {
            let mut prev: Option<u32> = None;
            for e in list {
                if e.to as usize == v {
                    return Err(Error::validation(format!("self-loop at node {v}")));
                }
                if self.weighted && !(e.weight > 0.0) {
                    return Err(Error::validation(format!(
                        "non-positive weight on edge {v}->{}",
                        e.to
                    )));
                }
                if let Some(p) = prev {
                    if e.to <= p {
                        return Err(Error::validation(format!(
                            "adjacency of node {v} not strictly sorted"
                        )));
                    }
                }
                prev = Some(e.to);
            }
        }
        if !self.directed {
            let sum_deg: usize = (0..self.n() as u32).map(|v| self.degree(v)).sum();
            if sum_deg != 2 * self.m() {
                return Err(Error::validation("degree sum is not twice the edge count"));
            }
            for (u, v, w) in self.edges() {
                if self.edge_weight(v, u) != Some(w) {
                    return Err(Error::validation(format!(
                        "asymmetric undirected edge {u}<->{v}"
                    )));
                }
            }
        }
        if self.ids.len() != self.n() || self.index.len() != self.n() {
            return Err(Error::validation("id bijection out of sync"));
        }
        Ok(())
    }
}
