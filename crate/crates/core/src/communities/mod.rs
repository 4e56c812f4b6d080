//! Community covers and the five detection algorithms that produce them.
//!
//! A [`Cover`] maps every node to a (possibly empty) set of community ids
//! and every community id in `0..k` to a non-empty member list. Partitions
//! are the special case of exactly one community per node; the overlapping
//! detectors (ego-splitting, BIGCLAM) produce general covers.
//!
//! All detectors are topology-only, take explicit seeds, and symmetrize
//! directed inputs (an undirected edge exists when either arc does).

mod bigclam;
mod ego_splitting;
mod label_propagation;
mod louvain;
mod quality;
mod spectral;

pub use bigclam::{bigclam, bigclam_fit, BigclamFit};
pub use ego_splitting::ego_splitting;
pub use label_propagation::label_propagation;
pub use louvain::louvain;
pub use quality::{density, modularity};
pub use spectral::spectral;

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::{external_id_order, Graph};

/// Which quality function produced a [`QualityScore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityKind {
    /// Partition quality relative to the degree-preserving null model;
    /// range [-1, 1].
    Modularity,
    /// Fraction of realisable intra-community edges present; range [0, 1].
    Density,
}

/// A quality value tagged with the function that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    pub kind: QualityKind,
    pub value: f64,
}

/// Node-to-communities assignment over a fixed node universe `0..n`.
///
/// Community ids are dense (`0..k`) and every community is non-empty.
/// Nodes may belong to zero communities (uncovered), one (partition) or
/// several (overlap).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    /// node -> sorted community ids
    assignments: Vec<Vec<u32>>,
    /// community -> sorted member nodes
    members: Vec<Vec<u32>>,
}

impl Cover {
    /// Builds a cover from explicit member lists over the universe `0..n`.
    /// Members are deduplicated and sorted; empty communities and
    /// out-of-range nodes are errors.
    pub fn from_communities(communities: Vec<Vec<u32>>, n: usize) -> Result<Cover> {
        let mut members: Vec<Vec<u32>> = Vec::with_capacity(communities.len());
        for (c, mut list) in communities.into_iter().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return Err(Error::validation(format!("community {c} is empty")));
            }
            if let Some(&max) = list.last() {
                if max as usize >= n {
                    return Err(Error::validation(format!(
                        "community {c} references node {max} outside universe 0..{n}"
                    )));
                }
            }
            members.push(list);
        }
        let mut assignments = vec![Vec::new(); n];
        for (c, list) in members.iter().enumerate() {
            for &v in list {
                assignments[v as usize].push(c as u32);
            }
        }
        Ok(Cover { assignments, members })
    }

    /// Builds a partition cover from per-node labels. Labels are arbitrary;
    /// dense community ids are assigned in order of first appearance.
    pub fn from_partition(labels: &[usize]) -> Cover {
        let mut remap: std::collections::HashMap<usize, u32> = std::collections::HashMap::new();
        let mut members: Vec<Vec<u32>> = Vec::new();
        let mut assignments = Vec::with_capacity(labels.len());
        for (v, &lab) in labels.iter().enumerate() {
            let c = *remap.entry(lab).or_insert_with(|| {
                members.push(Vec::new());
                (members.len() - 1) as u32
            });
            members[c as usize].push(v as u32);
            assignments.push(vec![c]);
        }
        Cover { assignments, members }
    }

    /// Builds a cover from per-node sets of raw community ids. Raw ids are
    /// remapped densely in order of first appearance; nodes with empty sets
    /// stay uncovered.
    pub fn from_memberships(memberships: Vec<Vec<usize>>) -> Cover {
        let n = memberships.len();
        let mut remap: std::collections::HashMap<usize, u32> = std::collections::HashMap::new();
        let mut members: Vec<Vec<u32>> = Vec::new();
        let mut assignments = vec![Vec::new(); n];
        for (v, raw) in memberships.into_iter().enumerate() {
            for lab in raw {
                let c = *remap.entry(lab).or_insert_with(|| {
                    members.push(Vec::new());
                    (members.len() - 1) as u32
                });
                if !assignments[v].contains(&c) {
                    assignments[v].push(c);
                    members[c as usize].push(v as u32);
                }
            }
        }
        for list in assignments.iter_mut() {
            list.sort_unstable();
        }
        for list in members.iter_mut() {
            list.sort_unstable();
        }
        Cover { assignments, members }
    }

    /// The whole universe as one community.
    pub fn single_community(n: usize) -> Cover {
        if n == 0 {
            return Cover { assignments: Vec::new(), members: Vec::new() };
        }
        Cover {
            assignments: vec![vec![0]; n],
            members: vec![(0..n as u32).collect()],
        }
    }

    /// Number of communities.
    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Size of the node universe.
    pub fn n_nodes(&self) -> usize {
        self.assignments.len()
    }

    /// Sorted community ids of `v`.
    pub fn memberships(&self, v: u32) -> &[u32] {
        &self.assignments[v as usize]
    }

    /// Sorted members of community `c`.
    pub fn members(&self, c: u32) -> &[u32] {
        &self.members[c as usize]
    }

    pub fn communities(&self) -> &[Vec<u32>] {
        &self.members
    }

    /// True when every node belongs to exactly one community.
    pub fn is_partition(&self) -> bool {
        self.assignments.iter().all(|a| a.len() == 1)
    }

    /// True when `u` and `v` share at least one community.
    pub fn share_community(&self, u: u32, v: u32) -> bool {
        let (a, b) = (self.memberships(u), self.memberships(v));
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Equal => return true,
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        false
    }

    /// Community sizes, indexed by community id.
    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Mean number of memberships per node (1.0 for partitions).
    pub fn overlap_rate(&self) -> f64 {
        if self.assignments.is_empty() {
            return 0.0;
        }
        let total: usize = self.assignments.iter().map(Vec::len).sum();
        total as f64 / self.assignments.len() as f64
    }
}

/// Adds one auxiliary community per original community, holding its border
/// nodes (members with at least one neighbor outside, undirected view).
/// Original communities are kept unchanged; empty borders add nothing, so
/// an isolated or all-covering community contributes no auxiliary twin.
/// Requires a partition over exactly the graph's nodes.
pub fn auxiliary_communities(g: &Graph, cover: &Cover) -> Result<Cover> {
    if cover.n_nodes() != g.n() {
        return Err(Error::validation(format!(
            "cover is over {} nodes but the graph has {}",
            cover.n_nodes(),
            g.n()
        )));
    }
    if !cover.is_partition() {
        return Err(Error::validation(
            "auxiliary communities are defined for partitions only",
        ));
    }
    let und = g.undirected();
    let mut communities: Vec<Vec<u32>> = cover.communities().to_vec();
    for c in 0..cover.k() as u32 {
        let border: Vec<u32> = cover
            .members(c)
            .iter()
            .copied()
            .filter(|&v| {
                und.neighbors(v)
                    .iter()
                    .any(|e| cover.memberships(e.to)[0] != c)
            })
            .collect();
        if !border.is_empty() {
            communities.push(border);
        }
    }
    Cover::from_communities(communities, g.n())
}

/// Writes a cover as text: one line per community, the members' external
/// ids sorted (numeric-aware) and space-separated. The output is
/// byte-stable for a fixed (graph, cover) pair, so files can be diffed.
pub fn write_cover<W: Write>(g: &Graph, cover: &Cover, mut w: W) -> Result<()> {
    for c in 0..cover.k() as u32 {
        let mut ids: Vec<&str> = cover
            .members(c)
            .iter()
            .map(|&v| g.external_id(v))
            .collect();
        ids.sort_by(|a, b| external_id_order(a, b));
        writeln!(w, "{}", ids.join(" "))?;
    }
    Ok(())
}

/// Parses the [`write_cover`] format against a graph's id space. Unknown
/// ids and duplicate ids within a line are errors; blank lines are skipped.
pub fn parse_cover<R: BufRead>(g: &Graph, reader: R) -> Result<Cover> {
    let mut communities: Vec<Vec<u32>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut nodes = Vec::new();
        for tok in trimmed.split_whitespace() {
            let v = g
                .node_index(tok)
                .ok_or_else(|| Error::parse(lineno, format!("unknown node id `{tok}`")))?;
            if nodes.contains(&v) {
                return Err(Error::parse(lineno, format!("duplicate node id `{tok}`")));
            }
            nodes.push(v);
        }
        communities.push(nodes);
    }
    Cover::from_communities(communities, g.n())
}
