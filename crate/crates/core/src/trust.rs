//! Trust link prediction from rating behavior and community structure.
//!
//! The score of an ordered user pair (i, j) is built from rating cosine
//! similarity: over every community pair (C1, C2) with i ∈ C1 and j ∈ C2,
//! average the similarity of i to C1's center, of j to C2's center, and
//! of the two centers to each other, and take the best pair. Nodes outside
//! every community score 0, as do users without any ratings — the
//! inherently blind regime, which is counted rather than dropped so the
//! confusion matrix keeps the full sample.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centrality::{community_center, derive_seed, CentralityKind};
use crate::communities::Cover;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{precision_recall_f1, roc_auc, BinaryOutcome, MetricValue};
use crate::recsys::RatingsTable;

/// A labeled user pair: an existing trust arc or a sampled non-edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrustPair {
    pub i: u32,
    pub j: u32,
    pub label: bool,
}

/// A pair with its prediction attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub i: u32,
    pub j: u32,
    pub label: bool,
    pub score: f64,
}

/// Decision thresholds, per detection algorithm with a fallback. All
/// values must lie strictly inside (0,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub default: f64,
    pub per_algorithm: BTreeMap<String, f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        let per_algorithm = [
            ("louvain", 0.45),
            ("label_propagation", 0.6),
            ("spectral", 0.6),
            ("ego_splitting", 0.45),
            ("bigclam", 0.55),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        ThresholdConfig { default: 0.55, per_algorithm }
    }
}

impl ThresholdConfig {
    /// The same threshold for every algorithm.
    pub fn uniform(threshold: f64) -> Self {
        ThresholdConfig { default: threshold, per_algorithm: BTreeMap::new() }
    }

    pub fn for_algorithm(&self, algorithm: &str) -> f64 {
        self.per_algorithm.get(algorithm).copied().unwrap_or(self.default)
    }

    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<(&str, f64)> = vec![("default", self.default)];
        all.extend(self.per_algorithm.iter().map(|(k, &v)| (k.as_str(), v)));
        for (name, t) in all {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::validation(format!(
                    "threshold for `{name}` must lie in (0,1), got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Sparse per-user rating vectors with cached norms, ready for cosines.
#[derive(Debug)]
struct UserVectors {
    items: Vec<Vec<(u32, f64)>>,
    norms: Vec<f64>,
}

impl UserVectors {
    fn new(ratings: &RatingsTable) -> Self {
        let mut items: Vec<Vec<(u32, f64)>> = vec![Vec::new(); ratings.n_users()];
        for r in ratings.ratings() {
            items[r.user as usize].push((r.item, r.value));
        }
        // table rows are sorted by (user, item), so each list is sorted
        let norms = items
            .iter()
            .map(|list| list.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt())
            .collect();
        UserVectors { items, norms }
    }

    /// Cosine over the full item axis: absent items contribute zero, so
    /// only co-rated items feed the dot product. Identical users are 1 by
    /// definition; a zero vector (impossible for interned users, but kept
    /// for safety) gives 0.
    fn cosine(&self, u: u32, v: u32) -> f64 {
        let (nu, nv) = (self.norms[u as usize], self.norms[v as usize]);
        if nu == 0.0 || nv == 0.0 {
            return 0.0;
        }
        if u == v {
            return 1.0;
        }
        let (a, b) = (&self.items[u as usize], &self.items[v as usize]);
        let mut dot = 0.0;
        let (mut x, mut y) = (0usize, 0usize);
        while x < a.len() && y < b.len() {
            match a[x].0.cmp(&b[y].0) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[x].1 * b[y].1;
                    x += 1;
                    y += 1;
                }
            }
        }
        (dot / (nu * nv)).min(1.0)
    }
}

/// Rating cosine of two users by external id; users unknown to the table
/// score 0 (see [`TrustPredictor::unknown_user_hits`] for the counted
/// variant used during scoring).
pub fn rating_similarity(ratings: &RatingsTable, i: &str, j: &str) -> f64 {
    match (ratings.user_index(i), ratings.user_index(j)) {
        (Some(u), Some(v)) => UserVectors::new(ratings).cosine(u, v),
        _ => 0.0,
    }
}

/// One center per community: the member maximizing `kind` within the
/// community subgraph, each community drawing an independent sub-seed.
pub fn compute_centers(
    g: &Graph,
    cover: &Cover,
    kind: CentralityKind,
    seed: u64,
) -> Result<Vec<u32>> {
    (0..cover.k() as u32)
        .map(|c| community_center(g, cover.members(c), kind, derive_seed(seed, c as u64)))
        .collect()
}

/// Scores user pairs against a cover and its community centers.
pub struct TrustPredictor<'a> {
    cover: &'a Cover,
    centers: &'a [u32],
    vectors: UserVectors,
    /// trust-graph node → ratings-table user, by shared external id
    node_user: Vec<Option<u32>>,
    /// center-to-center cosines, indexed [c1][c2]
    center_sims: Vec<Vec<f64>>,
    unknown_hits: AtomicUsize,
}

impl<'a> TrustPredictor<'a> {
    pub fn new(
        g: &Graph,
        cover: &'a Cover,
        centers: &'a [u32],
        ratings: &RatingsTable,
    ) -> Result<Self> {
        if cover.n_nodes() != g.n() {
            return Err(Error::validation(format!(
                "cover describes {} nodes but the graph has {}",
                cover.n_nodes(),
                g.n()
            )));
        }
        if centers.len() != cover.k() {
            return Err(Error::validation(format!(
                "{} centers for {} communities",
                centers.len(),
                cover.k()
            )));
        }
        let vectors = UserVectors::new(ratings);
        let node_user: Vec<Option<u32>> = (0..g.n() as u32)
            .map(|v| ratings.user_index(g.external_id(v)))
            .collect();
        // centers repeat across communities; compute each distinct pair once
        let mut distinct: Vec<u32> = centers.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let slot: HashMap<u32, usize> =
            distinct.iter().enumerate().map(|(s, &c)| (c, s)).collect();
        let mut sims = vec![vec![0.0f64; distinct.len()]; distinct.len()];
        for (si, &a) in distinct.iter().enumerate() {
            for (sj, &b) in distinct.iter().enumerate().skip(si) {
                let s = match (node_user[a as usize], node_user[b as usize]) {
                    (Some(u), Some(v)) => vectors.cosine(u, v),
                    _ => 0.0,
                };
                sims[si][sj] = s;
                sims[sj][si] = s;
            }
        }
        let center_sims = (0..centers.len())
            .map(|c1| {
                (0..centers.len())
                    .map(|c2| sims[slot[&centers[c1]]][slot[&centers[c2]]])
                    .collect()
            })
            .collect();
        Ok(TrustPredictor {
            cover,
            centers,
            vectors,
            node_user,
            center_sims,
            unknown_hits: AtomicUsize::new(0),
        })
    }

    fn node_sim(&self, a: u32, b: u32) -> f64 {
        match (self.node_user[a as usize], self.node_user[b as usize]) {
            (Some(u), Some(v)) => self.vectors.cosine(u, v),
            _ => {
                self.unknown_hits.fetch_add(1, Ordering::Relaxed);
                0.0
            }
        }
    }

    /// Best community-pair average of (i ↔ center, j ↔ center,
    /// center ↔ center) similarities; 0 when either node is uncovered.
    pub fn predict(&self, i: u32, j: u32) -> f64 {
        let cis = self.cover.memberships(i);
        let cjs = self.cover.memberships(j);
        let mut best = 0.0f64;
        for &c1 in cis {
            let si = self.node_sim(i, self.centers[c1 as usize]);
            for &c2 in cjs {
                let sj = self.node_sim(j, self.centers[c2 as usize]);
                let sc = self.center_sims[c1 as usize][c2 as usize];
                best = best.max((si + sj + sc) / 3.0);
            }
        }
        best
    }

    /// Attaches predictions to every pair, in input order.
    pub fn score_pairs(&self, pairs: &[TrustPair]) -> Vec<ScoredPair> {
        pairs
            .iter()
            .map(|p| ScoredPair {
                i: p.i,
                j: p.j,
                label: p.label,
                score: self.predict(p.i, p.j),
            })
            .collect()
    }

    /// How many similarity lookups hit a user absent from the ratings
    /// table (scored 0 by convention).
    pub fn unknown_user_hits(&self) -> usize {
        self.unknown_hits.load(Ordering::Relaxed)
    }
}

/// Samples `n_pos` distinct trust arcs and `n_neg` distinct ordered
/// non-adjacent pairs from a directed trust graph, positives first.
pub fn sample_pairs(g: &Graph, n_pos: usize, n_neg: usize, seed: u64) -> Result<Vec<TrustPair>> {
    if !g.is_directed() {
        return Err(Error::validation("pair sampling expects a directed trust graph"));
    }
    if n_pos > g.m() {
        return Err(Error::validation(format!(
            "asked for {n_pos} positive pairs but the graph has {} arcs",
            g.m()
        )));
    }
    let n = g.n() as u64;
    let non_edges = n * n.saturating_sub(1) - g.m() as u64;
    if n_neg as u64 > non_edges {
        return Err(Error::validation(format!(
            "asked for {n_neg} negative pairs but only {non_edges} non-adjacent ordered pairs exist"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs: Vec<(u32, u32)> = g.edges().map(|(u, v, _)| (u, v)).collect();
    arcs.shuffle(&mut rng);
    let mut pairs: Vec<TrustPair> = arcs
        .into_iter()
        .take(n_pos)
        .map(|(i, j)| TrustPair { i, j, label: true })
        .collect();

    if n_neg as u64 * 2 > non_edges {
        // dense regime: enumerate every non-edge and shuffle
        let mut all: Vec<(u32, u32)> = Vec::with_capacity(non_edges as usize);
        for u in g.node_indices() {
            for v in g.node_indices() {
                if u != v && !g.has_edge(u, v) {
                    all.push((u, v));
                }
            }
        }
        all.shuffle(&mut rng);
        pairs.extend(
            all.into_iter()
                .take(n_neg)
                .map(|(i, j)| TrustPair { i, j, label: false }),
        );
    } else {
        let mut seen: HashSet<(u32, u32)> = HashSet::new();
        while seen.len() < n_neg {
            let u = rng.random_range(0..g.n() as u32);
            let v = rng.random_range(0..g.n() as u32);
            if u == v || g.has_edge(u, v) || !seen.insert((u, v)) {
                continue;
            }
            pairs.push(TrustPair { i: u, j: v, label: false });
        }
    }
    Ok(pairs)
}

/// Threshold metrics plus the threshold-free AUC. Classification is
/// `score > threshold`. Errors when the sample lacks one of the classes
/// (AUC is then meaningless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrustEval {
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub f1: MetricValue,
    pub auc: f64,
}

pub fn evaluate_trust(scored: &[ScoredPair], threshold: f64) -> Result<TrustEval> {
    let outcomes: Vec<BinaryOutcome> = scored
        .iter()
        .map(|p| BinaryOutcome { label: p.label, score: p.score })
        .collect();
    let auc = roc_auc(&outcomes)?;
    let predicted: Vec<bool> = scored.iter().map(|p| p.score > threshold).collect();
    let actual: Vec<bool> = scored.iter().map(|p| p.label).collect();
    let (precision, recall, f1) = precision_recall_f1(&predicted, &actual)?;
    Ok(TrustEval { precision, recall, f1, auc })
}

/// Sweeps every candidate cut and returns (threshold, f1) with the best
/// F1; ties prefer the smaller threshold. Candidates are the distinct
/// score values (classifying strictly above each) plus one below the
/// minimum so the all-positive classifier is reachable.
pub fn f1_optimal_threshold(scored: &[ScoredPair]) -> Result<(f64, f64)> {
    let total_pos = scored.iter().filter(|p| p.label).count();
    if total_pos == 0 || total_pos == scored.len() {
        return Err(Error::validation(
            "threshold sweep needs both positive and negative pairs",
        ));
    }
    let mut by_score: Vec<(f64, bool)> =
        scored.iter().map(|p| (p.score, p.label)).collect();
    by_score.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new(); // (θ, tp, fp) above θ
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < by_score.len() {
        let score = by_score[idx].0;
        // classifying "strictly above this score" excludes its whole group
        candidates.push((score, tp, fp));
        while idx < by_score.len() && by_score[idx].0 == score {
            if by_score[idx].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
    }
    let min_score = by_score.last().unwrap().0;
    if min_score > 0.0 {
        candidates.push((min_score / 2.0, tp, fp)); // everything classified positive
    }

    let mut best: Option<(f64, f64)> = None;
    for (theta, tp, fp) in candidates {
        let f1 = if tp == 0 {
            continue; // precision or recall degenerate
        } else {
            let p = tp as f64 / (tp + fp) as f64;
            let r = tp as f64 / total_pos as f64;
            2.0 * p * r / (p + r)
        };
        let better = match best {
            None => true,
            Some((bt, bf)) => f1 > bf || (f1 == bf && theta < bt),
        };
        if better {
            best = Some((theta, f1));
        }
    }
    best.ok_or_else(|| {
        Error::validation("no threshold classifies any pair positive (all scores tie at 0)")
    })
}

/// CSV audit dump: `i,j,label,score,predicted`, external ids, input order.
pub fn write_scored_pairs<W: Write>(
    g: &Graph,
    scored: &[ScoredPair],
    threshold: f64,
    mut w: W,
) -> Result<()> {
    writeln!(w, "i,j,label,score,predicted")?;
    for p in scored {
        writeln!(
            w,
            "{},{},{},{},{}",
            g.external_id(p.i),
            g.external_id(p.j),
            u8::from(p.label),
            p.score,
            u8::from(p.score > threshold)
        )?;
    }
    Ok(())
}
