//! Node-level anomaly detection driven by community structure.
//!
//! Every node is summarized by six features that mix its community
//! memberships with the shape of its closed ego-net. Scoring is either a
//! transparent weighted indicator sum ([`linear_score`]) or a boosted
//! decision-stump classifier ([`fit_anomaly_classifier`]) trained on
//! labeled nodes; the classifier is the primary path.
//!
//! Partition-valued detectors should be routed through
//! [`auxiliary_communities`](crate::communities::auxiliary_communities)
//! before feature extraction so border nodes pick up a second membership;
//! overlapping covers feed in directly. The whole-graph single community
//! serves as the no-structure baseline: it forces `communities = 1` and
//! `communities_per_degree = 1/deg(v)` for every node, so any lift over it
//! is attributable to the detected communities.

mod boost;
mod synthetic;

pub use boost::{
    fit_anomaly_classifier, read_classifier, write_classifier, AnomalyClassifier, Stump,
};
pub use synthetic::synthetic_benchmark;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centrality::derive_seed;
use crate::communities::Cover;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{self, BinaryOutcome, MetricValue};

/// Column names used by the feature-matrix CSV export, in field order.
pub const FEATURE_NAMES: [&str; 6] = ["f1", "f2", "f3", "f4", "f5", "f6"];

/// Per-node feature vector. Columns f1..f6 of the CSV export map to the
/// fields in declaration order. Directed graphs are measured on their
/// undirected view; `deg(v)` below is the number of distinct neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// f1: number of communities the node belongs to.
    pub communities: f64,
    /// f2: communities per neighbor, `f1/deg(v)`; isolated nodes keep `f1`.
    pub communities_per_degree: f64,
    /// f3: `1 - cc(v)` where `cc` is the local clustering coefficient
    /// (fraction of neighbor pairs that are themselves adjacent; nodes with
    /// fewer than two neighbors have `cc = 0`).
    pub dispersion: f64,
    /// f4: `deg(v)` over the summed weight of incident edges — exactly 1 on
    /// unweighted graphs (isolated nodes included, taking the empty ratio
    /// as 1).
    pub degree_over_weight: f64,
    /// f5: cliqueness — edge density of the closed ego-net of `v`.
    pub cliqueness: f64,
    /// f6: starkness — `deg(v)/m_ego` with `m_ego` the edge count of the
    /// closed ego-net: 1 for a perfect star, `2/(deg+1)` for a clique.
    pub starkness: f64,
    /// Isolated nodes score f3 = 1, f5 = 0, f6 = 0 by convention; this flag
    /// marks them so downstream consumers can tell convention from signal.
    pub isolated: bool,
}

impl FeatureVector {
    /// The six feature values in column order f1..f6.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.communities,
            self.communities_per_degree,
            self.dispersion,
            self.degree_over_weight,
            self.cliqueness,
            self.starkness,
        ]
    }
}

fn check_cover(g: &Graph, cover: &Cover) -> Result<()> {
    if cover.n_nodes() != g.n() {
        return Err(Error::validation(format!(
            "cover is over {} nodes but the graph has {}",
            cover.n_nodes(),
            g.n()
        )));
    }
    Ok(())
}

/// Features of one node under the given cover. `cover` should already
/// include auxiliary communities when it came from a partition.
pub fn extract_features(g: &Graph, cover: &Cover, v: u32) -> Result<FeatureVector> {
    check_cover(g, cover)?;
    if (v as usize) >= g.n() {
        return Err(Error::validation(format!("node {v} is outside the graph")));
    }
    let und = g.undirected();
    Ok(features_on(&und, cover, v))
}

/// Features of every node, ordered by node index. Extraction is
/// independent per node and runs in parallel.
pub fn feature_matrix(g: &Graph, cover: &Cover) -> Result<Vec<FeatureVector>> {
    check_cover(g, cover)?;
    let und = g.undirected();
    let und: &Graph = &und;
    Ok((0..g.n() as u32)
        .into_par_iter()
        .map(|v| features_on(und, cover, v))
        .collect())
}

fn features_on(und: &Graph, cover: &Cover, v: u32) -> FeatureVector {
    let neighbors: Vec<u32> = und.neighbors(v).iter().map(|e| e.to).collect();
    let deg = neighbors.len();
    let f1 = cover.memberships(v).len() as f64;
    let f2 = if deg == 0 { f1 } else { f1 / deg as f64 };
    let f4 = if deg == 0 {
        1.0
    } else {
        deg as f64 / und.weighted_degree(v)
    };
    if deg == 0 {
        return FeatureVector {
            communities: f1,
            communities_per_degree: f2,
            dispersion: 1.0,
            degree_over_weight: f4,
            cliqueness: 0.0,
            starkness: 0.0,
            isolated: true,
        };
    }
    // Count adjacent neighbor pairs once; the closed ego-net then has
    // deg + pairs edges over deg + 1 nodes, which yields cc, cliqueness
    // and starkness without building a subgraph.
    let mut pairs = 0usize;
    for (i, &a) in neighbors.iter().enumerate() {
        for &b in &neighbors[i + 1..] {
            if und.has_edge(a, b) {
                pairs += 1;
            }
        }
    }
    let cc = if deg < 2 {
        0.0
    } else {
        pairs as f64 / (deg * (deg - 1) / 2) as f64
    };
    let m_ego = (deg + pairs) as f64;
    let n_ego = (deg + 1) as f64;
    FeatureVector {
        communities: f1,
        communities_per_degree: f2,
        dispersion: 1.0 - cc,
        degree_over_weight: f4,
        cliqueness: 2.0 * m_ego / (n_ego * (n_ego - 1.0)),
        starkness: deg as f64 / m_ego,
        isolated: false,
    }
}

/// Weights and thresholds for the interpretable linear scorer, one entry
/// per feature in f1..f6 order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub weights: [f64; 6],
    pub thresholds: [f64; 6],
}

impl ScorerConfig {
    /// Default configuration over a training sample: every weight 1, every
    /// threshold the per-feature median.
    pub fn from_training(features: &[FeatureVector]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::validation(
                "cannot derive scorer thresholds from an empty training sample",
            ));
        }
        let mut thresholds = [0.0f64; 6];
        for (i, t) in thresholds.iter_mut().enumerate() {
            let mut column: Vec<f64> = features.iter().map(|f| f.as_array()[i]).collect();
            column.sort_by(f64::total_cmp);
            let n = column.len();
            *t = if n % 2 == 1 {
                column[n / 2]
            } else {
                (column[n / 2 - 1] + column[n / 2]) / 2.0
            };
        }
        Ok(ScorerConfig { weights: [1.0; 6], thresholds })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64; 6]| xs.iter().all(|x| x.is_finite());
        if !finite(&self.weights) || !finite(&self.thresholds) {
            return Err(Error::validation(
                "scorer weights and thresholds must be finite",
            ));
        }
        Ok(())
    }
}

/// Weighted indicator sum `S(v) = Σ w_i · I(φ_i(v) > T_i)`; the inequality
/// is strict, so a feature sitting exactly on its threshold contributes
/// nothing.
pub fn linear_score(features: &FeatureVector, cfg: &ScorerConfig) -> f64 {
    features
        .as_array()
        .iter()
        .zip(&cfg.weights)
        .zip(&cfg.thresholds)
        .map(|((&phi, &w), &t)| if phi > t { w } else { 0.0 })
        .sum()
}

/// Validates a dense label vector (every class in `0..k` present for
/// `k = max label + 1`) and returns the class count.
pub(crate) fn validate_labels(labels: &[usize]) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::validation("label vector is empty"));
    }
    let k = labels.iter().max().unwrap() + 1;
    let mut seen = vec![false; k];
    for &y in labels {
        seen[y] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::validation(format!(
            "labels must be dense integers from 0: class {missing} has no samples"
        )));
    }
    Ok(k)
}

/// Stratified k-fold split: returns `k` sorted test-index sets that
/// partition `0..labels.len()` and keep every class's per-fold share within
/// one sample of exact proportionality.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if k < 2 {
        return Err(Error::validation("stratified k-fold needs k >= 2"));
    }
    if labels.len() < k {
        return Err(Error::validation(format!(
            "cannot split {} samples into {k} folds",
            labels.len()
        )));
    }
    let n_classes = validate_labels(labels)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    // Deal each class round-robin, carrying the cursor across classes so
    // overall fold sizes stay balanced too.
    let mut cursor = 0usize;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[cursor % k].push(i);
            cursor += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Precision/recall/F1 and support for one class of a classification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: usize,
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub f1: MetricValue,
    /// Number of test samples whose true label is this class.
    pub support: usize,
}

/// Classification quality on one test set: per-class reports plus overall
/// accuracy and AUC (binary AUC from positive-class scores, macro OvR
/// otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEval {
    pub per_class: Vec<ClassReport>,
    pub accuracy: f64,
    pub auc: MetricValue,
}

/// Evaluates a classifier on labeled feature vectors. Classes the test set
/// never shows (or the classifier never predicts) get undefined markers in
/// the affected metrics rather than zeros; a single-class test set likewise
/// reports an undefined AUC.
pub fn evaluate_anomaly(
    classifier: &AnomalyClassifier,
    features: &[FeatureVector],
    labels: &[usize],
) -> Result<AnomalyEval> {
    if features.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty test set"));
    }
    if features.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let k = classifier.n_classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::validation(format!(
            "label {bad} is outside the classifier's {k} classes"
        )));
    }
    let scores: Vec<Vec<f64>> = features.iter().map(|f| classifier.class_scores(f)).collect();
    let predictions: Vec<usize> = features.iter().map(|f| classifier.predict(f)).collect();

    let mut per_class = Vec::with_capacity(k);
    for class in 0..k {
        let predicted: Vec<bool> = predictions.iter().map(|&p| p == class).collect();
        let actual: Vec<bool> = labels.iter().map(|&y| y == class).collect();
        let (precision, recall, f1) = metrics::precision_recall_f1(&predicted, &actual)?;
        let support = actual.iter().filter(|&&a| a).count();
        per_class.push(ClassReport { class, precision, recall, f1, support });
    }
    let accuracy = metrics::accuracy(&predictions, labels)?;
    let auc = if k == 2 {
        let outcomes: Vec<BinaryOutcome> = labels
            .iter()
            .zip(&scores)
            .map(|(&y, s)| BinaryOutcome { label: y == 1, score: s[1] })
            .collect();
        // A test set containing only one class has no rankable pairs.
        metrics::roc_auc(&outcomes).map_or(MetricValue::Undefined, MetricValue::Value)
    } else {
        let by_class: Vec<Vec<f64>> = (0..k)
            .map(|c| scores.iter().map(|s| s[c]).collect())
            .collect();
        metrics::macro_ovr_auc(labels, &by_class)?
    };
    Ok(AnomalyEval { per_class, accuracy, auc })
}

/// Stratified k-fold cross-validation: fits a fresh classifier per fold on
/// the remaining samples and evaluates it on the held-out fold. Returns one
/// evaluation per fold, in fold order.
pub fn cross_validate_anomaly(
    features: &[FeatureVector],
    labels: &[usize],
    k: usize,
    rounds: usize,
    seed: u64,
) -> Result<Vec<AnomalyEval>> {
    if features.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let folds = stratified_kfold(labels, k, seed)?;
    let mut evals = Vec::with_capacity(k);
    for (fold_id, test) in folds.iter().enumerate() {
        let in_test: std::collections::HashSet<usize> = test.iter().copied().collect();
        let mut train_x = Vec::with_capacity(features.len() - test.len());
        let mut train_y = Vec::with_capacity(features.len() - test.len());
        for i in 0..features.len() {
            if !in_test.contains(&i) {
                train_x.push(features[i]);
                train_y.push(labels[i]);
            }
        }
        let test_x: Vec<FeatureVector> = test.iter().map(|&i| features[i]).collect();
        let test_y: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        let clf = fit_anomaly_classifier(
            &train_x,
            &train_y,
            rounds,
            derive_seed(seed, fold_id as u64),
        )?;
        evals.push(evaluate_anomaly(&clf, &test_x, &test_y)?);
    }
    Ok(evals)
}

/// Writes the feature matrix as CSV with header `node,f1,...,f6,label`,
/// one row per node in index order, node names being external ids.
pub fn write_feature_matrix<W: Write>(
    g: &Graph,
    features: &[FeatureVector],
    labels: &[usize],
    mut w: W,
) -> Result<()> {
    if features.len() != g.n() || labels.len() != g.n() {
        return Err(Error::validation(format!(
            "graph has {} nodes but got {} feature vectors and {} labels",
            g.n(),
            features.len(),
            labels.len()
        )));
    }
    writeln!(w, "node,{},label", FEATURE_NAMES.join(","))?;
    for v in g.node_indices() {
        let f = &features[v as usize];
        let cols: Vec<String> = f.as_array().iter().map(f64::to_string).collect();
        writeln!(
            w,
            "{},{},{}",
            g.external_id(v),
            cols.join(","),
            labels[v as usize]
        )?;
    }
    Ok(())
}
