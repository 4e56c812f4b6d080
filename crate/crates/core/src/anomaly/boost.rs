//! Gradient-boosted decision stumps over the six node features.
//!
//! Binary problems train a single logistic-loss ensemble; multiclass
//! problems train one-vs-rest ensembles, one per class. Classes are
//! reweighted inversely to their frequency so rare anomaly classes pull
//! their weight during training. The split search is exhaustive over all
//! six features and all distinct-value midpoints, so fitting is fully
//! deterministic; the seed is recorded in the model (and its checkpoint)
//! for provenance.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::anomaly::{validate_labels, FeatureVector};
use crate::error::{Error, Result};

const LEARNING_RATE: f64 = 0.1;
const CHECKPOINT_VERSION: u32 = 1;

/// One depth-1 regression tree: samples with `feature <= threshold` fall
/// left, the rest fall right. Leaf values already include the learning
/// rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    fn value(&self, x: &[f64; 6]) -> f64 {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

/// Additive stump model for one binary problem; `margin` feeds a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StumpEnsemble {
    /// Log-odds of the positive class in the training sample, so a model
    /// with no stumps predicts the empirical prior.
    base: f64,
    stumps: Vec<Stump>,
}

impl StumpEnsemble {
    fn margin(&self, x: &[f64; 6]) -> f64 {
        self.base + self.stumps.iter().map(|s| s.value(x)).sum::<f64>()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Boosted-stump classifier over the six node features. Binary problems
/// hold one ensemble (for class 1); multiclass problems hold one ensemble
/// per class, combined one-vs-rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyClassifier {
    n_classes: usize,
    models: Vec<StumpEnsemble>,
    rounds: usize,
    seed: u64,
}

impl AnomalyClassifier {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Per-class scores. Binary models return `[1 - p, p]` from the single
    /// ensemble; multiclass models return each ensemble's sigmoid, which is
    /// a per-class one-vs-rest score rather than a normalized distribution.
    pub fn class_scores(&self, features: &FeatureVector) -> Vec<f64> {
        let x = features.as_array();
        if self.n_classes == 2 {
            let p = sigmoid(self.models[0].margin(&x));
            vec![1.0 - p, p]
        } else {
            self.models.iter().map(|m| sigmoid(m.margin(&x))).collect()
        }
    }

    /// Predicted class: argmax of the per-class scores, ties to the
    /// smallest class id.
    pub fn predict(&self, features: &FeatureVector) -> usize {
        let scores = self.class_scores(features);
        let mut best = 0usize;
        for (c, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = c;
            }
        }
        best
    }
}

/// Per-sample state of one binary subproblem: 0/1 target and its class
/// weight.
struct BinaryProblem {
    targets: Vec<f64>,
    weights: Vec<f64>,
    prior: f64,
}

impl BinaryProblem {
    /// One-vs-rest problem for `class`. Both sides are weighted inversely
    /// to their frequency (a side with n_s of n samples gets n / (2 n_s)),
    /// which leaves the loss scale invariant under sample duplication.
    fn one_vs_rest(labels: &[usize], class: usize) -> Self {
        let n = labels.len() as f64;
        let n_pos = labels.iter().filter(|&&y| y == class).count() as f64;
        let w_pos = n / (2.0 * n_pos);
        let w_neg = n / (2.0 * (n - n_pos));
        let targets: Vec<f64> = labels
            .iter()
            .map(|&y| if y == class { 1.0 } else { 0.0 })
            .collect();
        let weights: Vec<f64> = targets
            .iter()
            .map(|&t| if t == 1.0 { w_pos } else { w_neg })
            .collect();
        BinaryProblem { targets, weights, prior: n_pos / n }
    }

    /// Weighted logistic loss of the given margins.
    fn loss(&self, margins: &[f64]) -> f64 {
        margins
            .iter()
            .zip(&self.targets)
            .zip(&self.weights)
            .map(|((&f, &y), &w)| {
                let p = sigmoid(f);
                -w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum()
    }
}

/// Sample orderings reused across rounds: for each feature, indices sorted
/// by feature value, plus the boundaries of equal-value groups.
struct SplitIndex {
    by_feature: Vec<Vec<usize>>,
}

impl SplitIndex {
    fn new(columns: &[[f64; 6]]) -> Self {
        let by_feature = (0..6)
            .map(|f| {
                let mut order: Vec<usize> = (0..columns.len()).collect();
                order.sort_by(|&a, &b| columns[a][f].total_cmp(&columns[b][f]));
                order
            })
            .collect();
        SplitIndex { by_feature }
    }
}

/// Fits one logistic-loss ensemble with Newton leaf steps, recording the
/// training loss after the base score and after every round.
fn fit_binary(
    columns: &[[f64; 6]],
    problem: &BinaryProblem,
    rounds: usize,
    index: &SplitIndex,
) -> (StumpEnsemble, Vec<f64>) {
    let n = columns.len();
    let base = (problem.prior / (1.0 - problem.prior)).ln();
    let mut margins = vec![base; n];
    let mut model = StumpEnsemble { base, stumps: Vec::with_capacity(rounds) };
    let mut trace = vec![problem.loss(&margins)];

    for _ in 0..rounds {
        // Weighted first and second derivatives of the logistic loss.
        let mut grad = vec![0.0f64; n];
        let mut hess = vec![0.0f64; n];
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = problem.weights[i] * (p - problem.targets[i]);
            hess[i] = problem.weights[i] * p * (1.0 - p);
        }
        // A side with no curvature gets no step. Together with the
        // value-group aggregation below this keeps every quantity exactly
        // linear in the sample multiset, so duplicating all samples
        // reproduces the fitted model bit for bit.
        let score = |g: f64, h: f64| if h > 0.0 { g * g / h } else { 0.0 };
        let leaf = |g: f64, h: f64| if h > 0.0 { -LEARNING_RATE * g / h } else { 0.0 };

        // Exhaustive scan: every feature, every midpoint between distinct
        // consecutive values. Strictly better gain wins, so ties keep the
        // first candidate in (feature, threshold) order.
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        for f in 0..6 {
            let order = &index.by_feature[f];
            // Aggregate equal feature values before summing.
            let mut groups: Vec<(f64, f64, f64)> = Vec::new();
            let mut pos = 0usize;
            while pos < n {
                let value = columns[order[pos]][f];
                let mut g_group = 0.0;
                let mut h_group = 0.0;
                while pos < n && columns[order[pos]][f] == value {
                    let i = order[pos];
                    g_group += grad[i];
                    h_group += hess[i];
                    pos += 1;
                }
                groups.push((value, g_group, h_group));
            }
            let g_total: f64 = groups.iter().map(|g| g.1).sum();
            let h_total: f64 = groups.iter().map(|g| g.2).sum();
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            for pair in groups.windows(2) {
                let (value, g_group, h_group) = pair[0];
                g_left += g_group;
                h_left += h_group;
                let gain = score(g_left, h_left) + score(g_total - g_left, h_total - h_left)
                    - score(g_total, h_total);
                if best.is_none_or(|(g, ..)| gain > g) {
                    let threshold = value + (pair[1].0 - value) / 2.0;
                    best = Some((
                        gain,
                        f,
                        threshold,
                        leaf(g_left, h_left),
                        leaf(g_total - g_left, h_total - h_left),
                    ));
                }
            }
        }
        let Some((gain, feature, threshold, left, right)) = best else {
            break; // every feature is constant; nothing to split on
        };
        if gain <= 0.0 {
            break; // the gradient is already balanced on every split
        }
        let stump = Stump { feature, threshold, left, right };
        for (i, margin) in margins.iter_mut().enumerate() {
            *margin += stump.value(&columns[i]);
        }
        model.stumps.push(stump);
        trace.push(problem.loss(&margins));
    }
    (model, trace)
}

/// Trains a boosted-stump classifier. Binary labels produce one logistic
/// ensemble, more classes one ensemble per class (one-vs-rest); samples are
/// weighted inversely to class frequency. With `rounds = 0` the model
/// predicts the training priors. Fitting is deterministic — the seed is
/// carried into the model for checkpoint provenance only.
pub fn fit_anomaly_classifier(
    features: &[FeatureVector],
    labels: &[usize],
    rounds: usize,
    seed: u64,
) -> Result<AnomalyClassifier> {
    fit_traced(features, labels, rounds, seed).map(|(model, _)| model)
}

/// As [`fit_anomaly_classifier`], also returning each ensemble's training
/// loss trace (entry 0 before any stump, then one entry per round kept).
pub(crate) fn fit_traced(
    features: &[FeatureVector],
    labels: &[usize],
    rounds: usize,
    seed: u64,
) -> Result<(AnomalyClassifier, Vec<Vec<f64>>)> {
    if features.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let n_classes = validate_labels(labels)?;
    if n_classes < 2 {
        return Err(Error::validation(
            "training needs at least two classes, got one",
        ));
    }
    for (i, f) in features.iter().enumerate() {
        if f.as_array().iter().any(|x| !x.is_finite()) {
            return Err(Error::validation(format!(
                "feature vector {i} contains a non-finite value"
            )));
        }
    }
    let columns: Vec<[f64; 6]> = features.iter().map(FeatureVector::as_array).collect();
    let index = SplitIndex::new(&columns);
    let problems: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
    let mut models = Vec::with_capacity(problems.len());
    let mut traces = Vec::with_capacity(problems.len());
    for class in problems {
        let problem = BinaryProblem::one_vs_rest(labels, class);
        let (model, trace) = fit_binary(&columns, &problem, rounds, &index);
        models.push(model);
        traces.push(trace);
    }
    Ok((AnomalyClassifier { n_classes, models, rounds, seed }, traces))
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    seed: u64,
    rounds: usize,
    learning_rate: f64,
    classifier: AnomalyClassifier,
}

/// Saves a classifier as JSON, embedding the training seed and
/// configuration alongside the model.
pub fn write_classifier<W: Write>(classifier: &AnomalyClassifier, w: W) -> Result<()> {
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        seed: classifier.seed,
        rounds: classifier.rounds,
        learning_rate: LEARNING_RATE,
        classifier: classifier.clone(),
    };
    serde_json::to_writer_pretty(w, &checkpoint)
        .map_err(|e| Error::validation(format!("cannot encode classifier checkpoint: {e}")))
}

/// Loads a classifier written by [`write_classifier`], refusing
/// checkpoints from a different format version.
pub fn read_classifier<R: BufRead>(r: R) -> Result<AnomalyClassifier> {
    let checkpoint: Checkpoint = serde_json::from_reader(r)
        .map_err(|e| Error::validation(format!("cannot decode classifier checkpoint: {e}")))?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(Error::validation(format!(
            "classifier checkpoint version {} is not supported (expected {})",
            checkpoint.version, CHECKPOINT_VERSION
        )));
    }
    Ok(checkpoint.classifier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::evaluate_anomaly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vector(values: [f64; 6]) -> FeatureVector {
        FeatureVector {
            communities: values[0],
            communities_per_degree: values[1],
            dispersion: values[2],
            degree_over_weight: values[3],
            cliqueness: values[4],
            starkness: values[5],
            isolated: false,
        }
    }

    fn noisy_sample(n: usize, seed: u64) -> (Vec<FeatureVector>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = usize::from(rng.random::<f64>() < 0.3);
            let shift = y as f64 * 0.8;
            features.push(vector([
                rng.random::<f64>() + shift,
                rng.random(),
                rng.random::<f64>() - shift,
                rng.random(),
                rng.random(),
                rng.random(),
            ]));
            labels.push(y);
        }
        (features, labels)
    }

    #[test]
    fn separable_single_feature_reaches_full_training_accuracy() {
        // f1 >= 3 if and only if anomalous; one stump can represent this.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let f1 = 1.0 + (i % 4) as f64; // 1, 2, 3, 4
            features.push(vector([f1, 0.3, 0.3, 1.0, 0.5, 0.5]));
            labels.push(usize::from(f1 >= 3.0));
        }
        let clf = fit_anomaly_classifier(&features, &labels, 50, 0).unwrap();
        for (f, &y) in features.iter().zip(&labels) {
            assert_eq!(clf.predict(f), y);
        }
        let eval = evaluate_anomaly(&clf, &features, &labels).unwrap();
        assert_eq!(eval.accuracy, 1.0);
        assert_eq!(eval.auc, crate::metrics::MetricValue::Value(1.0));
    }

    #[test]
    fn zero_rounds_predicts_training_priors() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            features.push(vector([i as f64, 0.0, 0.0, 0.0, 0.0, 0.0]));
            labels.push(usize::from(i >= 18)); // 90/10 split
        }
        let clf = fit_anomaly_classifier(&features, &labels, 0, 0).unwrap();
        let scores = clf.class_scores(&features[0]);
        assert!((scores[0] - 0.9).abs() < 1e-12);
        assert!((scores[1] - 0.1).abs() < 1e-12);
        // The prior model is the majority-class constant classifier.
        let eval = evaluate_anomaly(&clf, &features, &labels).unwrap();
        assert!((eval.accuracy - 0.9).abs() < 1e-12);
        assert_eq!(eval.per_class[1].recall, crate::metrics::MetricValue::Value(0.0));
        assert!(!eval.per_class[1].precision.is_defined());
    }

    #[test]
    fn training_loss_never_increases() {
        let (features, labels) = noisy_sample(150, 5);
        let (_, traces) = fit_traced(&features, &labels, 200, 0).unwrap();
        for trace in traces {
            assert!(trace.len() >= 2);
            for pair in trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-9);
            }
        }
    }

    #[test]
    fn duplicating_every_sample_changes_nothing() {
        let (features, labels) = noisy_sample(80, 9);
        let clf = fit_anomaly_classifier(&features, &labels, 60, 0).unwrap();
        let mut doubled_f = features.clone();
        doubled_f.extend_from_slice(&features);
        let mut doubled_y = labels.clone();
        doubled_y.extend_from_slice(&labels);
        let clf2 = fit_anomaly_classifier(&doubled_f, &doubled_y, 60, 0).unwrap();
        assert_eq!(clf, clf2);
    }

    #[test]
    fn multiclass_one_vs_rest_separates_three_classes() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let y = i % 3;
            features.push(vector([
                if y == 1 { 5.0 } else { 1.0 },
                if y == 2 { 5.0 } else { 1.0 },
                0.5,
                1.0,
                0.5,
                0.5,
            ]));
            labels.push(y);
        }
        let clf = fit_anomaly_classifier(&features, &labels, 50, 0).unwrap();
        assert_eq!(clf.n_classes(), 3);
        let eval = evaluate_anomaly(&clf, &features, &labels).unwrap();
        assert_eq!(eval.accuracy, 1.0);
        assert_eq!(eval.auc, crate::metrics::MetricValue::Value(1.0));
    }

    #[test]
    fn degenerate_label_sets_are_rejected() {
        let features = vec![vector([1.0; 6]); 4];
        assert!(fit_anomaly_classifier(&features, &[0, 0, 0, 0], 10, 0).is_err());
        // Sparse label ids (class 1 unused) are not dense.
        assert!(fit_anomaly_classifier(&features, &[0, 0, 2, 2], 10, 0).is_err());
        assert!(fit_anomaly_classifier(&features, &[0, 1], 10, 0).is_err());
    }

    #[test]
    fn constant_features_fall_back_to_the_prior() {
        let features = vec![vector([1.0; 6]); 10];
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i < 3)).collect();
        let clf = fit_anomaly_classifier(&features, &labels, 25, 0).unwrap();
        let scores = clf.class_scores(&features[0]);
        assert!((scores[1] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn checkpoint_round_trips_and_rejects_other_versions() {
        let (features, labels) = noisy_sample(60, 2);
        let clf = fit_anomaly_classifier(&features, &labels, 30, 42).unwrap();
        let mut buf = Vec::new();
        write_classifier(&clf, &mut buf).unwrap();
        let back = read_classifier(&buf[..]).unwrap();
        assert_eq!(back, clf);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"seed\": 42"));
        let tampered = text.replace("\"version\": 1", "\"version\": 9");
        assert!(read_classifier(tampered.as_bytes()).is_err());
    }
}
