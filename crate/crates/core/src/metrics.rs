//! Shared evaluation metrics.
//!
//! Undefined situations (no predicted positives, metric of a class absent
//! from a fold, ...) surface as an explicit [`MetricValue::Undefined`]
//! marker — never a silent zero — so table averages can skip them instead
//! of absorbing fake values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A metric outcome: a finite value or an explicit "undefined" marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Value(f64),
    Undefined,
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(v),
            MetricValue::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, MetricValue::Value(_))
    }

    /// Renders as a decimal string, or `NA` when undefined; used by every
    /// report format so files stay byte-stable.
    pub fn render(self) -> String {
        match self {
            MetricValue::Value(v) => format!("{v}"),
            MetricValue::Undefined => "NA".to_string(),
        }
    }
}

impl From<Option<f64>> for MetricValue {
    fn from(v: Option<f64>) -> Self {
        match v {
            Some(x) => MetricValue::Value(x),
            None => MetricValue::Undefined,
        }
    }
}

/// One scored, labelled case of a binary problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryOutcome {
    pub label: bool,
    pub score: f64,
}

/// ROC AUC via the Mann-Whitney rank statistic: the probability that a
/// random positive outscores a random negative, ties counting half.
/// Errors when either class is missing.
pub fn roc_auc(outcomes: &[BinaryOutcome]) -> Result<f64> {
    let n_pos = outcomes.iter().filter(|o| o.label).count();
    let n_neg = outcomes.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation(format!(
            "roc auc needs both classes, got {n_pos} positives and {n_neg} negatives"
        )));
    }
    let mut idx: Vec<usize> = (0..outcomes.len()).collect();
    idx.sort_by(|&a, &b| outcomes[a].score.partial_cmp(&outcomes[b].score).unwrap());
    // average ranks over tie groups, accumulate positive ranks
    let mut rank_pos_sum = 0.0f64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && outcomes[idx[j + 1]].score == outcomes[idx[i]].score {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0; // 1-based ranks i+1 ..= j+1
        for &o in &idx[i..=j] {
            if outcomes[o].label {
                rank_pos_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_pos_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Precision, recall and F1 for one positive class of a labelled,
/// predicted sample. Precision is undefined with no predicted positives,
/// recall with no actual positives, and F1 whenever either is undefined or
/// both are zero.
pub fn precision_recall_f1(
    predicted: &[bool],
    actual: &[bool],
) -> Result<(MetricValue, MetricValue, MetricValue)> {
    if predicted.len() != actual.len() {
        return Err(Error::validation(format!(
            "prediction/label length mismatch: {} vs {}",
            predicted.len(),
            actual.len()
        )));
    }
    let tp = predicted.iter().zip(actual).filter(|&(&p, &a)| p && a).count() as f64;
    let fp = predicted.iter().zip(actual).filter(|&(&p, &a)| p && !a).count() as f64;
    let fn_ = predicted.iter().zip(actual).filter(|&(&p, &a)| !p && a).count() as f64;

    let precision = if tp + fp > 0.0 {
        MetricValue::Value(tp / (tp + fp))
    } else {
        MetricValue::Undefined
    };
    let recall = if tp + fn_ > 0.0 {
        MetricValue::Value(tp / (tp + fn_))
    } else {
        MetricValue::Undefined
    };
    let f1 = match (precision, recall) {
        (MetricValue::Value(p), MetricValue::Value(r)) if p + r > 0.0 => {
            MetricValue::Value(2.0 * p * r / (p + r))
        }
        _ => MetricValue::Undefined,
    };
    Ok((precision, recall, f1))
}

/// Root-mean-square error and mean absolute error over paired samples.
/// Errors on empty or mismatched inputs. RMSE >= MAE always holds.
pub fn rmse_mae(predicted: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != truth.len() {
        return Err(Error::validation(format!(
            "prediction/truth length mismatch: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::validation("rmse/mae of an empty sample is undefined"));
    }
    let n = predicted.len() as f64;
    let (mut sq, mut abs) = (0.0f64, 0.0f64);
    for (&p, &t) in predicted.iter().zip(truth) {
        let d = p - t;
        sq += d * d;
        abs += d.abs();
    }
    Ok(((sq / n).sqrt(), abs / n))
}

/// Fraction of positions where prediction equals label.
pub fn accuracy<T: PartialEq>(predicted: &[T], actual: &[T]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::validation(format!(
            "prediction/label length mismatch: {} vs {}",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::validation("accuracy of an empty sample is undefined"));
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Macro one-vs-rest AUC of a multiclass problem: mean of the per-class
/// binary AUCs, taken over classes that appear with both polarities (a
/// class covering all or none of the labels contributes nothing). Scores
/// are per-class, indexed `scores[class][sample]`. Undefined when no class
/// admits a binary AUC.
pub fn macro_ovr_auc(labels: &[usize], scores: &[Vec<f64>]) -> Result<MetricValue> {
    for (c, s) in scores.iter().enumerate() {
        if s.len() != labels.len() {
            return Err(Error::validation(format!(
                "scores for class {c} have length {}, expected {}",
                s.len(),
                labels.len()
            )));
        }
    }
    let mut aucs = Vec::new();
    for (c, class_scores) in scores.iter().enumerate() {
        let outcomes: Vec<BinaryOutcome> = labels
            .iter()
            .zip(class_scores)
            .map(|(&l, &s)| BinaryOutcome { label: l == c, score: s })
            .collect();
        if let Ok(a) = roc_auc(&outcomes) {
            aucs.push(a);
        }
    }
    if aucs.is_empty() {
        return Ok(MetricValue::Undefined);
    }
    Ok(MetricValue::Value(aucs.iter().sum::<f64>() / aucs.len() as f64))
}

/// One named metric observation, optionally scoped to a class and/or fold.
/// `None` means "aggregate": a row with `fold: None` is the cross-fold
/// summary, one with `class: None` the unscoped metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub value: MetricValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
}

impl MetricRow {
    pub fn new(metric: impl Into<String>, value: MetricValue) -> Self {
        MetricRow { metric: metric.into(), value, class: None, fold: None }
    }

    pub fn with_class(mut self, class: usize) -> Self {
        self.class = Some(class);
        self
    }

    pub fn with_fold(mut self, fold: usize) -> Self {
        self.fold = Some(fold);
        self
    }
}

/// Mean over the defined entries; undefined when none are.
pub fn mean_defined(values: &[MetricValue]) -> MetricValue {
    let defined: Vec<f64> = values.iter().filter_map(|v| v.value()).collect();
    if defined.is_empty() {
        MetricValue::Undefined
    } else {
        MetricValue::Value(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}
