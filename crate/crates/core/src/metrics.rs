//! Binary-classification metrics used to grade outage-risk models.
//!
//! ROC AUC uses the Mann-Whitney formulation with half credit for ties,
//! PRC AUC is average precision over distinct score cut-points, and the
//! composite final metric weights them 0.4 / 0.3 / 0.3 with F1.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FM_WEIGHT_ROC_AUC: f64 = 0.4;
pub const FM_WEIGHT_F1: f64 = 0.3;
pub const FM_WEIGHT_PRC_AUC: f64 = 0.3;

/// Cut-off used for F1 when none is given.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("label {0} is not binary")]
    BadLabel(i64),
    #[error("ROC AUC needs both classes: {positives} positive, {negatives} negative samples")]
    SingleClass { positives: usize, negatives: usize },
    #[error("PRC AUC needs at least one positive sample")]
    NoPositives,
    #[error("no samples")]
    Empty,
    #[error("{name} = {value} is outside [0, 1]")]
    InputOutOfRange { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub label: bool,
    pub score: f64,
}

impl LabeledScore {
    pub fn new(label: bool, score: f64) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(MetricsError::ScoreOutOfRange(score));
        }
        Ok(Self { label, score })
    }

    /// From a 0/1 integer label.
    pub fn from_int(label: i64, score: f64) -> Result<Self, MetricsError> {
        match label {
            0 => Self::new(false, score),
            1 => Self::new(true, score),
            other => Err(MetricsError::BadLabel(other)),
        }
    }
}

/// Zip parallel label/score slices into samples.
pub fn samples(labels: &[u8], scores: &[f64]) -> Result<Vec<LabeledScore>, MetricsError> {
    labels
        .iter()
        .zip(scores)
        .map(|(l, s)| LabeledScore::from_int(i64::from(*l), *s))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub roc_auc: f64,
    pub f1: f64,
    pub prc_auc: f64,
    pub fm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn by_score_desc(a: &LabeledScore, b: &LabeledScore) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal)
}

/// Tie groups in descending score order, as (positives, negatives) per group.
fn tie_groups(samples: &[LabeledScore]) -> Vec<(usize, usize)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(by_score_desc);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].score;
        let (mut pos, mut neg) = (0, 0);
        while i < sorted.len() && sorted[i].score == score {
            if sorted[i].label {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        groups.push((pos, neg));
    }
    groups
}

/// Probability that a random positive outscores a random negative, ties at half.
pub fn roc_auc(samples: &[LabeledScore]) -> Result<f64, MetricsError> {
    let positives = samples.iter().filter(|s| s.label).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass {
            positives,
            negatives,
        });
    }
    // walk from the top score down; each negative beats nothing above it
    let mut negatives_below = negatives as f64;
    let mut concordant = 0.0;
    for (pos, neg) in tie_groups(samples) {
        negatives_below -= neg as f64;
        concordant += pos as f64 * (negatives_below + 0.5 * neg as f64);
    }
    Ok(concordant / (positives as f64 * negatives as f64))
}

/// Confusion-count metrics at a fixed cut-off; a sample is predicted positive
/// iff its score is at least `threshold`. Undefined ratios are reported as 0.
pub fn precision_recall_f1(
    samples: &[LabeledScore],
    threshold: f64,
) -> Result<PrecisionRecall, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for s in samples {
        match (s.score >= threshold, s.label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PrecisionRecall {
        precision,
        recall,
        f1,
    })
}

/// Average precision: step integral of precision over recall, one step per
/// distinct score.
pub fn prc_auc(samples: &[LabeledScore]) -> Result<f64, MetricsError> {
    let positives = samples.iter().filter(|s| s.label).count();
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    let (mut tp, mut predicted) = (0usize, 0usize);
    let mut area = 0.0;
    for (pos, neg) in tie_groups(samples) {
        tp += pos;
        predicted += pos + neg;
        if pos > 0 {
            area += (tp as f64 / predicted as f64) * (pos as f64 / positives as f64);
        }
    }
    Ok(area)
}

pub fn final_metric(roc_auc: f64, f1: f64, prc_auc: f64) -> Result<f64, MetricsError> {
    for (name, value) in [("roc_auc", roc_auc), ("f1", f1), ("prc_auc", prc_auc)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(MetricsError::InputOutOfRange { name, value });
        }
    }
    Ok(FM_WEIGHT_ROC_AUC * roc_auc + FM_WEIGHT_F1 * f1 + FM_WEIGHT_PRC_AUC * prc_auc)
}

impl MetricReport {
    /// Assemble a report from already-computed component metrics.
    pub fn from_components(roc_auc: f64, f1: f64, prc_auc: f64) -> Result<Self, MetricsError> {
        let fm = final_metric(roc_auc, f1, prc_auc)?;
        Ok(Self {
            roc_auc,
            f1,
            prc_auc,
            fm,
        })
    }
}

pub fn metric_report(
    samples: &[LabeledScore],
    threshold: f64,
) -> Result<MetricReport, MetricsError> {
    let roc = roc_auc(samples)?;
    let pr = precision_recall_f1(samples, threshold)?;
    let ap = prc_auc(samples)?;
    MetricReport::from_components(roc, pr.f1, ap)
}
