//! Stage-wise logistic boosting with depth-one trees.
//!
//! Each stage fits a stump to the current negative gradients by least
//! squares, then replaces the two leaf means with Newton steps. A stage that
//! would raise the training loss has its leaves halved until it does not.

use std::collections::{BTreeMap, BTreeSet};

use super::model::{sigmoid, BoostedModel, FeatureRow, Split, Stump};
use super::SorError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub n_stumps: usize,
    pub learning_rate: f64,
    pub min_leaf_count: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            n_stumps: 200,
            learning_rate: 0.1,
            min_leaf_count: 5,
        }
    }
}

const HESSIAN_FLOOR: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;

pub fn train(rows: &[FeatureRow], params: &TrainParams) -> Result<BoostedModel, SorError> {
    train_with_history(rows, params).map(|(model, _)| model)
}

/// Like [`train`], also returning the mean training log-loss before the first
/// stage and after each accepted stage.
pub fn train_with_history(
    rows: &[FeatureRow],
    params: &TrainParams,
) -> Result<(BoostedModel, Vec<f64>), SorError> {
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(SorError::BadParams(format!(
            "learning_rate {} not in (0, 1]",
            params.learning_rate
        )));
    }
    if params.min_leaf_count == 0 {
        return Err(SorError::BadParams("min_leaf_count must be >= 1".into()));
    }
    let data = Dataset::new(rows)?;
    let n = data.labels.len() as f64;
    let positives = data.labels.iter().filter(|y| **y == 1.0).count();
    let prior = positives as f64 / n;
    let base_score = (prior / (1.0 - prior)).ln();

    let mut margins = vec![base_score; data.labels.len()];
    let mut history = vec![mean_log_loss(&margins, &data.labels)];
    let mut stumps = Vec::with_capacity(params.n_stumps);

    for _ in 0..params.n_stumps {
        let probs: Vec<f64> = margins.iter().map(|m| sigmoid(*m)).collect();
        let grads: Vec<f64> = data.labels.iter().zip(&probs).map(|(y, p)| y - p).collect();
        let hess: Vec<f64> = probs.iter().map(|p| p * (1.0 - p)).collect();

        let Some(candidate) = data.best_split(&grads, params.min_leaf_count) else {
            break;
        };
        let (mut left_value, mut right_value) = newton_leaves(&candidate.left, &grads, &hess);

        let current = *history.last().unwrap();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = apply(
                &margins,
                &candidate.left,
                left_value,
                right_value,
                params.learning_rate,
            );
            let loss = mean_log_loss(&trial, &data.labels);
            if loss <= current {
                accepted = Some((trial, loss));
                break;
            }
            left_value *= 0.5;
            right_value *= 0.5;
        }
        let Some((trial, loss)) = accepted else {
            break;
        };
        margins = trial;
        history.push(loss);
        stumps.push(Stump {
            feature: candidate.feature,
            split: candidate.split,
            left_value,
            right_value,
        });
    }

    Ok((
        BoostedModel {
            base_score,
            learning_rate: params.learning_rate,
            stumps,
        },
        history,
    ))
}

fn apply(margins: &[f64], left: &[bool], lv: f64, rv: f64, lr: f64) -> Vec<f64> {
    margins
        .iter()
        .zip(left)
        .map(|(m, l)| m + lr * if *l { lv } else { rv })
        .collect()
}

fn newton_leaves(left: &[bool], grads: &[f64], hess: &[f64]) -> (f64, f64) {
    let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
    for ((l, g), h) in left.iter().zip(grads).zip(hess) {
        if *l {
            gl += g;
            hl += h;
        } else {
            gr += g;
            hr += h;
        }
    }
    (gl / hl.max(HESSIAN_FLOOR), gr / hr.max(HESSIAN_FLOOR))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn mean_log_loss(margins: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(m, y)| {
            if *y == 1.0 {
                softplus(-m)
            } else {
                softplus(*m)
            }
        })
        .sum();
    total / labels.len() as f64
}

enum Column {
    /// Values plus row indices sorted by value.
    Numeric { values: Vec<f64>, order: Vec<usize> },
    /// Level index per row, and level names.
    Categorical {
        codes: Vec<usize>,
        levels: Vec<String>,
    },
}

struct Dataset {
    labels: Vec<f64>,
    /// Sorted by feature name; split ties resolve to the first column.
    columns: BTreeMap<String, Column>,
}

struct Candidate {
    feature: String,
    split: Split,
    gain: f64,
    left: Vec<bool>,
}

impl Dataset {
    fn new(rows: &[FeatureRow]) -> Result<Self, SorError> {
        if rows.len() < 2 {
            return Err(SorError::TooFewRows(rows.len()));
        }
        let numeric_names: BTreeSet<&String> = rows[0].numeric.keys().collect();
        let categorical_names: BTreeSet<&String> = rows[0].categorical.keys().collect();
        if numeric_names.is_empty() && categorical_names.is_empty() {
            return Err(SorError::NoFeatures);
        }
        let mut labels = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let label = row.label.ok_or(SorError::MissingLabel { row: i })?;
            labels.push(if label { 1.0 } else { 0.0 });
            if row.numeric.keys().collect::<BTreeSet<_>>() != numeric_names
                || row.categorical.keys().collect::<BTreeSet<_>>() != categorical_names
            {
                return Err(SorError::InconsistentFeatures {
                    row: i,
                    detail: "feature names differ from the first row".into(),
                });
            }
            if let Some((name, value)) = row.numeric.iter().find(|(_, v)| !v.is_finite()) {
                return Err(SorError::NonFinite {
                    feature: name.clone(),
                    value: *value,
                });
            }
        }
        let positives = labels.iter().filter(|y| **y == 1.0).count();
        if positives == 0 || positives == rows.len() {
            return Err(SorError::SingleClass {
                positives,
                rows: rows.len(),
            });
        }

        let mut columns = BTreeMap::new();
        for name in numeric_names {
            let values: Vec<f64> = rows.iter().map(|r| r.numeric[name]).collect();
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
            columns.insert(name.clone(), Column::Numeric { values, order });
        }
        for name in categorical_names {
            let levels: Vec<String> = rows
                .iter()
                .map(|r| r.categorical[name].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let codes = rows
                .iter()
                .map(|r| levels.binary_search(&r.categorical[name]).unwrap())
                .collect();
            columns.insert(name.clone(), Column::Categorical { codes, levels });
        }
        Ok(Self { labels, columns })
    }

    fn best_split(&self, grads: &[f64], min_leaf: usize) -> Option<Candidate> {
        let total: f64 = grads.iter().sum();
        let n = grads.len();
        let mut best: Option<Candidate> = None;
        let mut consider = |cand: Candidate| {
            // strict improvement only, so earlier (lower-named, lower-threshold) splits win ties
            let better = match &best {
                None => true,
                Some(b) => cand.gain > b.gain + 1e-12 * b.gain.abs().max(1e-300),
            };
            if better {
                best = Some(cand);
            }
        };
        for (name, column) in &self.columns {
            match column {
                Column::Numeric { values, order } => {
                    let mut sum_left = 0.0;
                    let mut best_here: Option<(f64, f64)> = None;
                    for k in 0..n - 1 {
                        sum_left += grads[order[k]];
                        let (lo, hi) = (values[order[k]], values[order[k + 1]]);
                        let count_left = k + 1;
                        if lo == hi || count_left < min_leaf || n - count_left < min_leaf {
                            continue;
                        }
                        let gain =
                            split_gain(sum_left, count_left, total - sum_left, n - count_left);
                        if best_here.is_none_or(|(g, _)| gain > g + 1e-12 * g.abs().max(1e-300)) {
                            best_here = Some((gain, lo + (hi - lo) / 2.0));
                        }
                    }
                    if let Some((gain, threshold)) = best_here {
                        let left = values.iter().map(|v| *v < threshold).collect();
                        consider(Candidate {
                            feature: name.clone(),
                            split: Split::Numeric { threshold },
                            gain,
                            left,
                        });
                    }
                }
                Column::Categorical { codes, levels } => {
                    if let Some((gain, set)) =
                        greedy_levels(codes, levels.len(), grads, total, min_leaf)
                    {
                        let left = codes.iter().map(|c| set.contains(c)).collect();
                        consider(Candidate {
                            feature: name.clone(),
                            split: Split::Categorical {
                                levels: set.iter().map(|c| levels[*c].clone()).collect(),
                            },
                            gain,
                            left,
                        });
                    }
                }
            }
        }
        best
    }
}

/// Reduction in squared error from splitting residuals into two means
/// (up to the constant total term).
fn split_gain(sum_l: f64, n_l: usize, sum_r: f64, n_r: usize) -> f64 {
    sum_l * sum_l / n_l as f64 + sum_r * sum_r / n_r as f64
}

/// Grows a left-branch level set one level at a time, always adding the level
/// that most improves the split, and keeps the best set along the path that
/// satisfies the leaf-size limit.
fn greedy_levels(
    codes: &[usize],
    n_levels: usize,
    grads: &[f64],
    total: f64,
    min_leaf: usize,
) -> Option<(f64, BTreeSet<usize>)> {
    if n_levels < 2 {
        return None;
    }
    let mut level_sum = vec![0.0; n_levels];
    let mut level_count = vec![0usize; n_levels];
    for (c, g) in codes.iter().zip(grads) {
        level_sum[*c] += g;
        level_count[*c] += 1;
    }
    let n = codes.len();
    let mut set = BTreeSet::new();
    let (mut sum_in, mut count_in) = (0.0, 0usize);
    let mut best: Option<(f64, BTreeSet<usize>)> = None;
    while set.len() + 1 < n_levels {
        let mut pick: Option<(f64, usize)> = None;
        for level in (0..n_levels).filter(|l| !set.contains(l)) {
            let s = sum_in + level_sum[level];
            let c = count_in + level_count[level];
            let gain = split_gain(s, c, total - s, n - c);
            if pick.is_none_or(|(g, _)| gain > g) {
                pick = Some((gain, level));
            }
        }
        let (gain, level) = pick?;
        set.insert(level);
        sum_in += level_sum[level];
        count_in += level_count[level];
        let valid = count_in >= min_leaf && n - count_in >= min_leaf;
        if valid && best.as_ref().is_none_or(|(g, _)| gain > *g) {
            best = Some((gain, set.clone()));
        }
    }
    best
}
