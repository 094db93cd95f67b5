//! Metrics and prediction helpers: relative error, root-mean-square error,
//! receiver-operating-characteristic curves with a false-alarm cap, and
//! fused scores at instance and bag level.

use crate::bag::BagSet;
use crate::choquet::{choquet_integral, ChoquetError};
use crate::measure::FuzzyMeasure;
use thiserror::Error;

/// Errors from metric computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    /// Prediction and truth lists disagree in length.
    #[error("length mismatch: {predicted} predictions vs {truth} truth values")]
    LengthMismatch { predicted: usize, truth: usize },
    /// Metrics over nothing are undefined.
    #[error("cannot compute a metric over empty input")]
    EmptyInput,
    /// Every input value must be a real number.
    #[error("non-finite value {0} in metric input")]
    NonFinite(f64),
    /// Curve labels must be exactly 0 or 1.
    #[error("label {0} is not binary")]
    NonBinaryLabel(f64),
    /// A ROC curve needs both classes present.
    #[error("cannot sweep a ROC curve over a single class")]
    SingleClass,
    /// False-alarm cap outside `(0, 1]`.
    #[error("false-alarm cap {0} must lie in (0, 1]")]
    InvalidCap(f64),
    /// Fusion failure while predicting.
    #[error(transparent)]
    Choquet(#[from] ChoquetError),
}

/// How per-value deviations are scaled before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelativeErrorKind {
    /// Mean absolute deviation: labels are class indicators, so deviations
    /// are already on a common scale.
    Classification,
    /// Mean deviation relative to the truth magnitude; a zero truth value
    /// falls back to the absolute deviation for that entry.
    Regression,
}

fn check_paired(predicted: &[f64], truth: &[f64]) -> Result<(), EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(&bad) = predicted.iter().chain(truth.iter()).find(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(bad));
    }
    Ok(())
}

/// Mean deviation between predictions and truth, absolute or scaled by the
/// truth magnitude depending on `kind`.
pub fn relative_error(
    predicted: &[f64],
    truth: &[f64],
    kind: RelativeErrorKind,
) -> Result<f64, EvalError> {
    check_paired(predicted, truth)?;
    let total: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let dev = (t - p).abs();
            match kind {
                RelativeErrorKind::Classification => dev,
                RelativeErrorKind::Regression => {
                    if *t == 0.0 {
                        dev
                    } else {
                        dev / t.abs()
                    }
                }
            }
        })
        .sum();
    Ok(total / predicted.len() as f64)
}

/// Root of the mean squared deviation between predictions and truth.
pub fn rmse(predicted: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check_paired(predicted, truth)?;
    let total: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Ok((total / predicted.len() as f64).sqrt())
}

/// Receiver-operating-characteristic polyline as `(false_alarm_rate,
/// detection_rate)` points, from `(0, 0)` to `(1, 1)`. The threshold sweeps
/// the scores in descending order; samples with tied scores enter in a
/// single step, so the curve is invariant under strictly increasing
/// transforms of the scores.
pub fn roc_points(scores: &[f64], labels: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
    check_paired(scores, labels)?;
    if let Some(&bad) = labels.iter().find(|l| **l != 0.0 && **l != 1.0) {
        return Err(EvalError::NonBinaryLabel(bad));
    }
    let num_positive = labels.iter().filter(|&&l| l == 1.0).count();
    let num_negative = labels.len() - num_positive;
    if num_positive == 0 || num_negative == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((
            fp as f64 / num_negative as f64,
            tp as f64 / num_positive as f64,
        ));
        i = j;
    }
    Ok(points)
}

/// Area under the ROC curve from a false-alarm rate of 0 up to `far_cap`,
/// by trapezoidal integration with linear interpolation at the cap. The
/// area is not rescaled: a perfect detector scores exactly `far_cap`, and
/// chance-level scores sit near `far_cap² / 2`.
pub fn roc_auc_capped(
    scores: &[f64],
    labels: &[f64],
    far_cap: f64,
) -> Result<f64, EvalError> {
    if !far_cap.is_finite() || far_cap <= 0.0 || far_cap > 1.0 {
        return Err(EvalError::InvalidCap(far_cap));
    }
    let points = roc_points(scores, labels)?;
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (f0, p0) = pair[0];
        let (f1, p1) = pair[1];
        if f1 <= far_cap {
            area += (f1 - f0) * (p0 + p1) / 2.0;
        } else if f0 < far_cap {
            let t = (far_cap - f0) / (f1 - f0);
            let p_cap = p0 + t * (p1 - p0);
            area += (far_cap - f0) * (p0 + p_cap) / 2.0;
            break;
        } else {
            break;
        }
    }
    Ok(area)
}

/// How a bag's instance scores collapse into one bag score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    Max,
    Min,
}

impl Aggregation {
    fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Max => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Min => values.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Fused score of every instance, bag by bag, in the bags' order.
pub fn predict_instances(
    measure: &FuzzyMeasure,
    bags: &BagSet,
) -> Result<Vec<Vec<f64>>, EvalError> {
    bags.bags()
        .iter()
        .map(|bag| {
            bag.instances()
                .iter()
                .map(|inst| Ok(choquet_integral(measure, inst)?))
                .collect()
        })
        .collect()
}

/// One aggregated fused score per bag, in the bags' order.
pub fn predict_bags(
    measure: &FuzzyMeasure,
    bags: &BagSet,
    aggregation: Aggregation,
) -> Result<Vec<f64>, EvalError> {
    Ok(predict_instances(measure, bags)?
        .iter()
        .map(|scores| aggregation.apply(scores))
        .collect())
}
