//! Bag-level training objectives, all under one lower-is-better convention.
//!
//! Classification objectives (min-max, generalized mean, noisy-or) require
//! binary bag labels: a negative bag wants every sample's fused value pushed
//! toward 0, a positive bag wants at least one sample pushed toward 1. The
//! regression objective fits each bag's best sample to the bag's real-valued
//! label. The generalized-mean objective is evaluated in the log domain so
//! that large exponents neither overflow nor underflow.

use crate::bag::{Bag, BagSet};
use crate::choquet::{choquet_integral, ChoquetError};
use crate::measure::FuzzyMeasure;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Deviations are clamped here before negative exponents are applied, and
/// logarithm arguments are floored here; keeps every objective finite.
const EPS: f64 = 1e-12;

/// Errors from objective evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    /// Classification objectives need labels that are exactly 0 or 1.
    #[error("bag {bag_id:?} has non-binary label {label}")]
    NonBinaryLabel { bag_id: String, label: f64 },
    /// Generalized-mean exponents must satisfy `p1 >= 1` and `p2 <= -1`.
    #[error("invalid generalized-mean exponents p1={p1}, p2={p2} (need p1 >= 1, p2 <= -1)")]
    InvalidExponent { p1: f64, p2: f64 },
    /// The noisy-or kernel needs a positive variance.
    #[error("kernel variance must be positive, got {0}")]
    InvalidVariance(f64),
    /// Propagated integral failure (dimension mismatch).
    #[error(transparent)]
    Choquet(#[from] ChoquetError),
}

/// Which objective to optimize, with its parameters. Serialized into model
/// files under a `kind` tag matching the CLI names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectiveSpec {
    /// `Σ_neg max_i CI² + Σ_pos min_j (CI − 1)²`.
    MinMax,
    /// Soft min/max via generalized means with exponents `2·p1` (negative
    /// bags) and `2·p2` (positive bags).
    GenMean { p1: f64, p2: f64 },
    /// Negated log-likelihood with a Gaussian kernel and noisy-or positive
    /// bags.
    NoisyOr { mu: f64, sigma2: f64 },
    /// Regression: `Σ_b min_i (CI − d_b)²`.
    Micir,
}

impl ObjectiveSpec {
    /// Checks parameter ranges and the label requirements against `bags`.
    pub fn validate(&self, bags: &BagSet) -> Result<(), ObjectiveError> {
        match *self {
            ObjectiveSpec::MinMax => check_binary_labels(bags),
            ObjectiveSpec::GenMean { p1, p2 } => {
                check_exponents(p1, p2)?;
                check_binary_labels(bags)
            }
            ObjectiveSpec::NoisyOr { sigma2, .. } => {
                if !sigma2.is_finite() || sigma2 <= 0.0 {
                    return Err(ObjectiveError::InvalidVariance(sigma2));
                }
                check_binary_labels(bags)
            }
            // Bag construction already guarantees labels in [0, 1], which is
            // all the regression objective needs.
            ObjectiveSpec::Micir => Ok(()),
        }
    }
}

fn check_binary_labels(bags: &BagSet) -> Result<(), ObjectiveError> {
    for bag in bags.bags() {
        if !bag.has_binary_label() {
            return Err(ObjectiveError::NonBinaryLabel {
                bag_id: bag.id().to_string(),
                label: bag.label(),
            });
        }
    }
    Ok(())
}

fn check_exponents(p1: f64, p2: f64) -> Result<(), ObjectiveError> {
    if !p1.is_finite() || !p2.is_finite() || p1 < 1.0 || p2 > -1.0 {
        return Err(ObjectiveError::InvalidExponent { p1, p2 });
    }
    Ok(())
}

/// `log((1/N) Σ exp(v))` computed stably; `-inf` inputs contribute zero mass.
fn log_mean_exp(vals: &[f64]) -> f64 {
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = vals.iter().map(|v| (v - hi).exp()).sum();
    hi + sum.ln() - (vals.len() as f64).ln()
}

// --- Per-bag terms over precomputed fused values -------------------------
//
// Every public objective and the optimizer's cached evaluation path funnel
// through these, so the two routes cannot drift apart.

fn minmax_term(label_positive: bool, cis: &[f64]) -> f64 {
    if label_positive {
        cis.iter()
            .map(|ci| (ci - 1.0) * (ci - 1.0))
            .fold(f64::INFINITY, f64::min)
    } else {
        cis.iter().map(|ci| ci * ci).fold(0.0, f64::max)
    }
}

fn genmean_term(label_positive: bool, cis: &[f64], p1: f64, p2: f64) -> f64 {
    if label_positive {
        // [ (1/N) Σ |CI-1|^(2·p2) ]^(1/p2) with the deviation clamped away
        // from zero before the negative exponent.
        let logs: Vec<f64> = cis
            .iter()
            .map(|ci| 2.0 * p2 * (ci - 1.0).abs().max(EPS).ln())
            .collect();
        (log_mean_exp(&logs) / p2).exp()
    } else {
        // [ (1/N) Σ CI^(2·p1) ]^(1/p1); CI = 0 contributes zero mass.
        let logs: Vec<f64> = cis.iter().map(|ci| 2.0 * p1 * ci.max(0.0).ln()).collect();
        let lme = log_mean_exp(&logs);
        if lme == f64::NEG_INFINITY {
            0.0
        } else {
            (lme / p1).exp()
        }
    }
}

/// Unnormalized Gaussian kernel in `(0, 1]`, peaking at `x = mu`.
fn gauss_kernel(x: f64, mu: f64, sigma2: f64) -> f64 {
    (-(x - mu) * (x - mu) / (2.0 * sigma2)).exp()
}

fn noisyor_term(label_positive: bool, cis: &[f64], mu: f64, sigma2: f64) -> f64 {
    if label_positive {
        // ln(1 − Π_j (1 − k_j)): near zero when some sample sits at the
        // kernel peak, strongly negative when none does.
        let prod: f64 = cis
            .iter()
            .map(|&ci| 1.0 - gauss_kernel(ci, mu, sigma2))
            .product();
        -((1.0 - prod).max(EPS).ln())
    } else {
        // Σ_i ln(1 − k_i): each negative sample near the peak is penalized.
        -cis.iter()
            .map(|&ci| (1.0 - gauss_kernel(ci, mu, sigma2)).max(EPS).ln())
            .sum::<f64>()
    }
}

fn micir_term(label: f64, cis: &[f64]) -> f64 {
    cis.iter()
        .map(|ci| (ci - label) * (ci - label))
        .fold(f64::INFINITY, f64::min)
}

/// Evaluates `spec` over per-bag `(label, fused values)` pairs. Shared by
/// the public objective functions and the optimizer's cached path; callers
/// must have validated labels/parameters via [`ObjectiveSpec::validate`].
pub(crate) fn objective_from_cis(spec: &ObjectiveSpec, terms: &[(f64, Vec<f64>)]) -> f64 {
    terms
        .iter()
        .map(|(label, cis)| match *spec {
            ObjectiveSpec::MinMax => minmax_term(*label == 1.0, cis),
            ObjectiveSpec::GenMean { p1, p2 } => genmean_term(*label == 1.0, cis, p1, p2),
            ObjectiveSpec::NoisyOr { mu, sigma2 } => {
                noisyor_term(*label == 1.0, cis, mu, sigma2)
            }
            ObjectiveSpec::Micir => micir_term(*label, cis),
        })
        .sum()
}

fn bag_cis(measure: &FuzzyMeasure, bag: &Bag) -> Result<Vec<f64>, ObjectiveError> {
    bag.instances()
        .iter()
        .map(|x| choquet_integral(measure, x).map_err(ObjectiveError::from))
        .collect()
}

fn evaluate_checked(
    spec: &ObjectiveSpec,
    measure: &FuzzyMeasure,
    bags: &BagSet,
) -> Result<f64, ObjectiveError> {
    spec.validate(bags)?;
    let mut terms = Vec::with_capacity(bags.len());
    for bag in bags.bags() {
        terms.push((bag.label(), bag_cis(measure, bag)?));
    }
    Ok(objective_from_cis(spec, &terms))
}

/// Min-max objective: negative bags contribute their worst (largest) squared
/// fused value, positive bags their best squared deviation from 1. Zero
/// exactly when every negative sample fuses to 0 and every positive bag has
/// a sample fusing to 1.
pub fn minmax_objective(measure: &FuzzyMeasure, bags: &BagSet) -> Result<f64, ObjectiveError> {
    evaluate_checked(&ObjectiveSpec::MinMax, measure, bags)
}

/// Generalized-mean relaxation of [`minmax_objective`]: the hard max/min are
/// replaced by power means with exponents `2·p1` / `2·p2`, recovering the
/// hard version as `p1 → ∞`, `p2 → −∞` (up to the `N^(−1/p)` mass factor of
/// the mean). Requires `p1 >= 1`, `p2 <= -1`.
pub fn genmean_objective(
    measure: &FuzzyMeasure,
    bags: &BagSet,
    p1: f64,
    p2: f64,
) -> Result<f64, ObjectiveError> {
    evaluate_checked(&ObjectiveSpec::GenMean { p1, p2 }, measure, bags)
}

/// Noisy-or objective: negated log-likelihood where each sample's fused
/// value is scored by an unnormalized Gaussian kernel centred at `mu`.
/// Negative samples near the peak are penalized individually; a positive bag
/// is satisfied when at least one sample sits near the peak.
pub fn noisyor_objective(
    measure: &FuzzyMeasure,
    bags: &BagSet,
    mu: f64,
    sigma2: f64,
) -> Result<f64, ObjectiveError> {
    evaluate_checked(&ObjectiveSpec::NoisyOr { mu, sigma2 }, measure, bags)
}

/// Regression objective: each bag contributes the squared gap between its
/// label and the closest fused value, `Σ_b min_i (CI_i − d_b)²`.
pub fn micir_objective(measure: &FuzzyMeasure, bags: &BagSet) -> Result<f64, ObjectiveError> {
    evaluate_checked(&ObjectiveSpec::Micir, measure, bags)
}

/// Evaluates whichever objective `spec` names.
pub fn evaluate_objective(
    spec: &ObjectiveSpec,
    measure: &FuzzyMeasure,
    bags: &BagSet,
) -> Result<f64, ObjectiveError> {
    evaluate_checked(spec, measure, bags)
}

/// Rewrites a binary-labelled bag set for regression training: every
/// instance of a negative bag becomes its own singleton bag with label 0.0
/// (each such sample is individually known to be background), while positive
/// bags pass through with label 1.0. Singleton bags get ids derived from the
/// source bag (`id#index`).
pub fn reconstruct_bags_for_classification(
    bags: &BagSet,
) -> Result<BagSet, ObjectiveError> {
    check_binary_labels(bags)?;
    let mut out = Vec::new();
    for bag in bags.bags() {
        if bag.label() == 1.0 {
            out.push(bag.clone());
        } else {
            for (i, inst) in bag.instances().iter().enumerate() {
                let singleton = Bag::new(format!("{}#{i}", bag.id()), 0.0, vec![inst.clone()])
                    .expect("singleton from a valid bag is valid");
                out.push(singleton);
            }
        }
    }
    Ok(BagSet::new(bags.num_sources(), out).expect("widths unchanged"))
}
