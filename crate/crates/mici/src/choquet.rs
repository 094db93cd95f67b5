//! The discrete Choquet integral and its sorting machinery.
//!
//! For an instance with source confidences `h_1..h_m` and a fuzzy measure
//! `g`, the integral is `Σ_k (h_(k) - h_(k+1)) · g(A_k)` where `h_(k)` is the
//! k-th largest confidence (`h_(m+1) = 0`) and `A_k` is the set of the `k`
//! sources with the largest confidences. Ties are broken by ascending source
//! index, which fixes the chain `A_1 ⊂ A_2 ⊂ … ⊂ A_m` deterministically; the
//! integral's value does not depend on the tie order because tied gaps are
//! zero.

use crate::bag::BagSet;
use crate::measure::FuzzyMeasure;
use thiserror::Error;

/// Errors from integral evaluation and instance construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChoquetError {
    /// A confidence outside `[0, 1]` (or not finite).
    #[error("confidence at index {index} is {value}, outside [0, 1]")]
    Confidence { index: usize, value: f64 },
    /// An instance must have at least one source.
    #[error("an instance needs at least one confidence value")]
    Empty,
    /// Instance width does not match the measure's source count.
    #[error("instance has {got} sources but the measure expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    /// The subset-enumeration oracle is exponential and capped.
    #[error("the Möbius oracle supports at most {max} sources, got {got}")]
    OracleTooWide { max: usize, got: usize },
}

/// One sample: a vector of per-source confidences, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance(Vec<f64>);

impl Instance {
    /// Validates every confidence into `[0, 1]`.
    pub fn new(confidences: Vec<f64>) -> Result<Self, ChoquetError> {
        if confidences.is_empty() {
            return Err(ChoquetError::Empty);
        }
        for (index, &value) in confidences.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(ChoquetError::Confidence { index, value });
            }
        }
        Ok(Instance(confidences))
    }

    /// The per-source confidences.
    pub fn confidences(&self) -> &[f64] {
        &self.0
    }

    /// Number of sources.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false: construction rejects empty instances.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Source indices sorted by descending confidence, ties by ascending index.
fn sorted_order(confidences: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]).then(a.cmp(&b)));
    order
}

/// The nested chain of subsets `A_1 ⊂ A_2 ⊂ … ⊂ A_m` an instance induces,
/// as bitmasks: `A_k` holds the `k` sources with the largest confidences
/// (ties by ascending source index). `A_m` is always the full set.
pub fn sort_chain(instance: &Instance) -> Vec<u32> {
    let mut mask = 0u32;
    sorted_order(instance.confidences())
        .into_iter()
        .map(|i| {
            mask |= 1 << i;
            mask
        })
        .collect()
}

/// The Choquet integral of `instance` with respect to `measure`.
///
/// The result is bounded by the smallest and largest confidence; for the
/// measure that is 1 everywhere it reduces to the maximum, for the measure
/// that is 0 except on the full set it reduces to the minimum, and for an
/// additive measure it reduces to the weighted mean.
pub fn choquet_integral(
    measure: &FuzzyMeasure,
    instance: &Instance,
) -> Result<f64, ChoquetError> {
    if instance.len() != measure.num_sources() {
        return Err(ChoquetError::DimensionMismatch {
            expected: measure.num_sources(),
            got: instance.len(),
        });
    }
    let conf = instance.confidences();
    let order = sorted_order(conf);
    let mut mask = 0u32;
    let mut total = 0.0;
    for (k, &i) in order.iter().enumerate() {
        mask |= 1 << i;
        let next = if k + 1 < order.len() {
            conf[order[k + 1]]
        } else {
            0.0
        };
        total += (conf[i] - next) * measure.value(mask);
    }
    Ok(total)
}

/// How often each lattice element appears in the sort chains of a training
/// set. `counts[k - 1]` is the number of instances whose chain contains the
/// subset with bitmask `k`; the full set appears in every chain.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageCounts {
    num_sources: usize,
    counts: Vec<u64>,
}

impl UsageCounts {
    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    /// Dense counts, indexed like the measure's value array.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Count for one subset bitmask.
    pub fn count(&self, subset: u32) -> u64 {
        self.counts[subset as usize - 1]
    }

    #[cfg(test)]
    pub(crate) fn from_raw(num_sources: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), (1usize << num_sources) - 1);
        UsageCounts {
            num_sources,
            counts,
        }
    }
}

/// Tallies, over every instance in every bag, which lattice elements the
/// instance's sort chain touches. Computed once per training set: the chains
/// depend only on the data, never on the measure being optimized.
pub fn usage_counts(bags: &BagSet) -> UsageCounts {
    let mut counts = vec![0u64; (1usize << bags.num_sources()) - 1];
    for bag in bags.bags() {
        for instance in bag.instances() {
            for mask in sort_chain(instance) {
                counts[mask as usize - 1] += 1;
            }
        }
    }
    UsageCounts {
        num_sources: bags.num_sources(),
        counts,
    }
}

/// Independent evaluation route for the Choquet integral via the Möbius
/// transform: `μ(A) = Σ_{B ⊆ A} (−1)^{|A\B|} g(B)`, then
/// `CI = Σ_{A ≠ ∅} μ(A) · min_{i ∈ A} h_i`.
///
/// This shares no code with [`choquet_integral`] (no sorting, no chains) and
/// exists as a cross-check; the subset enumeration costs `O(3^m)`, so it is
/// capped at 12 sources.
pub fn mobius_choquet_oracle(
    measure: &FuzzyMeasure,
    instance: &Instance,
) -> Result<f64, ChoquetError> {
    const MAX_ORACLE_SOURCES: usize = 12;
    if measure.num_sources() > MAX_ORACLE_SOURCES {
        return Err(ChoquetError::OracleTooWide {
            max: MAX_ORACLE_SOURCES,
            got: measure.num_sources(),
        });
    }
    if instance.len() != measure.num_sources() {
        return Err(ChoquetError::DimensionMismatch {
            expected: measure.num_sources(),
            got: instance.len(),
        });
    }
    let conf = instance.confidences();
    let full = measure.full_set();
    let mut total = 0.0;
    for a in 1..=full {
        let mut mobius = 0.0;
        // Walk every non-empty subset b of a via the standard mask-descent.
        let mut b = a;
        while b != 0 {
            let sign = if (a ^ b).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            mobius += sign * measure.value(b);
            b = (b - 1) & a;
        }
        let min_conf = (0..measure.num_sources())
            .filter(|&i| a & (1 << i) != 0)
            .map(|i| conf[i])
            .fold(f64::INFINITY, f64::min);
        total += mobius * min_conf;
    }
    Ok(total)
}

/// Per-instance precomputation for repeated integral evaluation: the sort
/// chain plus the descending-confidence gaps. With these fixed, the integral
/// against any measure is a single dot product.
#[derive(Debug, Clone)]
pub(crate) struct CachedInstance {
    chain: Vec<u32>,
    gaps: Vec<f64>,
}

impl CachedInstance {
    pub(crate) fn new(instance: &Instance) -> Self {
        let conf = instance.confidences();
        let order = sorted_order(conf);
        let mut mask = 0u32;
        let mut chain = Vec::with_capacity(order.len());
        let mut gaps = Vec::with_capacity(order.len());
        for (k, &i) in order.iter().enumerate() {
            mask |= 1 << i;
            chain.push(mask);
            let next = if k + 1 < order.len() {
                conf[order[k + 1]]
            } else {
                0.0
            };
            gaps.push(conf[i] - next);
        }
        CachedInstance { chain, gaps }
    }

    /// The integral of the cached instance against `measure`.
    pub(crate) fn integral(&self, measure: &FuzzyMeasure) -> f64 {
        self.chain
            .iter()
            .zip(&self.gaps)
            .map(|(&mask, &gap)| gap * measure.value(mask))
            .sum()
    }
}
