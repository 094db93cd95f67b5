//! Sampling-based evolutionary optimizer for fuzzy measures.
//!
//! Each generation mutates every population member (a small single-element
//! mutation with probability `small_rate`, otherwise a large all-element
//! sweep), pools parents and children, and selects the next generation by
//! elitism on the better half-quota plus weighted multinomial sampling
//! without replacement on the rest. Element choice for the small mutation is
//! driven by usage counts: elements that appear in many instances' sort
//! chains are resampled more often. A legacy baseline that always resamples
//! the widest-interval element uniformly is kept for runtime comparisons.
//!
//! Determinism: every random decision draws from a stream derived from
//! `(seed, iteration, member)`, so results are bitwise reproducible for a
//! given seed regardless of how many threads evaluate objectives.

use crate::bag::BagSet;
use crate::choquet::{usage_counts, CachedInstance, UsageCounts};
use crate::measure::{FuzzyMeasure, InitMode, MeasureError};
use crate::objectives::{objective_from_cis, ObjectiveError, ObjectiveSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::time::Instant;
use thiserror::Error;

/// Errors from configuration and training.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    /// Truncation interval with `lower > upper` (or NaN bounds).
    #[error("invalid truncation interval [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },
    /// Non-positive or non-finite standard deviation.
    #[error("standard deviation must be positive and finite, got {0}")]
    InvalidStd(f64),
    /// Parent/child/objective array sizes disagree.
    #[error("selection pool mismatch: {parents} parents, {children} children, {objectives} objectives")]
    SizeMismatch {
        parents: usize,
        children: usize,
        objectives: usize,
    },
    /// Bad optimizer configuration.
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    /// Training needs at least one bag.
    #[error("cannot train on an empty bag set")]
    EmptyBagSet,
    /// Objective-level failure (labels, parameters, dimensions).
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    /// Measure-level failure during initialization.
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Which mutation scheme drives the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Usage-count-driven small/large mutations (the default scheme).
    Me,
    /// Legacy baseline: always resample the single widest-interval element,
    /// uniformly within its interval.
    Vi,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Population size `P` (even, at least 2).
    pub population: usize,
    /// Iteration cap `I`.
    pub max_iterations: u32,
    /// Stop once one generation improves the best objective by no more than
    /// this.
    pub fitness_threshold: f64,
    /// Probability of a small (single-element) mutation; otherwise large.
    pub small_rate: f64,
    /// Mutation scheme.
    pub sampler: Sampler,
    /// Seed for the whole run.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            population: 30,
            max_iterations: 5000,
            fitness_threshold: 1e-4,
            small_rate: 0.8,
            sampler: Sampler::Me,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<(), OptimizerError> {
        if self.population < 2 || self.population % 2 != 0 {
            return Err(OptimizerError::InvalidConfig(format!(
                "population must be even and at least 2, got {}",
                self.population
            )));
        }
        if !self.fitness_threshold.is_finite() || self.fitness_threshold < 0.0 {
            return Err(OptimizerError::InvalidConfig(format!(
                "fitness threshold must be a non-negative number, got {}",
                self.fitness_threshold
            )));
        }
        if !self.small_rate.is_finite() || !(0.0..=1.0).contains(&self.small_rate) {
            return Err(OptimizerError::InvalidConfig(format!(
                "small-mutation rate must lie in [0, 1], got {}",
                self.small_rate
            )));
        }
        Ok(())
    }
}

/// One point of the best-so-far trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Iteration number (0 is the evaluation of the initial population).
    pub iteration: u32,
    /// Best objective seen so far.
    pub best_objective: f64,
    /// Milliseconds since training started.
    pub wallclock_ms: f64,
}

/// The result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Best measure found.
    pub measure: FuzzyMeasure,
    /// Its objective value.
    pub best_objective: f64,
    /// Objective the run optimized.
    pub objective: ObjectiveSpec,
    /// Best-so-far series, non-increasing, one entry for the initial
    /// population plus one per executed iteration.
    pub trace: Vec<IterationRecord>,
    /// Iterations actually executed (0 when `max_iterations` was 0).
    pub iterations_run: u32,
    /// Configuration echo.
    pub config: OptimizerConfig,
}

/// RNG stream for one `(iteration, member)` cell of a run. Iteration 0 is
/// population initialization; member index `population` is the selection
/// stream of that iteration.
fn stream_rng(seed: u64, iteration: u32, member: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | member as u64);
    rng
}

/// Draws from a Gaussian `N(mean, std²)` truncated to `[lower, upper]`, via
/// inverse-CDF sampling: uniform in `[Φ(a), Φ(b)]`, then back through `Φ⁻¹`.
/// A degenerate interval returns its single point without consuming
/// randomness for the shape.
pub fn sample_truncated_gaussian<R: Rng + ?Sized>(
    mean: f64,
    std: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64, OptimizerError> {
    if !(lower <= upper) {
        return Err(OptimizerError::InvalidInterval { lower, upper });
    }
    if lower == upper {
        return Ok(lower);
    }
    if !std.is_finite() || std <= 0.0 {
        return Err(OptimizerError::InvalidStd(std));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let lo_cdf = normal.cdf((lower - mean) / std);
    let hi_cdf = normal.cdf((upper - mean) / std);
    let u: f64 = rng.random_range(lo_cdf..=hi_cdf);
    // Guard against Φ values that collapse to 0 or 1 in floating point under
    // extreme truncation; the final clamp keeps the sample in range.
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    Ok((mean + std * normal.inverse_cdf(u)).clamp(lower, upper))
}

/// Truncated-Gaussian resample of one element inside its valid interval:
/// centred at the current value with std = interval width / 4.
fn resample_element<R: Rng + ?Sized>(measure: &mut FuzzyMeasure, element: u32, rng: &mut R) {
    let iv = measure
        .valid_interval(element)
        .expect("mutation only touches non-full elements");
    let value = sample_truncated_gaussian(
        measure.value(element),
        iv.width() / 4.0,
        iv.lower,
        iv.upper,
        rng,
    )
    .expect("interval bounds are ordered and width/4 > 0 unless degenerate");
    measure.set_value(element, value);
}

/// Small mutation: pick one non-full element with probability proportional
/// to its usage count (uniformly if every count is zero) and resample it
/// within its valid interval. The full set is pinned and never chosen; its
/// count is excluded from the normalizer.
pub fn mutate_small<R: Rng + ?Sized>(
    measure: &FuzzyMeasure,
    counts: &UsageCounts,
    rng: &mut R,
) -> FuzzyMeasure {
    assert_eq!(
        counts.num_sources(),
        measure.num_sources(),
        "usage counts must match the measure's source count"
    );
    let full = measure.full_set();
    let mut out = measure.clone();
    if full == 1 {
        return out; // one source: only the pinned full set exists
    }
    let weights = &counts.counts()[..(full as usize - 1)]; // excludes the full set
    let total: u64 = weights.iter().sum();
    let element = if total == 0 {
        rng.random_range(1..full)
    } else {
        let mut target = rng.random_range(0..total);
        let mut chosen = 1u32;
        for (i, &w) in weights.iter().enumerate() {
            if target < w {
                chosen = i as u32 + 1;
                break;
            }
            target -= w;
        }
        chosen
    };
    resample_element(&mut out, element, rng);
    out
}

/// The order a large mutation visits elements in: every non-full element by
/// descending usage count, ties by ascending bitmask.
pub fn large_mutation_order(counts: &UsageCounts) -> Vec<u32> {
    let full = (1u32 << counts.num_sources()) - 1;
    let mut order: Vec<u32> = (1..full).collect();
    order.sort_by(|&a, &b| {
        counts
            .count(b)
            .cmp(&counts.count(a))
            .then(a.cmp(&b))
    });
    order
}

/// Large mutation: resample every non-full element, most-used first, each
/// within its valid interval recomputed against the partially updated
/// measure (so earlier writes constrain later ones and validity is kept
/// at every step).
pub fn mutate_large<R: Rng + ?Sized>(
    measure: &FuzzyMeasure,
    counts: &UsageCounts,
    rng: &mut R,
) -> FuzzyMeasure {
    assert_eq!(
        counts.num_sources(),
        measure.num_sources(),
        "usage counts must match the measure's source count"
    );
    let mut out = measure.clone();
    for element in large_mutation_order(counts) {
        resample_element(&mut out, element, rng);
    }
    out
}

/// Legacy baseline mutation: recompute every non-full element's valid
/// interval, pick the widest (ties by ascending bitmask), and resample it
/// uniformly within the interval. A fully pinned lattice returns the
/// measure unchanged.
pub fn mutate_valid_interval<R: Rng + ?Sized>(
    measure: &FuzzyMeasure,
    rng: &mut R,
) -> FuzzyMeasure {
    let full = measure.full_set();
    let mut widest: Option<(u32, f64, f64)> = None; // (element, lower, upper)
    let mut best_width = 0.0;
    for element in 1..full {
        let iv = measure.valid_interval(element).expect("non-full element");
        if iv.width() > best_width {
            best_width = iv.width();
            widest = Some((element, iv.lower, iv.upper));
        }
    }
    let mut out = measure.clone();
    if let Some((element, lower, upper)) = widest {
        out.set_value(element, rng.random_range(lower..=upper));
    }
    out
}

/// Deterministic selection of `target` pool indices: the `target/2` lowest
/// objectives (ties by index) survive as elites; the rest are drawn without
/// replacement with probability proportional to `max_pool − objective + ε`.
fn select_indices<R: Rng + ?Sized>(
    objectives: &[f64],
    target: usize,
    rng: &mut R,
) -> Vec<usize> {
    const WEIGHT_EPS: f64 = 1e-9;
    let n_elite = target / 2;
    let mut order: Vec<usize> = (0..objectives.len()).collect();
    order.sort_by(|&a, &b| objectives[a].total_cmp(&objectives[b]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = order[..n_elite].to_vec();
    let max_obj = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut candidates: Vec<usize> = order[n_elite..].to_vec();
    let mut weights: Vec<f64> = candidates
        .iter()
        .map(|&i| max_obj - objectives[i] + WEIGHT_EPS)
        .collect();
    for _ in 0..target - n_elite {
        let total: f64 = weights.iter().sum();
        let mut t = rng.random_range(0.0..total);
        let mut pick = candidates.len() - 1;
        for (j, &w) in weights.iter().enumerate() {
            if t < w {
                pick = j;
                break;
            }
            t -= w;
        }
        selected.push(candidates.remove(pick));
        weights.remove(pick);
    }
    selected
}

/// Builds the next generation from a pooled set of `P` parents and `P`
/// children with precomputed objectives (parents first, then children, in
/// the pool's index order).
pub fn select_next_generation<R: Rng + ?Sized>(
    parents: &[FuzzyMeasure],
    children: &[FuzzyMeasure],
    objectives: &[f64],
    rng: &mut R,
) -> Result<Vec<FuzzyMeasure>, OptimizerError> {
    if parents.len() != children.len() || objectives.len() != parents.len() + children.len() {
        return Err(OptimizerError::SizeMismatch {
            parents: parents.len(),
            children: children.len(),
            objectives: objectives.len(),
        });
    }
    let indices = select_indices(objectives, parents.len(), rng);
    Ok(indices
        .into_iter()
        .map(|i| {
            if i < parents.len() {
                parents[i].clone()
            } else {
                children[i - parents.len()].clone()
            }
        })
        .collect())
}

/// Precomputed training set: labels plus cached sort chains per instance,
/// so one objective evaluation is a dot product per instance.
struct CachedBags {
    terms: Vec<(f64, Vec<CachedInstance>)>,
}

impl CachedBags {
    fn new(bags: &BagSet) -> Self {
        CachedBags {
            terms: bags
                .bags()
                .iter()
                .map(|bag| {
                    (
                        bag.label(),
                        bag.instances().iter().map(CachedInstance::new).collect(),
                    )
                })
                .collect(),
        }
    }

    fn objective(&self, spec: &ObjectiveSpec, measure: &FuzzyMeasure) -> f64 {
        let per_bag: Vec<(f64, Vec<f64>)> = self
            .terms
            .iter()
            .map(|(label, instances)| {
                (
                    *label,
                    instances.iter().map(|ci| ci.integral(measure)).collect(),
                )
            })
            .collect();
        objective_from_cis(spec, &per_bag)
    }
}

/// Runs the evolutionary search and returns the best measure found.
///
/// The initial population is drawn with a per-member coin flip between the
/// two layer-wise initialization directions. Usage counts are computed once
/// up front. Each iteration mutates every member, evaluates the children in
/// parallel, selects from the pooled 2P candidates, and stops early once the
/// generation's improvement of the best objective drops to
/// `fitness_threshold` or below.
pub fn train(
    bags: &BagSet,
    spec: &ObjectiveSpec,
    config: &OptimizerConfig,
) -> Result<TrainedModel, OptimizerError> {
    config.validate()?;
    if bags.is_empty() {
        return Err(OptimizerError::EmptyBagSet);
    }
    spec.validate(bags)?;

    let start = Instant::now();
    let m = bags.num_sources();
    let counts = usage_counts(bags);
    let cache = CachedBags::new(bags);
    let p = config.population;

    let mut population: Vec<FuzzyMeasure> = (0..p)
        .map(|i| {
            let mut rng = stream_rng(config.seed, 0, i as u32);
            FuzzyMeasure::init(m, InitMode::CoinFlip, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    let mut pop_objectives: Vec<f64> = population
        .par_iter()
        .map(|g| cache.objective(spec, g))
        .collect();

    let (mut best_idx, mut best_objective) = argmin(&pop_objectives);
    let mut best_measure = population[best_idx].clone();
    let mut trace = vec![IterationRecord {
        iteration: 0,
        best_objective,
        wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
    }];

    let mut iterations_run = 0;
    for t in 1..=config.max_iterations {
        let children: Vec<FuzzyMeasure> = (0..p)
            .map(|i| {
                let mut rng = stream_rng(config.seed, t, i as u32);
                match config.sampler {
                    Sampler::Me => {
                        if rng.random::<f64>() < config.small_rate {
                            mutate_small(&population[i], &counts, &mut rng)
                        } else {
                            mutate_large(&population[i], &counts, &mut rng)
                        }
                    }
                    Sampler::Vi => mutate_valid_interval(&population[i], &mut rng),
                }
            })
            .collect();
        let child_objectives: Vec<f64> = children
            .par_iter()
            .map(|g| cache.objective(spec, g))
            .collect();

        // Parents keep their cached objectives; evaluation is pure.
        let pool_objectives: Vec<f64> = pop_objectives
            .iter()
            .chain(child_objectives.iter())
            .cloned()
            .collect();
        let mut rng = stream_rng(config.seed, t, p as u32);
        let survivors = select_indices(&pool_objectives, p, &mut rng);
        population = survivors
            .iter()
            .map(|&i| {
                if i < p {
                    population[i].clone()
                } else {
                    children[i - p].clone()
                }
            })
            .collect();
        pop_objectives = survivors.iter().map(|&i| pool_objectives[i]).collect();

        let (idx, current_best) = argmin(&pop_objectives);
        let improvement = (best_objective - current_best).abs();
        if current_best < best_objective {
            best_objective = current_best;
            best_idx = idx;
            best_measure = population[best_idx].clone();
        }
        debug_assert!(population.iter().all(|g| g.validate().is_ok()));
        trace.push(IterationRecord {
            iteration: t,
            best_objective,
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        iterations_run = t;
        if improvement <= config.fitness_threshold {
            break;
        }
    }

    Ok(TrainedModel {
        measure: best_measure,
        best_objective,
        objective: spec.clone(),
        trace,
        iterations_run,
        config: config.clone(),
    })
}

fn argmin(values: &[f64]) -> (usize, f64) {
    let mut idx = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[idx] {
            idx = i;
        }
    }
    (idx, values[idx])
}
