//! Synthetic experiment generators and dataset-preparation helpers.
//!
//! Three seeded generators produce bag-labeled datasets with known
//! instance-level ground truth:
//!
//! * **Contamination** — binary classification where a sweep fraction of
//!   each negative bag's instances is replaced by positive-type instances.
//! * **PrimaryRatio** — regression where each bag carries a real-valued
//!   label and a sweep fraction of its instances is constructed to fuse
//!   *exactly* to that label under a hidden ground-truth measure; the rest
//!   is background.
//! * **Snr** — the all-primary regression dataset with additive white
//!   Gaussian noise at a given signal-to-noise ratio in decibels.
//!
//! The module also converts spatial per-source confidence maps into
//! window bags and rescales raw labels into the unit interval.

use crate::bag::{Bag, BagError, BagSet};
use crate::choquet::{choquet_integral, ChoquetError, Instance};
use crate::measure::{FuzzyMeasure, InitMode, MeasureError, MAX_SOURCES};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Positive-type instances fuse to at least this under the hidden measure.
const POSITIVE_CI_MIN: f64 = 0.8;
/// Negative-type instances fuse to at most this under the hidden measure.
const NEGATIVE_CI_MAX: f64 = 0.2;
/// Rejection-sampling budget before falling back to a constant instance.
const REJECTION_TRIES: usize = 10_000;
/// Regression bag labels are drawn from `[LABEL_FLOOR, 1]` so that
/// relative errors stay well defined and bounded.
const LABEL_FLOOR: f64 = 0.1;

/// Errors from dataset generation and preparation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataGenError {
    /// Sweep parameter outside the task's meaningful range.
    #[error("sweep {sweep} is invalid for the {task:?} task: {reason}")]
    InvalidSweep {
        task: SynthTask,
        sweep: f64,
        reason: &'static str,
    },
    /// Zero or oversized dataset dimensions.
    #[error("invalid dataset shape: {0}")]
    InvalidShape(String),
    /// Requested fusion target outside `[0, 1]`.
    #[error("target fusion value {0} must lie in [0, 1]")]
    TargetOutOfRange(f64),
    /// Signal-to-noise ratio must be a finite number of decibels.
    #[error("signal-to-noise ratio {0} dB is not finite")]
    InvalidSnr(f64),
    /// A window centred here reaches beyond the grid.
    #[error(
        "window of radius {radius} around ({row}, {col}) needs surrounding \
         context that the {height}x{width} grid cannot provide"
    )]
    InsufficientBackground {
        row: usize,
        col: usize,
        radius: usize,
        height: usize,
        width: usize,
    },
    /// Labels cannot be rescaled because they span no range.
    #[error("cannot normalize labels: all values equal {0}")]
    DegenerateRange(f64),
    /// Labels must be finite to rescale.
    #[error("cannot normalize non-finite label {0}")]
    NonFiniteLabel(f64),
    /// Labels to normalize were empty.
    #[error("cannot normalize an empty label list")]
    EmptyLabels,
    /// Grid construction failed.
    #[error("invalid confidence grid: {0}")]
    InvalidGrid(String),
    /// Measure-level failure.
    #[error(transparent)]
    Measure(#[from] MeasureError),
    /// Bag-level failure.
    #[error(transparent)]
    Bag(#[from] BagError),
    /// Instance or fusion failure.
    #[error(transparent)]
    Choquet(#[from] ChoquetError),
}

/// Which synthetic experiment to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthTask {
    /// Binary bags; the sweep is the fraction of positive-type instances
    /// injected into negative bags, in `[0, 1]`.
    Contamination,
    /// Real-valued bags; the sweep is the fraction of each bag's instances
    /// that fuse exactly to the bag label, in `[0, 1]`.
    PrimaryRatio,
    /// All-primary regression bags; the sweep is the signal-to-noise ratio
    /// in decibels of additive white Gaussian noise on the confidences.
    Snr,
}

impl SynthTask {
    /// Default `(num_bags, bag_size, num_sources)` for the task.
    fn default_shape(self) -> (usize, usize, usize) {
        match self {
            SynthTask::Contamination => (100, 10, 3),
            SynthTask::PrimaryRatio | SynthTask::Snr => (10, 100, 3),
        }
    }
}

/// Generator configuration: task, sweep value, seed, and optional shape
/// overrides (each task has its own default shape).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub task: SynthTask,
    pub sweep: f64,
    pub seed: u64,
    pub num_bags: Option<usize>,
    pub bag_size: Option<usize>,
    pub num_sources: Option<usize>,
}

impl SynthConfig {
    pub fn new(task: SynthTask, sweep: f64, seed: u64) -> Self {
        SynthConfig {
            task,
            sweep,
            seed,
            num_bags: None,
            bag_size: None,
            num_sources: None,
        }
    }

    fn resolved_shape(&self) -> Result<(usize, usize, usize), DataGenError> {
        let (b, s, m) = self.task.default_shape();
        let num_bags = self.num_bags.unwrap_or(b);
        let bag_size = self.bag_size.unwrap_or(s);
        let num_sources = self.num_sources.unwrap_or(m);
        if num_bags == 0 {
            return Err(DataGenError::InvalidShape(
                "need at least one bag".to_string(),
            ));
        }
        if bag_size == 0 {
            return Err(DataGenError::InvalidShape(
                "need at least one instance per bag".to_string(),
            ));
        }
        if num_sources == 0 || num_sources > MAX_SOURCES {
            return Err(DataGenError::InvalidShape(format!(
                "number of sources must lie in 1..={MAX_SOURCES}, got {num_sources}"
            )));
        }
        Ok((num_bags, bag_size, num_sources))
    }

    fn validate_sweep(&self) -> Result<(), DataGenError> {
        match self.task {
            SynthTask::Contamination | SynthTask::PrimaryRatio => {
                if !self.sweep.is_finite() || !(0.0..=1.0).contains(&self.sweep) {
                    return Err(DataGenError::InvalidSweep {
                        task: self.task,
                        sweep: self.sweep,
                        reason: "fraction sweeps must lie in [0, 1]",
                    });
                }
            }
            SynthTask::Snr => {
                if !self.sweep.is_finite() {
                    return Err(DataGenError::InvalidSweep {
                        task: self.task,
                        sweep: self.sweep,
                        reason: "decibel sweeps must be finite",
                    });
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset: the bags, per-instance ground truth aligned with
/// the bags' instance order, and the hidden measure the truth was built
/// from.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub bags: BagSet,
    /// One row per bag, one value per instance: class membership (0/1) for
    /// classification tasks, the clean fused value for regression tasks.
    pub instance_truth: Vec<Vec<f64>>,
    /// The measure the generator fused with; useful as a reference model.
    pub truth_measure: FuzzyMeasure,
}

/// Number of instances a sweep fraction selects out of `n` (rounds up).
fn swept_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).min(n)
}

/// Generates the configured synthetic dataset. The same configuration
/// always yields the same dataset, bit for bit.
pub fn gen_synthetic(config: &SynthConfig) -> Result<SynthData, DataGenError> {
    config.validate_sweep()?;
    let (num_bags, bag_size, num_sources) = config.resolved_shape()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.task {
        SynthTask::Contamination => {
            gen_contamination(config.sweep, num_bags, bag_size, num_sources, &mut rng)
        }
        SynthTask::PrimaryRatio => {
            gen_primary_ratio(config.sweep, num_bags, bag_size, num_sources, &mut rng)
        }
        SynthTask::Snr => {
            let clean = gen_primary_ratio(1.0, num_bags, bag_size, num_sources, &mut rng)?;
            let noisy_bags = add_noise_to_bags(&clean.bags, config.sweep, &mut rng)?;
            Ok(SynthData {
                bags: noisy_bags,
                ..clean
            })
        }
    }
}

fn random_instance<R: Rng + ?Sized>(num_sources: usize, rng: &mut R) -> Instance {
    Instance::new(
        (0..num_sources)
            .map(|_| rng.random_range(0.0..=1.0))
            .collect(),
    )
    .expect("uniform draws are valid confidences")
}

/// Constant instances fuse to their constant under any normalized measure,
/// so they are an always-available fallback for rejection sampling.
fn constant_instance(num_sources: usize, value: f64) -> Instance {
    Instance::new(vec![value; num_sources]).expect("a constant in [0, 1] is valid")
}

/// Rejection-samples an instance whose fused value under `measure` falls
/// on the requested side of a threshold; falls back to a constant instance
/// after `REJECTION_TRIES` draws.
fn draw_typed_instance<R: Rng + ?Sized>(
    measure: &FuzzyMeasure,
    positive: bool,
    rng: &mut R,
) -> Instance {
    let m = measure.num_sources();
    for _ in 0..REJECTION_TRIES {
        let candidate = random_instance(m, rng);
        let ci = choquet_integral(measure, &candidate)
            .expect("generated instances match the measure's dimension");
        if (positive && ci >= POSITIVE_CI_MIN) || (!positive && ci <= NEGATIVE_CI_MAX) {
            return candidate;
        }
    }
    let value = if positive {
        rng.random_range(POSITIVE_CI_MIN..=1.0)
    } else {
        rng.random_range(0.0..=NEGATIVE_CI_MAX)
    };
    constant_instance(m, value)
}

fn gen_contamination<R: Rng + ?Sized>(
    sweep: f64,
    num_bags: usize,
    bag_size: usize,
    num_sources: usize,
    rng: &mut R,
) -> Result<SynthData, DataGenError> {
    let truth_measure = FuzzyMeasure::init(num_sources, InitMode::CoinFlip, rng)?;
    let num_negative = num_bags.div_ceil(2);
    let mut bags = Vec::with_capacity(num_bags);
    let mut instance_truth = Vec::with_capacity(num_bags);
    for b in 0..num_bags {
        let negative_bag = b < num_negative;
        let positive_count = if negative_bag {
            swept_count(sweep, bag_size)
        } else {
            // Positive bags are half positive-type so that full
            // contamination makes the two bag classes indistinguishable.
            swept_count(0.5, bag_size)
        };
        let mut is_positive = vec![false; bag_size];
        for slot in is_positive.iter_mut().take(positive_count) {
            *slot = true;
        }
        is_positive.shuffle(rng);
        let mut instances = Vec::with_capacity(bag_size);
        let mut truth = Vec::with_capacity(bag_size);
        for &positive in &is_positive {
            instances.push(draw_typed_instance(&truth_measure, positive, rng));
            truth.push(if positive { 1.0 } else { 0.0 });
        }
        let (id, label) = if negative_bag {
            (format!("neg{b:03}"), 0.0)
        } else {
            (format!("pos{:03}", b - num_negative), 1.0)
        };
        bags.push(Bag::new(id, label, instances)?);
        instance_truth.push(truth);
    }
    Ok(SynthData {
        bags: BagSet::new(num_sources, bags)?,
        instance_truth,
        truth_measure,
    })
}

/// Builds an instance whose fused value under `measure` equals `target` (to
/// floating-point accuracy): a random draw is either scaled down — the
/// integral is positively homogeneous — or pushed along the segment toward
/// the all-ones instance, where the fused value grows continuously and
/// monotonically to 1, using bisection.
pub fn instance_with_ci<R: Rng + ?Sized>(
    measure: &FuzzyMeasure,
    target: f64,
    rng: &mut R,
) -> Result<Instance, DataGenError> {
    if !target.is_finite() || !(0.0..=1.0).contains(&target) {
        return Err(DataGenError::TargetOutOfRange(target));
    }
    let m = measure.num_sources();
    let base = random_instance(m, rng);
    let c0 = choquet_integral(measure, &base)?;
    if c0 >= target {
        if c0 == 0.0 {
            // target <= c0 = 0, so the all-zero instance already fits.
            return Ok(constant_instance(m, 0.0));
        }
        let scale = target / c0;
        return Ok(Instance::new(
            base.confidences().iter().map(|v| v * scale).collect(),
        )?);
    }
    // Fused value at t = 0 is below target, at t = 1 it is exactly 1.
    let blend = |t: f64| -> Vec<f64> {
        base.confidences()
            .iter()
            .map(|v| v + t * (1.0 - v))
            .collect()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let candidate = Instance::new(blend(mid))?;
        if choquet_integral(measure, &candidate)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Instance::new(blend(0.5 * (lo + hi)))?)
}

fn gen_primary_ratio<R: Rng + ?Sized>(
    sweep: f64,
    num_bags: usize,
    bag_size: usize,
    num_sources: usize,
    rng: &mut R,
) -> Result<SynthData, DataGenError> {
    let truth_measure = FuzzyMeasure::init(num_sources, InitMode::CoinFlip, rng)?;
    // Background instances carry truth from an unrelated fusion process.
    let background_measure = FuzzyMeasure::init(num_sources, InitMode::CoinFlip, rng)?;
    let primary_count = swept_count(sweep, bag_size);
    let mut bags = Vec::with_capacity(num_bags);
    let mut instance_truth = Vec::with_capacity(num_bags);
    for b in 0..num_bags {
        let label = rng.random_range(LABEL_FLOOR..=1.0);
        let mut is_primary = vec![false; bag_size];
        for slot in is_primary.iter_mut().take(primary_count) {
            *slot = true;
        }
        is_primary.shuffle(rng);
        let mut instances = Vec::with_capacity(bag_size);
        let mut truth = Vec::with_capacity(bag_size);
        for &primary in &is_primary {
            if primary {
                instances.push(instance_with_ci(&truth_measure, label, rng)?);
                truth.push(label);
            } else {
                let x = random_instance(num_sources, rng);
                truth.push(choquet_integral(&background_measure, &x)?);
                instances.push(x);
            }
        }
        bags.push(Bag::new(format!("bag{b:03}"), label, instances)?);
        instance_truth.push(truth);
    }
    Ok(SynthData {
        bags: BagSet::new(num_sources, bags)?,
        instance_truth,
        truth_measure,
    })
}

/// Adds white Gaussian noise at `snr_db` decibels relative to the signal
/// power `mean(x²)` of `values`, without clipping. An all-zero signal is
/// returned unchanged (its power defines no noise level).
pub fn add_white_noise<R: Rng + ?Sized>(
    values: &[f64],
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<f64>, DataGenError> {
    if !snr_db.is_finite() {
        return Err(DataGenError::InvalidSnr(snr_db));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let signal_power = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
    if signal_power == 0.0 {
        return Ok(values.to_vec());
    }
    let sigma = (signal_power / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite positive noise level");
    Ok(values.iter().map(|v| v + normal.sample(rng)).collect())
}

/// Applies dataset-wide white noise to every confidence, then clips back
/// into `[0, 1]`. Noise power is set from the pre-clip signal power of the
/// whole dataset.
fn add_noise_to_bags<R: Rng + ?Sized>(
    bags: &BagSet,
    snr_db: f64,
    rng: &mut R,
) -> Result<BagSet, DataGenError> {
    let flat: Vec<f64> = bags
        .bags()
        .iter()
        .flat_map(|bag| bag.instances().iter())
        .flat_map(|inst| inst.confidences().iter().copied())
        .collect();
    let noisy = add_white_noise(&flat, snr_db, rng)?;
    let mut cursor = noisy.into_iter();
    let mut rebuilt = Vec::with_capacity(bags.len());
    for bag in bags.bags() {
        let instances = bag
            .instances()
            .iter()
            .map(|inst| {
                Instance::new(
                    (0..inst.len())
                        .map(|_| {
                            cursor
                                .next()
                                .expect("noisy vector matches the flattened length")
                                .clamp(0.0, 1.0)
                        })
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        rebuilt.push(Bag::new(bag.id(), bag.label(), instances)?);
    }
    Ok(BagSet::new(bags.num_sources(), rebuilt)?)
}

/// Per-source confidence maps over a spatial grid, stored row-major per
/// source. Every value must lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceGrid {
    num_sources: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ConfidenceGrid {
    /// `values` holds one full `height × width` row-major map per source,
    /// source-major: `values[src * height * width + row * width + col]`.
    pub fn new(
        num_sources: usize,
        height: usize,
        width: usize,
        values: Vec<f64>,
    ) -> Result<Self, DataGenError> {
        if num_sources == 0 || height == 0 || width == 0 {
            return Err(DataGenError::InvalidGrid(format!(
                "dimensions must be positive, got {num_sources} sources, \
                 {height}x{width} cells"
            )));
        }
        let expected = num_sources * height * width;
        if values.len() != expected {
            return Err(DataGenError::InvalidGrid(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || !(0.0..=1.0).contains(*v)) {
            return Err(DataGenError::InvalidGrid(format!(
                "confidence {bad} outside [0, 1]"
            )));
        }
        Ok(ConfidenceGrid {
            num_sources,
            height,
            width,
            values,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Confidence of one source at one cell.
    pub fn value(&self, source: usize, row: usize, col: usize) -> f64 {
        assert!(source < self.num_sources && row < self.height && col < self.width);
        self.values[source * self.height * self.width + row * self.width + col]
    }

    /// All sources' confidences at one cell, as an instance.
    pub fn instance_at(&self, row: usize, col: usize) -> Instance {
        Instance::new(
            (0..self.num_sources)
                .map(|s| self.value(s, row, col))
                .collect(),
        )
        .expect("grid values are validated confidences")
    }
}

/// Cuts one bag per labelled centre out of the grid: a square window of
/// the given radius, one instance per cell, `(2·radius + 1)²` instances in
/// row-major order. Every window must fit entirely inside the grid.
pub fn build_window_bags(
    grid: &ConfidenceGrid,
    centers: &[(usize, usize, f64)],
    radius: usize,
) -> Result<BagSet, DataGenError> {
    let mut bags = Vec::with_capacity(centers.len());
    for &(row, col, label) in centers {
        let fits = row >= radius
            && col >= radius
            && row + radius < grid.height()
            && col + radius < grid.width();
        if !fits {
            return Err(DataGenError::InsufficientBackground {
                row,
                col,
                radius,
                height: grid.height(),
                width: grid.width(),
            });
        }
        let mut instances = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
        for r in row - radius..=row + radius {
            for c in col - radius..=col + radius {
                instances.push(grid.instance_at(r, c));
            }
        }
        bags.push(Bag::new(format!("r{row}c{col}"), label, instances)?);
    }
    Ok(BagSet::new(grid.num_sources(), bags)?)
}

/// The affine map a normalization applied, kept to undo it later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelScale {
    pub min: f64,
    pub max: f64,
}

/// Rescales labels linearly onto `[0, 1]` (minimum to 0, maximum to 1) and
/// returns the scale needed to map predictions back.
pub fn normalize_labels(labels: &[f64]) -> Result<(Vec<f64>, LabelScale), DataGenError> {
    if labels.is_empty() {
        return Err(DataGenError::EmptyLabels);
    }
    if let Some(&bad) = labels.iter().find(|v| !v.is_finite()) {
        return Err(DataGenError::NonFiniteLabel(bad));
    }
    let min = labels.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(DataGenError::DegenerateRange(min));
    }
    let span = max - min;
    Ok((
        labels.iter().map(|v| (v - min) / span).collect(),
        LabelScale { min, max },
    ))
}

/// Maps normalized values back onto the original label range.
pub fn denormalize_labels(normalized: &[f64], scale: &LabelScale) -> Vec<f64> {
    normalized
        .iter()
        .map(|v| scale.min + v * (scale.max - scale.min))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn count_positive_truth(truth: &[f64]) -> usize {
        truth.iter().filter(|&&t| t == 1.0).count()
    }

    #[test]
    fn contamination_injects_the_ceiling_of_the_swept_fraction() {
        let config = SynthConfig::new(SynthTask::Contamination, 0.3, 7);
        let data = gen_synthetic(&config).unwrap();
        assert_eq!(data.bags.len(), 100);
        for (bag, truth) in data.bags.bags().iter().zip(&data.instance_truth) {
            assert_eq!(bag.instances().len(), 10);
            let positives = count_positive_truth(truth);
            if bag.label() == 0.0 {
                assert_eq!(positives, 3, "ceil(0.3 * 10) positives per negative bag");
            } else {
                assert_eq!(positives, 5, "positive bags are half positive-type");
            }
        }
        let negatives = data.bags.bags().iter().filter(|b| b.label() == 0.0).count();
        assert_eq!(negatives, 50);
    }

    #[test]
    fn contamination_zero_sweep_keeps_negative_bags_pure() {
        let config = SynthConfig::new(SynthTask::Contamination, 0.0, 11);
        let data = gen_synthetic(&config).unwrap();
        for (bag, truth) in data.bags.bags().iter().zip(&data.instance_truth) {
            if bag.label() == 0.0 {
                assert_eq!(count_positive_truth(truth), 0);
            }
        }
    }

    #[test]
    fn contamination_truth_matches_fused_values_under_the_hidden_measure() {
        let config = SynthConfig::new(SynthTask::Contamination, 0.4, 13);
        let data = gen_synthetic(&config).unwrap();
        for (bag, truth) in data.bags.bags().iter().zip(&data.instance_truth) {
            for (inst, &t) in bag.instances().iter().zip(truth) {
                let ci = choquet_integral(&data.truth_measure, inst).unwrap();
                if t == 1.0 {
                    assert!(ci >= POSITIVE_CI_MIN, "positive-type instance fused to {ci}");
                } else {
                    assert!(ci <= NEGATIVE_CI_MAX, "negative-type instance fused to {ci}");
                }
            }
        }
    }

    #[test]
    fn instance_with_ci_hits_arbitrary_targets() {
        let mut r = rng(17);
        for trial in 0..500 {
            let m = 2 + trial % 4;
            let g = FuzzyMeasure::init(m, InitMode::CoinFlip, &mut r).unwrap();
            let target = r.random_range(0.0..=1.0);
            let x = instance_with_ci(&g, target, &mut r).unwrap();
            let ci = choquet_integral(&g, &x).unwrap();
            assert!(
                (ci - target).abs() < 1e-9,
                "wanted {target}, built an instance fusing to {ci}"
            );
        }
    }

    #[test]
    fn instance_with_ci_handles_the_endpoints_and_rejects_bad_targets() {
        let mut r = rng(19);
        let g = FuzzyMeasure::init(3, InitMode::CoinFlip, &mut r).unwrap();
        let zero = instance_with_ci(&g, 0.0, &mut r).unwrap();
        assert_eq!(choquet_integral(&g, &zero).unwrap(), 0.0);
        let one = instance_with_ci(&g, 1.0, &mut r).unwrap();
        assert!((choquet_integral(&g, &one).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(
            instance_with_ci(&g, 1.5, &mut r).unwrap_err(),
            DataGenError::TargetOutOfRange(_)
        ));
        assert!(matches!(
            instance_with_ci(&g, f64::NAN, &mut r).unwrap_err(),
            DataGenError::TargetOutOfRange(_)
        ));
    }

    #[test]
    fn primary_instances_fuse_exactly_to_the_bag_label() {
        let config = SynthConfig::new(SynthTask::PrimaryRatio, 1.0, 23);
        let data = gen_synthetic(&config).unwrap();
        assert_eq!(data.bags.len(), 10);
        for (bag, truth) in data.bags.bags().iter().zip(&data.instance_truth) {
            assert_eq!(bag.instances().len(), 100);
            assert!((LABEL_FLOOR..=1.0).contains(&bag.label()));
            for (inst, &t) in bag.instances().iter().zip(truth) {
                assert_eq!(t, bag.label(), "all-primary bags carry their label as truth");
                let ci = choquet_integral(&data.truth_measure, inst).unwrap();
                assert!(
                    (ci - bag.label()).abs() < 1e-9,
                    "primary fused to {ci}, label {}",
                    bag.label()
                );
            }
        }
    }

    #[test]
    fn primary_count_follows_the_sweep() {
        let mut config = SynthConfig::new(SynthTask::PrimaryRatio, 0.5, 29);
        config.bag_size = Some(40);
        let data = gen_synthetic(&config).unwrap();
        for (bag, truth) in data.bags.bags().iter().zip(&data.instance_truth) {
            // Primaries carry the label bitwise; background truth comes from
            // an unrelated fusion and almost surely differs.
            let primaries = truth.iter().filter(|&&t| t == bag.label()).count();
            assert_eq!(primaries, 20);
        }
    }

    #[test]
    fn background_truth_stays_within_each_instances_fusion_bounds() {
        let config = SynthConfig::new(SynthTask::PrimaryRatio, 0.0, 31);
        let data = gen_synthetic(&config).unwrap();
        let mut saw_off_label = false;
        for (bag, truth) in data.bags.bags().iter().zip(&data.instance_truth) {
            for (inst, &t) in bag.instances().iter().zip(truth) {
                let lo = inst.confidences().iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = inst
                    .confidences()
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    t >= lo - 1e-12 && t <= hi + 1e-12,
                    "any fused value lies between the instance's extremes"
                );
                if t != bag.label() {
                    saw_off_label = true;
                }
            }
        }
        assert!(saw_off_label, "background truth is unrelated to the label");
    }

    #[test]
    fn noise_task_keeps_clean_truth_but_perturbs_confidences() {
        let mut clean_cfg = SynthConfig::new(SynthTask::Snr, 50.0, 37);
        clean_cfg.bag_size = Some(20);
        let mut noisy_cfg = clean_cfg.clone();
        noisy_cfg.sweep = 0.0;
        let clean = gen_synthetic(&clean_cfg).unwrap();
        let noisy = gen_synthetic(&noisy_cfg).unwrap();
        assert_eq!(clean.instance_truth, noisy.instance_truth);
        assert_eq!(clean.truth_measure, noisy.truth_measure);
        let flat = |d: &SynthData| -> Vec<f64> {
            d.bags
                .bags()
                .iter()
                .flat_map(|b| b.instances().iter())
                .flat_map(|i| i.confidences().to_vec())
                .collect()
        };
        let (a, b) = (flat(&clean), flat(&noisy));
        assert_eq!(a.len(), b.len());
        assert!(a != b, "different noise levels perturb differently");
        for v in a.iter().chain(b.iter()) {
            assert!((0.0..=1.0).contains(v), "confidences stay clipped");
        }
        let label_matches = clean
            .bags
            .bags()
            .iter()
            .zip(noisy.bags.bags())
            .all(|(x, y)| x.id() == y.id() && x.label() == y.label());
        assert!(label_matches);
    }

    #[test]
    fn white_noise_achieves_the_requested_power_ratio() {
        let mut r = rng(41);
        let signal: Vec<f64> = (0..5000).map(|_| r.random_range(0.2..=1.0)).collect();
        for target_db in [0.0, 10.0, 20.0] {
            let noisy = add_white_noise(&signal, target_db, &mut r).unwrap();
            let signal_power =
                signal.iter().map(|v| v * v).sum::<f64>() / signal.len() as f64;
            let noise_power = signal
                .iter()
                .zip(&noisy)
                .map(|(s, n)| (n - s) * (n - s))
                .sum::<f64>()
                / signal.len() as f64;
            let achieved_db = 10.0 * (signal_power / noise_power).log10();
            assert!(
                (achieved_db - target_db).abs() < 1.0,
                "asked for {target_db} dB, measured {achieved_db} dB"
            );
        }
    }

    #[test]
    fn white_noise_edge_cases() {
        let mut r = rng(43);
        assert!(add_white_noise(&[], 10.0, &mut r).unwrap().is_empty());
        assert_eq!(
            add_white_noise(&[0.0, 0.0], 10.0, &mut r).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(matches!(
            add_white_noise(&[0.5], f64::NAN, &mut r).unwrap_err(),
            DataGenError::InvalidSnr(_)
        ));
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        for task in [
            SynthTask::Contamination,
            SynthTask::PrimaryRatio,
            SynthTask::Snr,
        ] {
            let sweep = match task {
                SynthTask::Snr => 20.0,
                _ => 0.5,
            };
            let mut config = SynthConfig::new(task, sweep, 47);
            config.num_bags = Some(6);
            config.bag_size = Some(8);
            let a = gen_synthetic(&config).unwrap();
            let b = gen_synthetic(&config).unwrap();
            assert_eq!(a.bags, b.bags);
            assert_eq!(a.instance_truth, b.instance_truth);
            assert_eq!(a.truth_measure, b.truth_measure);
            config.seed = 48;
            let c = gen_synthetic(&config).unwrap();
            assert_ne!(a.bags, c.bags, "a fresh seed draws fresh data");
        }
    }

    #[test]
    fn shape_overrides_are_honoured_and_validated() {
        let mut config = SynthConfig::new(SynthTask::Contamination, 0.2, 53);
        config.num_bags = Some(12);
        config.bag_size = Some(4);
        config.num_sources = Some(2);
        let data = gen_synthetic(&config).unwrap();
        assert_eq!(data.bags.len(), 12);
        assert_eq!(data.bags.num_sources(), 2);
        assert!(data.bags.bags().iter().all(|b| b.instances().len() == 4));

        config.bag_size = Some(0);
        assert!(matches!(
            gen_synthetic(&config).unwrap_err(),
            DataGenError::InvalidShape(_)
        ));
        config.bag_size = Some(4);
        config.num_sources = Some(MAX_SOURCES + 1);
        assert!(matches!(
            gen_synthetic(&config).unwrap_err(),
            DataGenError::InvalidShape(_)
        ));
    }

    #[test]
    fn fraction_sweeps_must_lie_in_the_unit_interval() {
        for task in [SynthTask::Contamination, SynthTask::PrimaryRatio] {
            for bad in [-0.1, 1.5, f64::NAN] {
                let config = SynthConfig::new(task, bad, 1);
                assert!(matches!(
                    gen_synthetic(&config).unwrap_err(),
                    DataGenError::InvalidSweep { .. }
                ));
            }
        }
        let config = SynthConfig::new(SynthTask::Snr, f64::INFINITY, 1);
        assert!(matches!(
            gen_synthetic(&config).unwrap_err(),
            DataGenError::InvalidSweep { .. }
        ));
        let config = SynthConfig::new(SynthTask::Snr, -10.0, 1);
        assert!(gen_synthetic(&config).is_ok(), "negative decibels are valid");
    }

    fn checkered_grid(num_sources: usize, height: usize, width: usize) -> ConfidenceGrid {
        let values = (0..num_sources * height * width)
            .map(|i| (i % 7) as f64 / 10.0)
            .collect();
        ConfidenceGrid::new(num_sources, height, width, values).unwrap()
    }

    #[test]
    fn window_bags_cut_squares_of_the_requested_radius() {
        let grid = checkered_grid(2, 5, 6);
        let centers = [(2usize, 2usize, 1.0), (2, 3, 0.0)];
        for (radius, expected) in [(2usize, 25usize), (1, 9), (0, 1)] {
            let bags = build_window_bags(&grid, &centers, radius).unwrap();
            assert_eq!(bags.len(), 2);
            for bag in bags.bags() {
                assert_eq!(bag.instances().len(), expected);
            }
        }
        let bags = build_window_bags(&grid, &centers, 0).unwrap();
        assert_eq!(bags.bags()[0].id(), "r2c2");
        assert_eq!(bags.bags()[0].label(), 1.0);
        assert_eq!(
            bags.bags()[0].instances()[0].confidences(),
            &[grid.value(0, 2, 2), grid.value(1, 2, 2)]
        );
        // Radius 1: the window around (2, 2) starts at cell (1, 1).
        let bags = build_window_bags(&grid, &centers, 1).unwrap();
        assert_eq!(
            bags.bags()[0].instances()[0].confidences(),
            &[grid.value(0, 1, 1), grid.value(1, 1, 1)]
        );
    }

    #[test]
    fn window_bags_need_room_around_every_centre() {
        let grid = checkered_grid(2, 5, 6);
        let err = build_window_bags(&grid, &[(0, 0, 1.0)], 1).unwrap_err();
        assert!(matches!(
            err,
            DataGenError::InsufficientBackground { row: 0, col: 0, radius: 1, .. }
        ));
        let err = build_window_bags(&grid, &[(4, 5, 1.0)], 1).unwrap_err();
        assert!(matches!(err, DataGenError::InsufficientBackground { .. }));
    }

    #[test]
    fn grid_construction_validates_shape_and_range() {
        assert!(matches!(
            ConfidenceGrid::new(2, 3, 3, vec![0.5; 17]).unwrap_err(),
            DataGenError::InvalidGrid(_)
        ));
        assert!(matches!(
            ConfidenceGrid::new(0, 3, 3, vec![]).unwrap_err(),
            DataGenError::InvalidGrid(_)
        ));
        let mut values = vec![0.5; 18];
        values[9] = 1.2;
        assert!(matches!(
            ConfidenceGrid::new(2, 3, 3, values).unwrap_err(),
            DataGenError::InvalidGrid(_)
        ));
    }

    #[test]
    fn label_normalization_spans_the_unit_interval_and_inverts() {
        let (normalized, scale) = normalize_labels(&[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(normalized, vec![0.0, 0.5, 1.0]);
        assert_eq!(scale, LabelScale { min: 10.0, max: 30.0 });
        let restored = denormalize_labels(&normalized, &scale);
        for (orig, back) in [10.0, 20.0, 30.0].iter().zip(&restored) {
            assert!((orig - back).abs() < 1e-12);
        }
    }

    #[test]
    fn label_normalization_rejects_degenerate_input() {
        assert!(matches!(
            normalize_labels(&[5.0, 5.0, 5.0]).unwrap_err(),
            DataGenError::DegenerateRange(v) if v == 5.0
        ));
        assert!(matches!(
            normalize_labels(&[1.0, f64::NAN]).unwrap_err(),
            DataGenError::NonFiniteLabel(_)
        ));
        assert!(matches!(
            normalize_labels(&[]).unwrap_err(),
            DataGenError::EmptyLabels
        ));
    }
}
