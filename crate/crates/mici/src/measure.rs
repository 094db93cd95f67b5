//! Monotone normalized fuzzy measures over a finite set of sources.
//!
//! A fuzzy measure assigns a weight to every non-empty subset of the source
//! set `{1..m}`. Subsets are encoded as bitmasks: bit `i` (zero-based) set
//! means source `i + 1` is in the subset, so the full set is `(1 << m) - 1`
//! and the array index of a subset is its bitmask minus one. The empty set is
//! never stored; `g(∅) = 0` by definition. A valid measure is *normalized*
//! (`g(C) = 1` for the full set `C`) and *monotone* (`g(A) ≤ g(B)` whenever
//! `A ⊆ B`), which it is sufficient to check against immediate supersets
//! (one added source) only.

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest supported number of sources. The dense `2^m - 1` lattice array is
/// the representation; beyond 16 sources it stops being practical.
pub const MAX_SOURCES: usize = 16;

/// Errors raised when constructing or interrogating a fuzzy measure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    /// Number of sources outside `1..=MAX_SOURCES`.
    #[error("number of sources must be in 1..={MAX_SOURCES}, got {0}")]
    SourceCount(usize),
    /// Value array length does not equal `2^m - 1`.
    #[error("expected {expected} subset values for {num_sources} sources, got {got}")]
    LengthMismatch {
        num_sources: usize,
        expected: usize,
        got: usize,
    },
    /// A subset value lies outside `[0, 1]` (or is not finite).
    #[error("value for subset {subset:#b} is {value}, outside [0, 1]")]
    Range { subset: u32, value: f64 },
    /// The full-set value is not exactly 1.
    #[error("full-set value must be exactly 1.0, got {0}")]
    Normalization(f64),
    /// `g(A) > g(B)` for some `A ⊂ B`; the violating pair is named.
    #[error(
        "monotonicity violated: g({subset:#b}) = {subset_value} exceeds \
         g({superset:#b}) = {superset_value}"
    )]
    Monotonicity {
        subset: u32,
        subset_value: f64,
        superset: u32,
        superset_value: f64,
    },
    /// A bitmask that denotes no stored element (zero or beyond the full set).
    #[error("bitmask {0:#b} does not index a stored subset")]
    ElementOutOfRange(u32),
    /// The full set is pinned to 1 and cannot be resampled.
    #[error("the full set is pinned to 1 and has no sampling interval")]
    FullSet,
}

/// Closed interval of values one lattice element may take without violating
/// monotonicity against its immediate neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidInterval {
    /// Maximum over the element's immediate subsets (0 for singletons).
    pub lower: f64,
    /// Minimum over the element's immediate supersets (1 when the only
    /// superset is the full set).
    pub upper: f64,
}

impl ValidInterval {
    /// Interval width; zero when the element is fully pinned by neighbours.
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Strategy for sampling a random valid measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Sample the `(m-1)`-element subsets uniformly in `[0, 1]`, then each
    /// lower layer uniformly in `[0, min of immediate supersets]`, finishing
    /// with the singletons.
    TopDown,
    /// Sample the singletons uniformly in `[0, 1]`, then each higher layer
    /// uniformly in `[max of immediate subsets, 1]`.
    BottomUp,
    /// Flip a fair coin and run one of the two directions.
    CoinFlip,
}

/// A monotone normalized fuzzy measure, stored densely: `values[k - 1]` is
/// `g` of the subset with bitmask `k`, for `k` in `1..=2^m - 1`.
///
/// Instances are immutable once constructed; every constructor returns a
/// fully validated measure.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyMeasure {
    num_sources: usize,
    values: Vec<f64>,
}

fn check_source_count(num_sources: usize) -> Result<(), MeasureError> {
    if num_sources == 0 || num_sources > MAX_SOURCES {
        return Err(MeasureError::SourceCount(num_sources));
    }
    Ok(())
}

impl FuzzyMeasure {
    /// Builds a measure from its dense value array, validating range,
    /// normalization, and monotonicity (immediate supersets).
    pub fn new(num_sources: usize, values: Vec<f64>) -> Result<Self, MeasureError> {
        check_source_count(num_sources)?;
        let expected = (1usize << num_sources) - 1;
        if values.len() != expected {
            return Err(MeasureError::LengthMismatch {
                num_sources,
                expected,
                got: values.len(),
            });
        }
        let measure = FuzzyMeasure {
            num_sources,
            values,
        };
        measure.validate()?;
        Ok(measure)
    }

    /// Re-runs the full validity check (range, normalization, monotonicity).
    ///
    /// Constructors already guarantee validity; this exists for loaded data
    /// and for debug assertions inside the optimizer.
    pub fn validate(&self) -> Result<(), MeasureError> {
        let full = self.full_set();
        for k in 1..=full {
            let v = self.value(k);
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(MeasureError::Range {
                    subset: k,
                    value: v,
                });
            }
        }
        let top = self.value(full);
        if top != 1.0 {
            return Err(MeasureError::Normalization(top));
        }
        for k in 1..full {
            for bit in 0..self.num_sources {
                let b = 1u32 << bit;
                if k & b == 0 {
                    let sup = k | b;
                    if self.value(k) > self.value(sup) {
                        return Err(MeasureError::Monotonicity {
                            subset: k,
                            subset_value: self.value(k),
                            superset: sup,
                            superset_value: self.value(sup),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of sources `m`.
    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    /// Bitmask of the full source set, `2^m - 1`.
    pub fn full_set(&self) -> u32 {
        (1u32 << self.num_sources) - 1
    }

    /// Number of stored subsets, `2^m - 1`.
    pub fn num_elements(&self) -> usize {
        self.values.len()
    }

    /// `g` of the subset with the given bitmask. The empty set yields 0.
    ///
    /// # Panics
    /// Panics if the bitmask exceeds the full set.
    pub fn value(&self, subset: u32) -> f64 {
        if subset == 0 {
            return 0.0;
        }
        self.values[subset as usize - 1]
    }

    /// The dense value array (`values[k - 1]` = `g` of bitmask `k`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The interval an element may be moved within without breaking
    /// monotonicity against its immediate neighbours: lower bound is the
    /// maximum over immediate subsets (0 for singletons), upper bound the
    /// minimum over immediate supersets.
    pub fn valid_interval(&self, element: u32) -> Result<ValidInterval, MeasureError> {
        let full = self.full_set();
        if element == 0 || element > full {
            return Err(MeasureError::ElementOutOfRange(element));
        }
        if element == full {
            return Err(MeasureError::FullSet);
        }
        let mut lower = 0.0f64;
        let mut upper = f64::INFINITY;
        for bit in 0..self.num_sources {
            let b = 1u32 << bit;
            if element & b != 0 {
                let sub = element & !b;
                if sub != 0 {
                    lower = lower.max(self.value(sub));
                }
            } else {
                upper = upper.min(self.value(element | b));
            }
        }
        // element != full, so at least one immediate superset exists.
        Ok(ValidInterval { lower, upper })
    }

    /// Samples a random valid measure.
    ///
    /// `TopDown` fills layers from the `(m-1)`-subsets downwards, `BottomUp`
    /// from the singletons upwards; `CoinFlip` draws one coin from `rng` and
    /// delegates. The full set is always pinned to 1. Every sampled measure
    /// is valid by construction.
    pub fn init<R: Rng + ?Sized>(
        num_sources: usize,
        mode: InitMode,
        rng: &mut R,
    ) -> Result<Self, MeasureError> {
        check_source_count(num_sources)?;
        let mode = match mode {
            InitMode::CoinFlip => {
                if rng.random::<bool>() {
                    InitMode::TopDown
                } else {
                    InitMode::BottomUp
                }
            }
            other => other,
        };
        let full = (1u32 << num_sources) - 1;
        let mut measure = FuzzyMeasure {
            num_sources,
            values: vec![0.0; full as usize],
        };
        measure.values[full as usize - 1] = 1.0;
        match mode {
            InitMode::TopDown => {
                for layer in (1..num_sources).rev() {
                    for subset in subsets_of_size(num_sources, layer) {
                        let mut hi = f64::INFINITY;
                        for bit in 0..num_sources {
                            let b = 1u32 << bit;
                            if subset & b == 0 {
                                hi = hi.min(measure.value(subset | b));
                            }
                        }
                        measure.values[subset as usize - 1] = rng.random_range(0.0..=hi);
                    }
                }
            }
            InitMode::BottomUp => {
                for layer in 1..num_sources {
                    for subset in subsets_of_size(num_sources, layer) {
                        let mut lo = 0.0f64;
                        for bit in 0..num_sources {
                            let b = 1u32 << bit;
                            if subset & b != 0 && subset != b {
                                lo = lo.max(measure.value(subset & !b));
                            }
                        }
                        measure.values[subset as usize - 1] = rng.random_range(lo..=1.0);
                    }
                }
            }
            InitMode::CoinFlip => unreachable!("coin already flipped"),
        }
        debug_assert!(measure.validate().is_ok());
        Ok(measure)
    }

    /// Overwrites one element without re-validating. Callers must have drawn
    /// the value from the element's valid interval (or otherwise guarantee
    /// monotonicity); the optimizer's mutation kernels do exactly that.
    pub(crate) fn set_value(&mut self, element: u32, value: f64) {
        debug_assert!(element != 0 && element < self.full_set());
        self.values[element as usize - 1] = value;
    }
}

/// All bitmasks over `m` sources with exactly `size` bits set, ascending.
fn subsets_of_size(num_sources: usize, size: usize) -> impl Iterator<Item = u32> {
    let full = (1u32 << num_sources) - 1;
    (1..=full).filter(move |k| k.count_ones() as usize == size)
}

#[derive(Serialize, Deserialize)]
struct ElementRepr {
    subset: u32,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    num_sources: usize,
    elements: Vec<ElementRepr>,
}

impl Serialize for FuzzyMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let elements = (1..=self.full_set())
            .map(|k| ElementRepr {
                subset: k,
                value: self.value(k),
            })
            .collect();
        MeasureRepr {
            num_sources: self.num_sources,
            elements,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FuzzyMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MeasureRepr::deserialize(deserializer)?;
        check_source_count(repr.num_sources).map_err(D::Error::custom)?;
        let expected = (1usize << repr.num_sources) - 1;
        if repr.elements.len() != expected {
            return Err(D::Error::custom(format!(
                "expected {expected} elements for {} sources, got {}",
                repr.num_sources,
                repr.elements.len()
            )));
        }
        let mut values = vec![f64::NAN; expected];
        for el in &repr.elements {
            if el.subset == 0 || el.subset as usize > expected {
                return Err(D::Error::custom(format!(
                    "subset {:#b} out of range",
                    el.subset
                )));
            }
            let slot = &mut values[el.subset as usize - 1];
            if !slot.is_nan() {
                return Err(D::Error::custom(format!(
                    "subset {:#b} appears more than once",
                    el.subset
                )));
            }
            *slot = el.value;
        }
        if let Some(k) = values.iter().position(|v| v.is_nan()) {
            return Err(D::Error::custom(format!("subset {:#b} missing", k + 1)));
        }
        FuzzyMeasure::new(repr.num_sources, values).map_err(D::Error::custom)
    }
}
