//! Bags: groups of instances sharing one bag-level label.
//!
//! Labels are `f64` in `[0, 1]`. Classification objectives additionally
//! require every label to be exactly 0 or 1; regression allows the full
//! range. A [`BagSet`] fixes the number of sources and guarantees every
//! instance in every bag matches it.

use crate::choquet::Instance;
use thiserror::Error;

/// Errors from bag and bag-set construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BagError {
    /// A bag must hold at least one instance.
    #[error("bag {0:?} has no instances")]
    EmptyBag(String),
    /// Bag labels live in `[0, 1]`.
    #[error("bag {bag_id:?} has label {label}, outside [0, 1]")]
    LabelOutOfRange { bag_id: String, label: f64 },
    /// Instances within a bag must agree on the number of sources.
    #[error("bag {bag_id:?} mixes instance widths {first} and {other}")]
    MixedWidths {
        bag_id: String,
        first: usize,
        other: usize,
    },
    /// Every bag in a set must match the set's source count.
    #[error("bag {bag_id:?} has {got}-source instances, expected {expected}")]
    DimensionMismatch {
        bag_id: String,
        expected: usize,
        got: usize,
    },
}

/// A labelled group of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    id: String,
    label: f64,
    instances: Vec<Instance>,
}

impl Bag {
    /// Builds a bag, checking the label range, non-emptiness, and that all
    /// instances share one width.
    pub fn new(
        id: impl Into<String>,
        label: f64,
        instances: Vec<Instance>,
    ) -> Result<Self, BagError> {
        let id = id.into();
        if !label.is_finite() || !(0.0..=1.0).contains(&label) {
            return Err(BagError::LabelOutOfRange { bag_id: id, label });
        }
        let Some(first) = instances.first() else {
            return Err(BagError::EmptyBag(id));
        };
        let width = first.len();
        if let Some(bad) = instances.iter().find(|i| i.len() != width) {
            return Err(BagError::MixedWidths {
                bag_id: id,
                first: width,
                other: bad.len(),
            });
        }
        Ok(Bag {
            id,
            label,
            instances,
        })
    }

    /// Opaque bag identifier.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Bag-level label in `[0, 1]`.
    pub fn label(&self) -> f64 {
        self.label
    }

    /// The bag's instances.
    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    /// Number of sources per instance.
    pub fn num_sources(&self) -> usize {
        self.instances[0].len()
    }

    /// True when the label is exactly 0 or exactly 1.
    pub fn has_binary_label(&self) -> bool {
        self.label == 0.0 || self.label == 1.0
    }
}

/// An ordered collection of bags over a fixed number of sources.
#[derive(Debug, Clone, PartialEq)]
pub struct BagSet {
    num_sources: usize,
    bags: Vec<Bag>,
}

impl BagSet {
    /// Builds a set, verifying every bag's instances have `num_sources`
    /// confidences. An empty set is allowed (training rejects it later).
    pub fn new(num_sources: usize, bags: Vec<Bag>) -> Result<Self, BagError> {
        for bag in &bags {
            if bag.num_sources() != num_sources {
                return Err(BagError::DimensionMismatch {
                    bag_id: bag.id().to_string(),
                    expected: num_sources,
                    got: bag.num_sources(),
                });
            }
        }
        Ok(BagSet { num_sources, bags })
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    /// Total instance count across all bags.
    pub fn total_instances(&self) -> usize {
        self.bags.iter().map(|b| b.instances().len()).sum()
    }

    /// True when every bag label is exactly 0 or 1.
    pub fn labels_are_binary(&self) -> bool {
        self.bags.iter().all(Bag::has_binary_label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(v: &[f64]) -> Instance {
        Instance::new(v.to_vec()).unwrap()
    }

    #[test]
    fn bag_construction_validates() {
        assert!(matches!(
            Bag::new("a", 0.5, vec![]).unwrap_err(),
            BagError::EmptyBag(_)
        ));
        assert!(matches!(
            Bag::new("a", 1.5, vec![inst(&[0.1])]).unwrap_err(),
            BagError::LabelOutOfRange { .. }
        ));
        assert!(matches!(
            Bag::new("a", 0.5, vec![inst(&[0.1]), inst(&[0.1, 0.2])]).unwrap_err(),
            BagError::MixedWidths { .. }
        ));
        let b = Bag::new("a", 0.5, vec![inst(&[0.1, 0.2])]).unwrap();
        assert_eq!(b.num_sources(), 2);
        assert!(!b.has_binary_label());
    }

    #[test]
    fn bagset_enforces_uniform_width() {
        let b = Bag::new("a", 1.0, vec![inst(&[0.1, 0.2])]).unwrap();
        assert!(matches!(
            BagSet::new(3, vec![b.clone()]).unwrap_err(),
            BagError::DimensionMismatch { expected: 3, got: 2, .. }
        ));
        let set = BagSet::new(2, vec![b]).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.total_instances(), 1);
        assert!(set.labels_are_binary());
    }
}
