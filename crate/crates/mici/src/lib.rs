//! Multiple-instance Choquet integral fusion.
//!
//! This crate learns monotone normalized fuzzy measures for Choquet-integral
//! fusion of multiple detector/estimator outputs when only *bag-level* labels
//! are available: a positive bag is known to contain at least one target
//! sample, a negative bag none, and for regression a bag carries one
//! real-valued label that at least one of its samples should explain.
//!
//! The pieces:
//! - [`measure`]: the fuzzy-measure lattice — validation, neighbour
//!   intervals, random initialization.
//! - [`choquet`]: the integral itself, sort chains, usage counts, and an
//!   independent Möbius-transform evaluation route used as a cross-check.
//! - [`bag`]: bags and bag sets.
//! - [`objectives`]: bag-level training objectives (min-max, generalized
//!   mean, noisy-or, and the regression least-squares form), all under a
//!   unified lower-is-better convention.
//! - [`optimizer`]: the sampling-based evolutionary optimizer with
//!   truncated-Gaussian small/large mutations, usage-count-driven element
//!   choice, and elitist + weighted-multinomial selection.
//! - [`datagen`]: synthetic experiment generators and spatial window-bag
//!   construction.
//! - [`eval`]: relative error, RMSE, FAR-capped ROC-AUC, and bag-level
//!   prediction aggregation.
//! - [`io`]: CSV/JSON persistence with atomic writes.
//! - [`cli`]: the `mici` command-line interface.

pub mod bag;
pub mod choquet;
pub mod cli;
pub mod datagen;
pub mod eval;
pub mod io;
pub mod measure;
pub mod objectives;
pub mod optimizer;

pub use bag::{Bag, BagError, BagSet};
pub use choquet::{
    choquet_integral, mobius_choquet_oracle, sort_chain, usage_counts, ChoquetError, Instance,
    UsageCounts,
};
pub use datagen::{
    add_white_noise, build_window_bags, denormalize_labels, gen_synthetic, instance_with_ci,
    normalize_labels, ConfidenceGrid, DataGenError, LabelScale, SynthConfig, SynthData, SynthTask,
};
pub use eval::{
    predict_bags, predict_instances, relative_error, rmse, roc_auc_capped, roc_points,
    Aggregation, EvalError, RelativeErrorKind,
};
pub use io::{
    atomic_write, read_bags, read_model, read_predictions, read_truth, score_bags, truth_rows,
    write_bags, write_bench, write_model, write_predictions, write_roc, write_trace, write_truth,
    BenchRecord, IoError, ModelFile, ScoreRow, ScoreSet, AGGREGATE_IDX,
};
pub use measure::{FuzzyMeasure, InitMode, MeasureError, ValidInterval, MAX_SOURCES};
pub use objectives::{
    evaluate_objective, genmean_objective, micir_objective, minmax_objective, noisyor_objective,
    reconstruct_bags_for_classification, ObjectiveError, ObjectiveSpec,
};
pub use optimizer::{
    mutate_large, mutate_small, mutate_valid_interval, sample_truncated_gaussian,
    select_next_generation, train, IterationRecord, OptimizerConfig, OptimizerError, Sampler,
    TrainedModel,
};
