//! File formats: bag CSV, score CSV (predictions and ground truth), model
//! JSON, and the trace/curve/benchmark CSV reports. All writers go through
//! an atomic temp-file-then-rename so readers never observe half-written
//! files.

use crate::bag::{Bag, BagError, BagSet};
use crate::choquet::{ChoquetError, Instance};
use crate::datagen::SynthData;
use crate::eval::{predict_instances, Aggregation, EvalError};
use crate::measure::FuzzyMeasure;
use crate::objectives::ObjectiveSpec;
use crate::optimizer::{IterationRecord, TrainedModel};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

/// Sentinel used in the `instance_idx` column for bag-level rows.
pub const AGGREGATE_IDX: &str = "agg";

/// Errors from reading and writing dataset, model, and report files.
#[derive(Debug, Error)]
pub enum IoError {
    /// Underlying filesystem failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Low-level CSV failure (encoding, quoting, IO).
    #[error(transparent)]
    Csv(#[from] csv::Error),
    /// Model file failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    /// The file's header row is not the expected schema.
    #[error("unexpected header: expected `{expected}`, got `{got}`")]
    UnexpectedHeader { expected: String, got: String },
    /// A field failed to parse; lines are 1-based and count the header.
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    /// A row has the wrong number of fields.
    #[error("line {line}: expected {expected} fields, got {got}")]
    RaggedWidth {
        line: u64,
        expected: usize,
        got: usize,
    },
    /// A confidence fell outside the unit interval.
    #[error("line {line}: confidence {value} must lie in [0, 1]")]
    RangeError { line: u64, value: f64 },
    /// A bag's rows disagree about its label.
    #[error("line {line}: bag `{bag_id}` was labelled {first} before, now {got}")]
    InconsistentLabel {
        line: u64,
        bag_id: String,
        first: f64,
        got: f64,
    },
    /// The same (bag, instance) key appeared twice.
    #[error("line {line}: duplicate row for bag `{bag_id}`, instance `{instance}`")]
    DuplicateRow {
        line: u64,
        bag_id: String,
        instance: String,
    },
    /// Bag assembly failure.
    #[error(transparent)]
    Bag(#[from] BagError),
    /// Instance assembly failure.
    #[error(transparent)]
    Choquet(#[from] ChoquetError),
    /// Prediction failure.
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Writes `content` to `path` atomically: the bytes land in a temporary
/// file in the destination directory first and are renamed into place.
pub fn atomic_write(path: &Path, content: &[u8]) -> Result<(), IoError> {
    use std::io::Write;
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(content)?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}

fn bag_header(num_sources: usize) -> Vec<String> {
    let mut header = vec!["bag_id".to_string(), "label".to_string()];
    header.extend((1..=num_sources).map(|i| format!("src_{i}")));
    header
}

fn record_line(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map_or(fallback, |p| p.line())
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64, IoError> {
    field.trim().parse::<f64>().map_err(|e| IoError::ParseError {
        line,
        message: format!("cannot parse {what} `{field}`: {e}"),
    })
}

/// Reads a bag dataset. The header must be exactly
/// `bag_id,label,src_1,…,src_m`; rows with the same `bag_id` form one bag
/// in order of first appearance and must agree on the label.
pub fn read_bags(path: &Path) -> Result<BagSet, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() < 3 || header[0] != "bag_id" || header[1] != "label" {
        return Err(IoError::UnexpectedHeader {
            expected: "bag_id,label,src_1,…".to_string(),
            got: header.join(","),
        });
    }
    let num_sources = header.len() - 2;
    let expected_header = bag_header(num_sources);
    if header != expected_header {
        return Err(IoError::UnexpectedHeader {
            expected: expected_header.join(","),
            got: header.join(","),
        });
    }

    struct PendingBag {
        id: String,
        label: f64,
        first_line: u64,
        instances: Vec<Instance>,
    }
    let mut order: Vec<PendingBag> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record_line(&record, i as u64 + 2);
        if record.len() != num_sources + 2 {
            return Err(IoError::RaggedWidth {
                line,
                expected: num_sources + 2,
                got: record.len(),
            });
        }
        let bag_id = record[0].trim().to_string();
        if bag_id.is_empty() {
            return Err(IoError::ParseError {
                line,
                message: "empty bag_id".to_string(),
            });
        }
        let label = parse_f64(&record[1], line, "label")?;
        let mut confidences = Vec::with_capacity(num_sources);
        for field in record.iter().skip(2) {
            let value = parse_f64(field, line, "confidence")?;
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(IoError::RangeError { line, value });
            }
            confidences.push(value);
        }
        let instance = Instance::new(confidences)?;
        match index.get(&bag_id) {
            Some(&slot) => {
                let bag = &mut order[slot];
                if bag.label != label {
                    return Err(IoError::InconsistentLabel {
                        line,
                        bag_id,
                        first: bag.label,
                        got: label,
                    });
                }
                bag.instances.push(instance);
            }
            None => {
                index.insert(bag_id.clone(), order.len());
                order.push(PendingBag {
                    id: bag_id,
                    label,
                    first_line: line,
                    instances: vec![instance],
                });
            }
        }
    }
    let bags = order
        .into_iter()
        .map(|pending| {
            Bag::new(pending.id, pending.label, pending.instances).map_err(|e| match e {
                BagError::LabelOutOfRange { .. } => IoError::ParseError {
                    line: pending.first_line,
                    message: e.to_string(),
                },
                other => IoError::Bag(other),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let num_sources = bags.first().map_or(num_sources, |b| b.num_sources());
    Ok(BagSet::new(num_sources, bags)?)
}

/// Writes a bag dataset in the schema `read_bags` expects. Values are
/// printed in shortest round-trip form, so a write/read cycle reproduces
/// the confidences bit for bit.
pub fn write_bags(path: &Path, bags: &BagSet) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(bag_header(bags.num_sources()))?;
    for bag in bags.bags() {
        for instance in bag.instances() {
            let mut row = vec![bag.id().to_string(), bag.label().to_string()];
            row.extend(instance.confidences().iter().map(|v| v.to_string()));
            writer.write_record(&row)?;
        }
    }
    let buf = writer.into_inner().expect("in-memory writer cannot fail");
    atomic_write(path, &buf)
}

/// One row of a score file: an instance-level score, or a bag-level
/// aggregate when `instance` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub bag_id: String,
    /// `None` marks a bag-level aggregate row.
    pub instance: Option<usize>,
    pub value: f64,
}

/// An ordered set of score rows, as stored in prediction and truth files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub rows: Vec<ScoreRow>,
}

impl ScoreSet {
    /// Instance-level values keyed by `(bag_id, instance)`.
    pub fn instance_values(&self) -> Vec<(&str, usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.instance.map(|i| (r.bag_id.as_str(), i, r.value)))
            .collect()
    }

    /// Bag-level aggregate values keyed by `bag_id`.
    pub fn bag_values(&self) -> Vec<(&str, f64)> {
        self.rows
            .iter()
            .filter(|r| r.instance.is_none())
            .map(|r| (r.bag_id.as_str(), r.value))
            .collect()
    }
}

const SCORE_PREDICTION_COLUMN: &str = "ci_score";
const SCORE_TRUTH_COLUMN: &str = "true_label";

fn write_scores(path: &Path, rows: &[ScoreRow], value_column: &str) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["bag_id", "instance_idx", value_column])?;
    for row in rows {
        let idx = row
            .instance
            .map_or_else(|| AGGREGATE_IDX.to_string(), |i| i.to_string());
        writer.write_record([row.bag_id.as_str(), &idx, &row.value.to_string()])?;
    }
    let buf = writer.into_inner().expect("in-memory writer cannot fail");
    atomic_write(path, &buf)
}

fn read_scores(path: &Path, value_column: &str) -> Result<ScoreSet, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let expected = ["bag_id", "instance_idx", value_column];
    if header != expected {
        return Err(IoError::UnexpectedHeader {
            expected: expected.join(","),
            got: header.join(","),
        });
    }
    let mut rows = Vec::new();
    let mut seen: HashMap<(String, Option<usize>), u64> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record_line(&record, i as u64 + 2);
        if record.len() != 3 {
            return Err(IoError::RaggedWidth {
                line,
                expected: 3,
                got: record.len(),
            });
        }
        let bag_id = record[0].trim().to_string();
        let idx_field = record[1].trim();
        let instance = if idx_field == AGGREGATE_IDX {
            None
        } else {
            Some(idx_field.parse::<usize>().map_err(|e| IoError::ParseError {
                line,
                message: format!("instance_idx `{idx_field}` is neither a number nor `{AGGREGATE_IDX}`: {e}"),
            })?)
        };
        let value = parse_f64(&record[2], line, value_column)?;
        if seen.insert((bag_id.clone(), instance), line).is_some() {
            return Err(IoError::DuplicateRow {
                line,
                bag_id,
                instance: idx_field.to_string(),
            });
        }
        rows.push(ScoreRow {
            bag_id,
            instance,
            value,
        });
    }
    Ok(ScoreSet { rows })
}

/// Writes model predictions (`bag_id,instance_idx,ci_score`).
pub fn write_predictions(path: &Path, scores: &ScoreSet) -> Result<(), IoError> {
    write_scores(path, &scores.rows, SCORE_PREDICTION_COLUMN)
}

/// Reads model predictions (`bag_id,instance_idx,ci_score`).
pub fn read_predictions(path: &Path) -> Result<ScoreSet, IoError> {
    read_scores(path, SCORE_PREDICTION_COLUMN)
}

/// Writes ground truth (`bag_id,instance_idx,true_label`).
pub fn write_truth(path: &Path, scores: &ScoreSet) -> Result<(), IoError> {
    write_scores(path, &scores.rows, SCORE_TRUTH_COLUMN)
}

/// Reads ground truth (`bag_id,instance_idx,true_label`).
pub fn read_truth(path: &Path) -> Result<ScoreSet, IoError> {
    read_scores(path, SCORE_TRUTH_COLUMN)
}

/// Fuses every instance and aggregates every bag: instance rows in bag
/// order followed by the bag's aggregate row.
pub fn score_bags(
    measure: &FuzzyMeasure,
    bags: &BagSet,
    aggregation: Aggregation,
) -> Result<ScoreSet, IoError> {
    let per_instance = predict_instances(measure, bags)?;
    let mut rows = Vec::new();
    for (bag, scores) in bags.bags().iter().zip(&per_instance) {
        for (i, &score) in scores.iter().enumerate() {
            rows.push(ScoreRow {
                bag_id: bag.id().to_string(),
                instance: Some(i),
                value: score,
            });
        }
        let agg = match aggregation {
            Aggregation::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
            Aggregation::Max => scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Min => scores.iter().cloned().fold(f64::INFINITY, f64::min),
        };
        rows.push(ScoreRow {
            bag_id: bag.id().to_string(),
            instance: None,
            value: agg,
        });
    }
    Ok(ScoreSet { rows })
}

/// Ground-truth rows for a synthetic dataset: per-instance truth followed
/// by the bag's label as its aggregate truth.
pub fn truth_rows(data: &SynthData) -> ScoreSet {
    let mut rows = Vec::new();
    for (bag, truth) in data.bags.bags().iter().zip(&data.instance_truth) {
        for (i, &t) in truth.iter().enumerate() {
            rows.push(ScoreRow {
                bag_id: bag.id().to_string(),
                instance: Some(i),
                value: t,
            });
        }
        rows.push(ScoreRow {
            bag_id: bag.id().to_string(),
            instance: None,
            value: bag.label(),
        });
    }
    ScoreSet { rows }
}

/// The on-disk model: the learned measure inline (source count plus one
/// value per lattice element), the objective it was trained against, and
/// the reproducibility fields. Serialization contains nothing
/// time-dependent, so a fixed seed yields a byte-identical file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub measure: FuzzyMeasure,
    pub objective: ObjectiveSpec,
    pub best_objective: f64,
    pub seed: u64,
    pub iterations: u32,
}

impl From<&TrainedModel> for ModelFile {
    fn from(model: &TrainedModel) -> Self {
        ModelFile {
            measure: model.measure.clone(),
            objective: model.objective.clone(),
            best_objective: model.best_objective,
            seed: model.config.seed,
            iterations: model.iterations_run,
        }
    }
}

/// Writes a trained model as pretty-printed JSON.
pub fn write_model(path: &Path, model: &ModelFile) -> Result<(), IoError> {
    let mut buf = serde_json::to_vec_pretty(model)?;
    buf.push(b'\n');
    atomic_write(path, &buf)
}

/// Reads a model JSON file; the embedded measure is fully revalidated.
pub fn read_model(path: &Path) -> Result<ModelFile, IoError> {
    let content = std::fs::read(path)?;
    Ok(serde_json::from_slice(&content)?)
}

/// Writes a training trace (`iter,best_objective,wallclock_ms`).
pub fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["iter", "best_objective", "wallclock_ms"])?;
    for record in trace {
        writer.write_record([
            record.iteration.to_string(),
            record.best_objective.to_string(),
            record.wallclock_ms.to_string(),
        ])?;
    }
    let buf = writer.into_inner().expect("in-memory writer cannot fail");
    atomic_write(path, &buf)
}

/// Writes a ROC polyline (`far,pd`).
pub fn write_roc(path: &Path, points: &[(f64, f64)]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["far", "pd"])?;
    for (far, pd) in points {
        writer.write_record([far.to_string(), pd.to_string()])?;
    }
    let buf = writer.into_inner().expect("in-memory writer cannot fail");
    atomic_write(path, &buf)
}

/// One benchmark measurement: how long one sampler took on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub sampler: String,
    pub seed: u64,
    pub iterations: u32,
    pub wallclock_ms: f64,
}

/// Writes benchmark results (`sampler,seed,iterations,wallclock_ms`).
pub fn write_bench(path: &Path, records: &[BenchRecord]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["sampler", "seed", "iterations", "wallclock_ms"])?;
    for record in records {
        writer.write_record([
            record.sampler.clone(),
            record.seed.to_string(),
            record.iterations.to_string(),
            record.wallclock_ms.to_string(),
        ])?;
    }
    let buf = writer.into_inner().expect("in-memory writer cannot fail");
    atomic_write(path, &buf)
}
