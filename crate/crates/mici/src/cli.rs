//! Command-line interface: train a measure on bag-labelled CSV data,
//! predict with a saved model, evaluate predictions against ground truth,
//! generate synthetic experiments, and benchmark the samplers.
//!
//! Exit codes: 0 on success, 1 on any data or computation error, 2 on
//! command-line usage errors.

use crate::datagen::{gen_synthetic, SynthConfig, SynthTask};
use crate::eval::{relative_error, rmse, roc_auc_capped, roc_points, Aggregation, RelativeErrorKind};
use crate::io::{
    read_bags, read_model, read_predictions, read_truth, score_bags, truth_rows, write_bags,
    write_bench, write_model, write_predictions, write_roc, write_trace, write_truth, BenchRecord,
    ModelFile, ScoreSet,
};
use crate::objectives::{reconstruct_bags_for_classification, ObjectiveSpec};
use crate::optimizer::{train, OptimizerConfig, Sampler};
use clap::{Parser, Subcommand, ValueEnum};
use std::collections::HashMap;
use std::error::Error;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "mici",
    version,
    about = "Choquet-integral fusion from bag-level labels: train, predict, evaluate, synthesize, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a fuzzy measure from a bag CSV file.
    Train(TrainArgs),
    /// Fuse a dataset with a saved model and write per-instance and
    /// per-bag scores.
    Predict(PredictArgs),
    /// Compare a prediction file against a ground-truth file and print the
    /// metric value.
    Eval(EvalArgs),
    /// Generate a synthetic experiment (data CSV plus a truth companion
    /// file).
    Synth(SynthArgs),
    /// Time the samplers across seeds on a synthetic task.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    /// Squared worst-case deviations: negative bags by their highest fused
    /// instance, positive bags by their closest-to-1 instance.
    Minmax,
    /// Soft version of minmax with generalized-mean exponents p1 and p2.
    Genmean,
    /// Noisy-or likelihood with a Gaussian kernel (mu, sigma2).
    Noisyor,
    /// Regression: each bag by its best-fitting instance against the
    /// real-valued bag label.
    Micir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    /// Usage-count-driven small/large mutations.
    Me,
    /// Baseline: resample the widest-interval element uniformly.
    Vi,
}

impl From<SamplerArg> for Sampler {
    fn from(arg: SamplerArg) -> Self {
        match arg {
            SamplerArg::Me => Sampler::Me,
            SamplerArg::Vi => Sampler::Vi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    /// Binary bags with positive-type instances injected into negative
    /// bags at the sweep fraction.
    Contamination,
    /// Real-valued bags where the sweep fraction of instances fuses
    /// exactly to the bag label.
    PrimaryRatio,
    /// All-primary regression bags with white noise at the sweep value in
    /// decibels.
    Snr,
}

impl From<TaskArg> for SynthTask {
    fn from(arg: TaskArg) -> Self {
        match arg {
            TaskArg::Contamination => SynthTask::Contamination,
            TaskArg::PrimaryRatio => SynthTask::PrimaryRatio,
            TaskArg::Snr => SynthTask::Snr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggArg {
    Mean,
    Max,
    Min,
}

impl From<AggArg> for Aggregation {
    fn from(arg: AggArg) -> Self {
        match arg {
            AggArg::Mean => Aggregation::Mean,
            AggArg::Max => Aggregation::Max,
            AggArg::Min => Aggregation::Min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    /// Mean absolute deviation (binary labels).
    RelerrCls,
    /// Mean deviation relative to the truth magnitude.
    RelerrReg,
    /// Root-mean-square error.
    Rmse,
    /// Area under the ROC curve up to the false-alarm cap.
    Auc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    /// Compare instance rows.
    Instance,
    /// Compare bag-level aggregate rows.
    Bag,
}

#[derive(Debug, Parser)]
struct TrainArgs {
    /// Bag CSV file (bag_id,label,src_1,…).
    #[arg(long)]
    data: PathBuf,
    /// Objective to minimize.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Minmax)]
    objective: ObjectiveArg,
    /// Positive generalized-mean exponent (genmean only).
    #[arg(long, default_value_t = 10.0)]
    p1: f64,
    /// Negative generalized-mean exponent (genmean only).
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    p2: f64,
    /// Gaussian kernel centre (noisyor only).
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Gaussian kernel variance (noisyor only).
    #[arg(long, default_value_t = 0.1)]
    sigma2: f64,
    /// Population size (even, at least 2).
    #[arg(long, default_value_t = 30)]
    pop: usize,
    /// Iteration cap.
    #[arg(long, default_value_t = 5000)]
    max_iter: u32,
    /// Stop once a generation improves the best objective by no more than
    /// this.
    #[arg(long, default_value_t = 1e-4)]
    fit_thresh: f64,
    /// Probability of a small mutation (me sampler).
    #[arg(long, default_value_t = 0.8)]
    eta: f64,
    /// Mutation scheme.
    #[arg(long, value_enum, default_value_t = SamplerArg::Me)]
    sampler: SamplerArg,
    /// Seed for the whole run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Optionally write the best-so-far trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Split every negative bag into one single-instance bag per instance
    /// before training (classification via the regression objective).
    #[arg(long)]
    reconstruct: bool,
}

#[derive(Debug, Parser)]
struct PredictArgs {
    /// Model JSON produced by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Bag CSV file to fuse.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the prediction CSV.
    #[arg(long)]
    out: PathBuf,
    /// How instance scores collapse into the bag-level `agg` rows.
    #[arg(long, value_enum, default_value_t = AggArg::Max)]
    agg: AggArg,
}

#[derive(Debug, Parser)]
struct EvalArgs {
    /// Prediction CSV (bag_id,instance_idx,ci_score).
    #[arg(long)]
    preds: PathBuf,
    /// Ground-truth CSV (bag_id,instance_idx,true_label).
    #[arg(long)]
    truth: PathBuf,
    /// Metric to print.
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// False-alarm cap for `auc`.
    #[arg(long, default_value_t = 1e-3)]
    far_cap: f64,
    /// Which rows to compare.
    #[arg(long, value_enum, default_value_t = LevelArg::Instance)]
    level: LevelArg,
    /// Optionally write the ROC polyline CSV here (requires binary truth).
    #[arg(long)]
    roc_out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
struct SynthArgs {
    /// Which experiment to generate.
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Sweep value: a fraction in [0, 1] for contamination and
    /// primary-ratio, decibels for snr.
    #[arg(long, allow_hyphen_values = true)]
    sweep: f64,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the bag CSV; the ground truth lands next to it with
    /// a `.truth.csv` extension.
    #[arg(long)]
    out: PathBuf,
    /// Override the task's default bag count.
    #[arg(long)]
    num_bags: Option<usize>,
    /// Override the task's default instances per bag.
    #[arg(long)]
    bag_size: Option<usize>,
    /// Override the task's default source count.
    #[arg(long)]
    num_sources: Option<usize>,
}

#[derive(Debug, Parser)]
struct BenchArgs {
    /// Synthetic task to train on.
    #[arg(long, value_enum, default_value_t = TaskArg::PrimaryRatio)]
    task: TaskArg,
    /// Sweep value for the task.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    sweep: f64,
    /// Seed for the dataset itself.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Samplers to time.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SamplerArg::Me, SamplerArg::Vi])]
    samplers: Vec<SamplerArg>,
    /// Training seeds: `a..b` (half-open), `a..=b` (inclusive), or a
    /// comma-separated list.
    #[arg(long, default_value = "1..=5")]
    seeds: String,
    /// Iteration cap per run.
    #[arg(long, default_value_t = 5000)]
    max_iter: u32,
    /// Population size per run.
    #[arg(long, default_value_t = 30)]
    pop: usize,
    /// Stagnation threshold per run.
    #[arg(long, default_value_t = 1e-4)]
    fit_thresh: f64,
    /// Small-mutation probability (me sampler).
    #[arg(long, default_value_t = 0.8)]
    eta: f64,
    /// Where to write the benchmark CSV.
    #[arg(long)]
    out: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::Train(args) => run_train(args),
        Command::Predict(args) => run_predict(args),
        Command::Eval(args) => run_eval(args),
        Command::Synth(args) => run_synth(args),
        Command::Bench(args) => run_bench(args),
    }
}

fn objective_spec(args: &TrainArgs) -> ObjectiveSpec {
    match args.objective {
        ObjectiveArg::Minmax => ObjectiveSpec::MinMax,
        ObjectiveArg::Genmean => ObjectiveSpec::GenMean {
            p1: args.p1,
            p2: args.p2,
        },
        ObjectiveArg::Noisyor => ObjectiveSpec::NoisyOr {
            mu: args.mu,
            sigma2: args.sigma2,
        },
        ObjectiveArg::Micir => ObjectiveSpec::Micir,
    }
}

fn run_train(args: TrainArgs) -> Result<(), Box<dyn Error>> {
    let bags = read_bags(&args.data)?;
    let bags = if args.reconstruct {
        reconstruct_bags_for_classification(&bags)?
    } else {
        bags
    };
    let spec = objective_spec(&args);
    let config = OptimizerConfig {
        population: args.pop,
        max_iterations: args.max_iter,
        fitness_threshold: args.fit_thresh,
        small_rate: args.eta,
        sampler: args.sampler.into(),
        seed: args.seed,
    };
    let model = train(&bags, &spec, &config)?;
    write_model(&args.out, &ModelFile::from(&model))?;
    if let Some(trace_path) = &args.trace {
        write_trace(trace_path, &model.trace)?;
    }
    println!(
        "best_objective={} iterations={}",
        model.best_objective, model.iterations_run
    );
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), Box<dyn Error>> {
    let model = read_model(&args.model)?;
    let bags = read_bags(&args.data)?;
    if model.measure.num_sources() != bags.num_sources() {
        return Err(format!(
            "model fuses {} sources but the data has {}",
            model.measure.num_sources(),
            bags.num_sources()
        )
        .into());
    }
    let scores = score_bags(&model.measure, &bags, args.agg.into())?;
    write_predictions(&args.out, &scores)?;
    Ok(())
}

/// Pairs predictions with truth at the requested level, in prediction
/// order, keeping only keys present in both files.
fn paired_values(
    preds: &ScoreSet,
    truth: &ScoreSet,
    level: LevelArg,
) -> Result<(Vec<f64>, Vec<f64>), Box<dyn Error>> {
    let (mut p, mut t) = (Vec::new(), Vec::new());
    match level {
        LevelArg::Instance => {
            let map: HashMap<(&str, usize), f64> = truth
                .instance_values()
                .into_iter()
                .map(|(id, i, v)| ((id, i), v))
                .collect();
            for (id, i, v) in preds.instance_values() {
                if let Some(&tv) = map.get(&(id, i)) {
                    p.push(v);
                    t.push(tv);
                }
            }
        }
        LevelArg::Bag => {
            let map: HashMap<&str, f64> = truth.bag_values().into_iter().collect();
            for (id, v) in preds.bag_values() {
                if let Some(&tv) = map.get(id) {
                    p.push(v);
                    t.push(tv);
                }
            }
        }
    }
    if p.is_empty() {
        return Err("prediction and truth files share no rows at this level".into());
    }
    Ok((p, t))
}

fn run_eval(args: EvalArgs) -> Result<(), Box<dyn Error>> {
    let preds = read_predictions(&args.preds)?;
    let truth = read_truth(&args.truth)?;
    let (p, t) = paired_values(&preds, &truth, args.level)?;
    let value = match args.metric {
        MetricArg::RelerrCls => relative_error(&p, &t, RelativeErrorKind::Classification)?,
        MetricArg::RelerrReg => relative_error(&p, &t, RelativeErrorKind::Regression)?,
        MetricArg::Rmse => rmse(&p, &t)?,
        MetricArg::Auc => roc_auc_capped(&p, &t, args.far_cap)?,
    };
    if let Some(roc_path) = &args.roc_out {
        write_roc(roc_path, &roc_points(&p, &t)?)?;
    }
    println!("{value}");
    Ok(())
}

fn truth_companion_path(out: &Path) -> PathBuf {
    out.with_extension("truth.csv")
}

fn run_synth(args: SynthArgs) -> Result<(), Box<dyn Error>> {
    let config = SynthConfig {
        task: args.task.into(),
        sweep: args.sweep,
        seed: args.seed,
        num_bags: args.num_bags,
        bag_size: args.bag_size,
        num_sources: args.num_sources,
    };
    let data = gen_synthetic(&config)?;
    write_bags(&args.out, &data.bags)?;
    let truth_path = truth_companion_path(&args.out);
    write_truth(&truth_path, &truth_rows(&data))?;
    println!("truth={}", truth_path.display());
    Ok(())
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Box<dyn Error>> {
    let spec = spec.trim();
    let parse_one = |s: &str| -> Result<u64, Box<dyn Error>> {
        s.trim()
            .parse::<u64>()
            .map_err(|e| format!("invalid seed `{s}`: {e}").into())
    };
    if let Some((start, rest)) = spec.split_once("..") {
        let (end, inclusive) = match rest.strip_prefix('=') {
            Some(r) => (r, true),
            None => (rest, false),
        };
        let start = parse_one(start)?;
        let end = parse_one(end)?;
        let end = if inclusive {
            end.checked_add(1)
                .ok_or("seed range end overflows")?
        } else {
            end
        };
        if end <= start {
            return Err(format!("seed range `{spec}` is empty").into());
        }
        Ok((start..end).collect())
    } else {
        spec.split(',').map(parse_one).collect()
    }
}

fn bench_objective(task: TaskArg) -> ObjectiveSpec {
    match task {
        TaskArg::Contamination => ObjectiveSpec::MinMax,
        TaskArg::PrimaryRatio | TaskArg::Snr => ObjectiveSpec::Micir,
    }
}

fn run_bench(args: BenchArgs) -> Result<(), Box<dyn Error>> {
    let seeds = parse_seeds(&args.seeds)?;
    if args.samplers.is_empty() {
        return Err("no samplers requested".into());
    }
    let data = gen_synthetic(&SynthConfig {
        task: args.task.into(),
        sweep: args.sweep,
        seed: args.data_seed,
        num_bags: None,
        bag_size: None,
        num_sources: None,
    })?;
    let spec = bench_objective(args.task);
    let mut records = Vec::new();
    for &sampler in &args.samplers {
        for &seed in &seeds {
            let config = OptimizerConfig {
                population: args.pop,
                max_iterations: args.max_iter,
                fitness_threshold: args.fit_thresh,
                small_rate: args.eta,
                sampler: sampler.into(),
                seed,
            };
            let model = train(&data.bags, &spec, &config)?;
            let wallclock_ms = model
                .trace
                .last()
                .map_or(0.0, |record| record.wallclock_ms);
            let name = match sampler {
                SamplerArg::Me => "me",
                SamplerArg::Vi => "vi",
            };
            println!(
                "sampler={name} seed={seed} iterations={} best_objective={} ms={wallclock_ms:.1}",
                model.iterations_run, model.best_objective
            );
            records.push(BenchRecord {
                sampler: name.to_string(),
                seed,
                iterations: model.iterations_run,
                wallclock_ms,
            });
        }
    }
    write_bench(&args.out, &records)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs_parse_ranges_and_lists() {
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_seeds("1..=5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("3, 1, 2").unwrap(), vec![3, 1, 2]);
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("a..b").is_err());
        assert!(parse_seeds("1,,2").is_err());
    }

    #[test]
    fn train_arguments_accept_negative_exponents() {
        let cli = Cli::try_parse_from([
            "mici", "train", "--data", "d.csv", "--out", "m.json", "--objective", "genmean",
            "--p2", "-50",
        ])
        .unwrap();
        match cli.command {
            Command::Train(args) => {
                assert_eq!(args.p2, -50.0);
                assert_eq!(args.p1, 10.0);
                assert_eq!(args.pop, 30);
                assert_eq!(args.max_iter, 5000);
                assert_eq!(args.fit_thresh, 1e-4);
                assert_eq!(args.eta, 0.8);
                assert_eq!(args.sampler, SamplerArg::Me);
                assert!(!args.reconstruct);
            }
            other => panic!("expected train, parsed {other:?}"),
        }
    }

    #[test]
    fn synth_arguments_accept_negative_decibels() {
        let cli = Cli::try_parse_from([
            "mici", "synth", "--task", "snr", "--sweep", "-10", "--out", "d.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Synth(args) => {
                assert_eq!(args.task, TaskArg::Snr);
                assert_eq!(args.sweep, -10.0);
            }
            other => panic!("expected synth, parsed {other:?}"),
        }
    }

    #[test]
    fn bench_samplers_parse_as_a_comma_list() {
        let cli = Cli::try_parse_from([
            "mici", "bench", "--out", "b.csv", "--samplers", "vi,me", "--seeds", "2..4",
        ])
        .unwrap();
        match cli.command {
            Command::Bench(args) => {
                assert_eq!(args.samplers, vec![SamplerArg::Vi, SamplerArg::Me]);
                assert_eq!(parse_seeds(&args.seeds).unwrap(), vec![2, 3]);
                assert_eq!(args.task, TaskArg::PrimaryRatio);
            }
            other => panic!("expected bench, parsed {other:?}"),
        }
    }

    #[test]
    fn metric_and_task_names_use_kebab_case() {
        let cli = Cli::try_parse_from([
            "mici", "eval", "--preds", "p.csv", "--truth", "t.csv", "--metric", "relerr-reg",
            "--level", "bag",
        ])
        .unwrap();
        match cli.command {
            Command::Eval(args) => {
                assert_eq!(args.metric, MetricArg::RelerrReg);
                assert_eq!(args.level, LevelArg::Bag);
                assert_eq!(args.far_cap, 1e-3);
            }
            other => panic!("expected eval, parsed {other:?}"),
        }
        let cli = Cli::try_parse_from([
            "mici", "synth", "--task", "primary-ratio", "--sweep", "0.5", "--out", "d.csv",
        ]);
        assert!(cli.is_ok());
    }

    #[test]
    fn unknown_flags_are_usage_errors() {
        let err = Cli::try_parse_from(["mici", "train", "--nope"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = Cli::try_parse_from(["mici", "--help"]).unwrap_err();
        assert_eq!(err.exit_code(), 0);
    }

    #[test]
    fn truth_companion_sits_next_to_the_data_file() {
        assert_eq!(
            truth_companion_path(Path::new("/tmp/run/data.csv")),
            Path::new("/tmp/run/data.truth.csv")
        );
        assert_eq!(
            truth_companion_path(Path::new("data")),
            Path::new("data.truth.csv")
        );
    }
}
