//! Subcommands. Each writes its report to the given writer (stdout in the
//! binary) and its artifacts under `--out`, one atomic file at a time.

use std::io::Write;
use std::path::Path;

use clap::{Parser, Subcommand};
use embdistill_core::data::{DatasetSplits, Sample};
use embdistill_core::distillation::{
    generate_soft_targets, regime_factory, regime_soft_targets, teacher_factory, Protocol, Regime, RegimeInputs,
    SoftTargetSet,
};
use embdistill_core::embeddings::EmbeddingTable;
use embdistill_core::model::ClassifierModel;
use embdistill_core::report::format_accuracy;
use embdistill_core::seeded_rng;
use embdistill_core::training::{evaluate, train_trial, Objective};

use crate::bench::{relative_time, BenchResult};
use crate::config::RunSpec;
use crate::corpus::{load_tree_file, prepare_trees, PreparedData};
use crate::error::{Error, Result};
use crate::native::{
    load_any_table, load_model, load_prepared, load_soft_targets, save_model, save_prepared, save_soft_targets,
    save_table,
};
use crate::parallel::{grid_search_parallel, run_regime_parallel, WallClock};
use crate::results::{build_report, grid_tsv, load_json, runs_log, save_json, RegimeRecord, RunRecord};
use crate::fsio;

pub const SPLITS_FILE: &str = "splits.spl";
pub const TABLE_FILE: &str = "embeddings.emb";
pub const TEACHER_FILE: &str = "teacher.mdl";
pub const SOFT_FILE: &str = "soft_targets.sft";
pub const MODEL_FILE: &str = "model.mdl";
pub const FOLDED_FILE: &str = "folded.mdl";
pub const DEFAULT_BENCH_REPS: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "embdistill", version, about = "Distill task-specific word embeddings and compare training regimes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse tree files into a vocabulary and split cache (--train --valid --test).
    Prepare(RunSpec),
    /// One training run at a fixed configuration (--regime --lr --decay --dropout).
    Train(RunSpec),
    /// Grid search and restarts for one regime; saves the deployed model.
    Distill(RunSpec),
    /// Train the cumbersome model on the large table.
    Teacher(RunSpec),
    /// Teacher distributions at --temperature for every training sample.
    SoftTargets(RunSpec),
    /// Replace a model's encoder by a precomputed small table.
    Fold(RunSpec),
    /// Accuracy of --model on --split.
    Eval(RunSpec),
    /// Relative inference time of --small-model against --large-model.
    Bench(RunSpec),
    /// Comparison report from --results (and --bench) records.
    Compare(RunSpec),
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Prepare(s) => prepare(&s.resolve()?, out),
        Command::Train(s) => train(&s.resolve()?, out),
        Command::Distill(s) => distill(&s.resolve()?, out),
        Command::Teacher(s) => teacher(&s.resolve()?, out),
        Command::SoftTargets(s) => soft_targets(&s.resolve()?, out),
        Command::Fold(s) => fold(&s.resolve()?, out),
        Command::Eval(s) => eval(&s.resolve()?, out),
        Command::Bench(s) => bench(&s.resolve()?, out),
        Command::Compare(s) => compare(&s.resolve()?, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { say($out, format_args!($($arg)*)) };
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn prepare(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let mode = spec.phrase_mode()?;
    let lowercase = spec.lowercase.unwrap_or(false);
    let dir = spec.out_dir()?;
    let train = load_tree_file(spec.require_path(&spec.train, "train")?, lowercase)?;
    let valid = load_tree_file(spec.require_path(&spec.valid, "valid")?, lowercase)?;
    let test = load_tree_file(spec.require_path(&spec.test, "test")?, lowercase)?;
    let table = spec.embeddings.as_deref().map(load_any_table).transpose()?;
    let data = prepare_trees(&train, &valid, &test, mode);
    fsio::create_dir(dir)?;
    save_prepared(&data, &dir.join(SPLITS_FILE))?;
    let phrases: usize = train.iter().map(|t| t.node_count()).sum();
    say!(out, "vocabulary\t{} words including the unknown token", data.vocab.len())?;
    say!(out, "train\t{} sentences\t{} phrase samples", train.len(), phrases)?;
    say!(out, "valid\t{} sentences", valid.len())?;
    say!(out, "test\t{} sentences", test.len())?;
    say!(out, "training samples ({})\t{}", mode.name(), data.splits.train.len())?;
    if let Some(table) = table {
        save_table(&table, &dir.join(TABLE_FILE))?;
        let known = (0..data.vocab.len())
            .filter(|&i| i != data.vocab.unk_index() && table.vocab().get(data.vocab.words()[i].as_str()).is_some())
            .count();
        say!(
            out,
            "embeddings\t{} vectors of dim {}\t{known}/{} task words covered",
            table.len() - 1,
            table.dim(),
            data.vocab.len() - 1
        )?;
    }
    Ok(())
}

fn load_data(spec: &RunSpec) -> Result<PreparedData> {
    load_prepared(spec.require_path(&spec.data, "data")?)
}

/// Pretrained table re-indexed onto the task vocabulary.
fn aligned_table(path: &Path, data: &PreparedData, spec: &RunSpec, out: &mut dyn Write) -> Result<EmbeddingTable> {
    let table = load_any_table(path)?;
    let mut rng = seeded_rng(spec.seed.unwrap_or(1));
    let scale = spec.init_scale.unwrap_or(embdistill_core::embeddings::MISSING_WORD_SCALE);
    let (aligned, hits) = table.aligned_to(&data.vocab, scale, &mut rng)?;
    say!(
        out,
        "embeddings\t{}\t{hits}/{} task words found",
        path.display(),
        data.vocab.len() - 1
    )?;
    Ok(aligned)
}

fn check_vocab(model: &ClassifierModel, data: &PreparedData, path: &Path) -> Result<()> {
    if model.embedding().vocab() != &data.vocab {
        return Err(Error::format(path, None, "model vocabulary does not match the prepared data"));
    }
    Ok(())
}

/// Tables, teacher and soft targets one regime needs.
struct RegimeSetup {
    regime: Regime,
    splits: DatasetSplits,
    data: PreparedData,
    large: Option<EmbeddingTable>,
    small: Option<EmbeddingTable>,
    teacher: Option<ClassifierModel>,
    soft: Option<SoftTargetSet>,
    protocol: Protocol,
}

impl RegimeSetup {
    fn load(spec: &RunSpec, out: &mut dyn Write) -> Result<Self> {
        let mut regime = spec.regime()?;
        let data = load_data(spec)?;
        let matching = matches!(regime, Regime::MatchingSoftmax { .. });
        let splits = if matching && spec.sentences_only.unwrap_or(false) {
            data.sentences_only()
        } else {
            data.splits.clone()
        };
        let large = match regime {
            Regime::EncodingDistill => {
                Some(aligned_table(spec.require_path(&spec.embeddings, "embeddings")?, &data, spec, out)?)
            }
            _ => None,
        };
        let small = match (&spec.small_embeddings, regime) {
            (Some(p), Regime::DirectSmall | Regime::MatchingSoftmax { .. }) => Some(aligned_table(p, &data, spec, out)?),
            _ => None,
        };
        let mut teacher = None;
        let mut soft = None;
        if matching {
            if let Some(p) = &spec.soft_targets {
                let s = load_soft_targets(p)?;
                if s.len() != splits.train.len() {
                    return Err(Error::Config(format!(
                        "{} holds {} soft targets for {} training samples",
                        p.display(),
                        s.len(),
                        splits.train.len()
                    )));
                }
                if spec.temperature.is_some_and(|t| t != s.temperature()) {
                    return Err(Error::Config(format!(
                        "--temperature {} differs from the soft-target temperature {}",
                        spec.temperature(),
                        s.temperature()
                    )));
                }
                regime = Regime::MatchingSoftmax {
                    temperature: s.temperature(),
                };
                regime.validate()?;
                soft = Some(s);
            } else {
                let p = spec.require_path(&spec.teacher, "teacher")?;
                let t = load_model(p)?;
                check_vocab(&t, &data, p)?;
                teacher = Some(t);
            }
        }
        let protocol = spec.protocol(small.as_ref().map(EmbeddingTable::dim))?;
        if let Some(s) = &soft {
            if s.n_classes() != protocol.n_classes {
                return Err(Error::Config(format!(
                    "soft targets have {} classes, expected {}",
                    s.n_classes(),
                    protocol.n_classes
                )));
            }
        }
        Ok(RegimeSetup {
            regime,
            splits,
            data,
            large,
            small,
            teacher,
            soft,
            protocol,
        })
    }

    fn inputs(&self) -> RegimeInputs<'_> {
        RegimeInputs {
            vocab: &self.data.vocab,
            large_table: self.large.as_ref(),
            small_table: self.small.as_ref(),
            teacher: self.teacher.as_ref(),
        }
    }
}

fn train(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let dir = spec.out_dir()?.to_path_buf();
    let setup = RegimeSetup::load(spec, out)?;
    let config = setup.protocol.base;
    let factory = regime_factory(setup.regime, setup.inputs(), &setup.protocol)?;
    let generated = match setup.soft {
        Some(_) => None,
        None => regime_soft_targets(setup.regime, &setup.inputs(), &setup.splits)?,
    };
    let objective = match setup.soft.as_ref().or(generated.as_ref()) {
        Some(s) => Objective::Mixed(s),
        None => Objective::Standard,
    };
    if config.learning_rate == 0.0 {
        say!(out, "warning: learning rate is 0, the model will not change")?;
    }
    let trial = train_trial(factory(&config)?, &setup.splits, objective, &config, &WallClock::new())?;
    fsio::create_dir(&dir)?;
    save_model(&trial.model, &dir.join(MODEL_FILE))?;
    fsio::write_atomic(&dir.join("train.log"), trial.result.log_lines().as_bytes())?;
    save_json(&RunRecord::from(&trial.result), &dir.join("train.json"))?;
    say!(
        out,
        "{}\tbest epoch {}\tvalid {}\ttest {}",
        setup.regime.tag().name(),
        trial.result.best_epoch,
        pct(trial.result.best_valid_acc),
        pct(trial.result.test_acc)
    )
}

fn distill(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let dir = spec.out_dir()?.to_path_buf();
    let setup = RegimeSetup::load(spec, out)?;
    let outcome = run_regime_parallel(
        setup.regime,
        &setup.splits,
        setup.inputs(),
        &setup.protocol,
        setup.soft.as_ref(),
        spec.jobs(),
    )?;
    let name = setup.regime.tag().name();
    let record = RegimeRecord::new(&outcome, &setup.protocol, setup.splits.train.len(), setup.splits.test.len());
    fsio::create_dir(&dir)?;
    save_model(&outcome.deployed_model, &dir.join(format!("{name}.mdl")))?;
    save_model(&outcome.trained_model, &dir.join(format!("{name}_trained.mdl")))?;
    save_json(&record, &dir.join(format!("{name}.json")))?;
    fsio::write_atomic(&dir.join(format!("{name}_trials.tsv")), grid_tsv(&outcome.grid).as_bytes())?;
    fsio::write_atomic(&dir.join(format!("{name}_runs.log")), runs_log(&outcome.aggregate.runs).as_bytes())?;
    let best = &outcome.grid.best.config;
    say!(
        out,
        "{name}\tbest lr {} {} dropout {}\taccuracy {}\tselected {:.1}\tdeployed parameters {}",
        best.learning_rate,
        best.decay.name(),
        best.dropout_rate,
        format_accuracy(outcome.aggregate.mean, outcome.aggregate.std),
        100.0 * outcome.aggregate.selected_test_acc(),
        outcome.deployed_parameters
    )
}

fn teacher(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let dir = spec.out_dir()?.to_path_buf();
    let data = load_data(spec)?;
    let table = aligned_table(spec.require_path(&spec.embeddings, "embeddings")?, &data, spec, out)?;
    let protocol = spec.protocol(None)?;
    let factory = teacher_factory(&table, &protocol);
    let clock = WallClock::new();
    let grid = grid_search_parallel(
        &factory,
        &data.splits,
        Objective::Standard,
        &protocol.grid,
        &protocol.base,
        &clock,
        spec.jobs(),
    )?;
    let config = grid.best.config;
    let trial = train_trial(factory(&config)?, &data.splits, Objective::Standard, &config, &clock)?;
    fsio::create_dir(&dir)?;
    save_model(&trial.model, &dir.join(TEACHER_FILE))?;
    fsio::write_atomic(&dir.join("teacher_trials.tsv"), grid_tsv(&grid).as_bytes())?;
    fsio::write_atomic(&dir.join("teacher.log"), trial.result.log_lines().as_bytes())?;
    save_json(&RunRecord::from(&trial.result), &dir.join("teacher.json"))?;
    say!(
        out,
        "teacher\tbest lr {} {} dropout {}\tvalid {}\ttest {}\tparameters {}",
        config.learning_rate,
        config.decay.name(),
        config.dropout_rate,
        pct(trial.result.best_valid_acc),
        pct(trial.result.test_acc),
        trial.model.count_parameters()
    )
}

fn soft_targets(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let dir = spec.out_dir()?.to_path_buf();
    let data = load_data(spec)?;
    let path = spec.require_path(&spec.teacher, "teacher")?;
    let teacher = load_model(path)?;
    check_vocab(&teacher, &data, path)?;
    let samples = if spec.sentences_only.unwrap_or(false) {
        data.sentences_only().train
    } else {
        data.splits.train.clone()
    };
    let soft = generate_soft_targets(&teacher, &samples, spec.temperature())?;
    fsio::create_dir(&dir)?;
    save_soft_targets(&soft, &dir.join(SOFT_FILE))?;
    say!(out, "soft targets\t{} samples\ttemperature {}", soft.len(), soft.temperature())
}

fn fold(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let dir = spec.out_dir()?.to_path_buf();
    let model = load_model(spec.require_path(&spec.model, "model")?)?;
    let folded = model.fold()?;
    fsio::create_dir(&dir)?;
    save_model(&folded, &dir.join(FOLDED_FILE))?;
    say!(out, "parameters\t{} -> {}", model.count_parameters(), folded.count_parameters())
}

fn split_samples<'a>(data: &'a PreparedData, spec: &RunSpec) -> Result<(&'static str, &'a [Sample])> {
    match spec.split.as_deref().unwrap_or("test") {
        "train" => Ok(("train", &data.splits.train)),
        "valid" => Ok(("valid", &data.splits.valid)),
        "test" => Ok(("test", &data.splits.test)),
        other => Err(Error::Config(format!("unknown split {other:?}"))),
    }
}

fn eval(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let path = spec.require_path(&spec.model, "model")?;
    let model = load_model(path)?;
    let data = load_data(spec)?;
    check_vocab(&model, &data, path)?;
    let (name, samples) = split_samples(&data, spec)?;
    let acc = evaluate(&model, samples)?;
    let correct = (acc * samples.len() as f64).round() as usize;
    say!(out, "{name}\taccuracy {acc:.4}\t{correct}/{}", samples.len())
}

fn bench(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let small_path = spec.require_path(&spec.small_model, "small_model")?;
    let large_path = spec.require_path(&spec.large_model, "large_model")?;
    let small = load_model(small_path)?;
    let large = load_model(large_path)?;
    let data = load_data(spec)?;
    check_vocab(&small, &data, small_path)?;
    check_vocab(&large, &data, large_path)?;
    let (_, corpus) = split_samples(&data, spec)?;
    let result: BenchResult = relative_time(&small, &large, corpus, spec.reps.unwrap_or(DEFAULT_BENCH_REPS))?;
    if let Some(dir) = &spec.out {
        fsio::create_dir(dir)?;
        save_json(&result, &dir.join(format!("bench_{}.json", result.regime)))?;
    }
    say!(
        out,
        "bench\t{} sentences x {} reps\tsmall {:.6}s\tlarge {:.6}s\tratio {:.3}",
        result.corpus_size,
        result.reps,
        result.small_seconds,
        result.large_seconds,
        result.ratio
    )
}

fn compare(spec: &RunSpec, out: &mut dyn Write) -> Result<()> {
    let dir = spec.out_dir()?.to_path_buf();
    let paths = spec.results.clone().unwrap_or_default();
    if paths.is_empty() {
        return Err(Error::Config("--results needs at least one record".into()));
    }
    let records = paths
        .iter()
        .map(|p| load_json::<RegimeRecord>(p))
        .collect::<Result<Vec<_>>>()?;
    let benches = spec
        .bench
        .clone()
        .unwrap_or_default()
        .iter()
        .map(|p| load_json::<BenchResult>(p))
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(&records, &benches)?;
    let text = report.to_text();
    fsio::create_dir(&dir)?;
    fsio::write_atomic(&dir.join("report.tsv"), report.to_tsv().as_bytes())?;
    fsio::write_atomic(&dir.join("report.txt"), text.as_bytes())?;
    write!(out, "{text}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}
