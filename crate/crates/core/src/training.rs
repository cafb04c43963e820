//! Mini-batch SGD, learning-rate decay, grid search and restart averaging.
//!
//! Every trial is a deterministic function of `(model factory, data, config)`:
//! parameter init draws from the seed's main stream, shuffling and dropout
//! from a second stream of the same seed. Wall-clock time is only ever read
//! through [`Clock`] and never influences a result.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{DatasetSplits, Sample};
use crate::distillation::{mixed_loss, mixed_loss_backward, SoftTargetSet};
use crate::math::{argmax, cross_entropy, one_hot, softmax_t};
use crate::model::{ClassifierModel, Gradients};
use crate::{seeded_rng, Error, Result, Rng};

/// Learning rates searched by default.
pub const DEFAULT_LEARNING_RATES: [f64; 5] = [3.0, 1.0, 0.3, 0.1, 0.03];
/// Dropout rates searched by default (step 0.1).
pub const DEFAULT_DROPOUTS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
/// Seeds used for restart averaging by default.
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
/// A trial underfits when its final training accuracy is below chance plus this.
pub const UNDERFIT_MARGIN: f64 = 0.05;

/// Generator for parameter initialisation.
pub fn init_rng(seed: u64) -> Rng {
    seeded_rng(seed)
}

/// Generator for shuffling and dropout, independent of [`init_rng`].
pub fn train_rng(seed: u64) -> Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(1);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecayScheme {
    #[default]
    Constant,
    /// `lr0 · 0.5^⌊epoch / 3⌋`
    HalveEvery3,
    /// `lr0 / (1 + 0.1 · epoch)`
    Inverse,
}

impl DecayScheme {
    pub const ALL: [DecayScheme; 3] = [DecayScheme::Constant, DecayScheme::HalveEvery3, DecayScheme::Inverse];

    pub fn name(self) -> &'static str {
        match self {
            DecayScheme::Constant => "constant",
            DecayScheme::HalveEvery3 => "halve-every-3",
            DecayScheme::Inverse => "inverse",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "constant" => Ok(DecayScheme::Constant),
            "halve-every-3" => Ok(DecayScheme::HalveEvery3),
            "inverse" => Ok(DecayScheme::Inverse),
            other => Err(Error::Config(format!("unknown decay scheme {other:?}"))),
        }
    }

    pub fn rate(self, lr0: f64, epoch: usize) -> f64 {
        match self {
            DecayScheme::Constant => lr0,
            DecayScheme::HalveEvery3 => lr0 * libm::pow(0.5, (epoch / 3) as f64),
            DecayScheme::Inverse => lr0 / (1.0 + 0.1 * epoch as f64),
        }
    }
}

/// Learning rate at `epoch` for a scheme given by name.
pub fn decay(lr0: f64, scheme: &str, epoch: usize) -> Result<f64> {
    Ok(DecayScheme::from_name(scheme)?.rate(lr0, epoch))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub decay: DecayScheme,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Stop after this many epochs without a new best validation accuracy;
    /// 0 disables early stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            decay: DecayScheme::Constant,
            batch_size: 200,
            max_epochs: 30,
            dropout_rate: 0.0,
            seed: 1,
            patience: 5,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted (it leaves the model unchanged).
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Per-sample loss of a training run.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Cross-entropy against the one-hot label.
    Standard,
    /// 1:1 mixture of the one-hot loss and cross-entropy against teacher
    /// soft targets at the set's temperature; targets are aligned with the
    /// training samples by index.
    Mixed(&'a SoftTargetSet),
}

impl Objective<'_> {
    fn check(&self, samples: &[Sample], n_classes: usize) -> Result<()> {
        if let Objective::Mixed(soft) = self {
            if soft.len() != samples.len() || soft.n_classes() != n_classes {
                return Err(Error::dim(
                    "Objective::Mixed",
                    format!(
                        "{} soft targets over {} classes for {} samples over {} classes",
                        soft.len(),
                        soft.n_classes(),
                        samples.len(),
                        n_classes
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Source of wall-clock seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// One forward/backward pass in training mode; accumulates `scale ·` the
/// gradient into `grads` and returns the sample loss.
fn accumulate_sample(
    model: &ClassifierModel,
    sample: &Sample,
    index: usize,
    objective: Objective<'_>,
    rng: &mut Rng,
    grads: &mut Gradients,
    scale: f64,
) -> Result<f64> {
    let n_classes = model.n_classes();
    let truth = one_hot(n_classes, sample.label);
    let (probs, cache) = model.forward_train(&sample.tokens, 1.0, rng)?;
    let (loss, dz) = match objective {
        Objective::Standard => {
            let dz: Vec<f64> = probs.iter().zip(&truth).map(|(y, t)| y - t).collect();
            (cross_entropy(&probs, &truth)?, dz)
        }
        Objective::Mixed(soft) => {
            let teacher = soft.target(index);
            let t = soft.temperature();
            let soft_probs = softmax_t(cache.logits(), t)?;
            let loss = mixed_loss(&probs, &soft_probs, &truth, teacher)?;
            (loss, mixed_loss_backward(cache.logits(), &truth, teacher, t)?)
        }
    };
    if loss.is_finite() {
        model.backward_into(&cache, &dz, grads, scale)?;
    }
    Ok(loss)
}

/// One SGD update over `batch` (indices into `samples`) with the gradient
/// averaged over the batch. Returns the summed sample loss.
pub fn sgd_step(
    model: &mut ClassifierModel,
    samples: &[Sample],
    batch: &[usize],
    objective: Objective<'_>,
    lr: f64,
    rng: &mut Rng,
) -> Result<f64> {
    let mut grads = Gradients::zeros_for(model);
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for &i in batch {
        let loss = accumulate_sample(model, &samples[i], i, objective, rng, &mut grads, scale)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { lr, batch: 0 });
        }
        total += loss;
    }
    if !grads.is_finite() {
        return Err(Error::Divergence { lr, batch: 0 });
    }
    if lr != 0.0 {
        model.apply_gradients(&grads, lr)?;
    }
    Ok(total)
}

/// One pass over `samples` in a seeded shuffled order. Returns the mean
/// sample loss.
pub fn sgd_epoch(
    model: &mut ClassifierModel,
    samples: &[Sample],
    objective: Objective<'_>,
    lr: f64,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(Error::Parameter(format!("learning rate must be >= 0, got {lr}")));
    }
    if batch_size == 0 {
        return Err(Error::Parameter("batch size must be >= 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::Input("no training samples".into()));
    }
    objective.check(samples, model.n_classes())?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for (b, batch) in order.chunks(batch_size).enumerate() {
        total += sgd_step(model, samples, batch, objective, lr, rng).map_err(|e| match e {
            Error::Divergence { lr, .. } => Error::Divergence { lr, batch: b },
            other => other,
        })?;
        if !model.is_finite() {
            return Err(Error::Divergence { lr, batch: b });
        }
    }
    Ok(total / samples.len() as f64)
}

/// Fraction of samples whose argmax prediction equals the label (dropout
/// off, T = 1). An empty set scores 0.
pub fn evaluate(model: &ClassifierModel, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for s in samples {
        if argmax(&model.logits(&s.tokens)?) == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Mean evaluation-mode loss of `objective` over `samples`.
pub fn mean_loss(model: &ClassifierModel, samples: &[Sample], objective: Objective<'_>) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    objective.check(samples, model.n_classes())?;
    let mut total = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let z = model.logits(&s.tokens)?;
        let truth = one_hot(model.n_classes(), s.label);
        let y1 = softmax_t(&z, 1.0)?;
        total += match objective {
            Objective::Standard => cross_entropy(&y1, &truth)?,
            Objective::Mixed(soft) => {
                let yt = softmax_t(&z, soft.temperature())?;
                mixed_loss(&y1, &yt, &truth, soft.target(i))?
            }
        };
    }
    Ok(total / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_acc: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_acc: f64,
    /// Test accuracy of the parameters from `best_epoch`.
    pub test_acc: f64,
    /// Training accuracy after the last epoch.
    pub final_train_acc: f64,
    pub seconds: f64,
    pub seed: u64,
}

impl TrialResult {
    /// One tab-separated line per epoch: epoch, train_loss, valid_acc, lr, seconds.
    pub fn log_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.4}\t{}\t{:.3}\n",
                e.epoch, e.train_loss, e.valid_acc, e.lr, e.seconds
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainedTrial {
    pub result: TrialResult,
    /// Parameters at the best validation epoch.
    pub model: ClassifierModel,
}

/// Trains `model` under `config`, keeping the parameters of the epoch with
/// the highest validation accuracy.
pub fn train_trial(
    mut model: ClassifierModel,
    splits: &DatasetSplits,
    objective: Objective<'_>,
    config: &TrainConfig,
    clock: &dyn Clock,
) -> Result<TrainedTrial> {
    config.validate()?;
    model.set_dropout(config.dropout_rate)?;
    let mut rng = train_rng(config.seed);
    let start = clock.now();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, f64, ClassifierModel)> = None;
    for epoch in 0..config.max_epochs {
        let t0 = clock.now();
        let lr = config.decay.rate(config.learning_rate, epoch);
        let train_loss = sgd_epoch(&mut model, &splits.train, objective, lr, config.batch_size, &mut rng)?;
        let valid_acc = evaluate(&model, &splits.valid)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            valid_acc,
            lr,
            seconds: clock.now() - t0,
        });
        if best.as_ref().is_none_or(|b| valid_acc > b.1) {
            let test_acc = evaluate(&model, &splits.test)?;
            best = Some((epoch, valid_acc, test_acc, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if config.patience > 0 && epoch - best_epoch >= config.patience {
            break;
        }
    }
    let final_train_acc = evaluate(&model, &splits.train)?;
    let (best_epoch, best_valid_acc, test_acc, best_model) = match best {
        Some(b) => b,
        None => {
            // zero-epoch budget: the untrained model is the result
            let v = evaluate(&model, &splits.valid)?;
            let t = evaluate(&model, &splits.test)?;
            (0, v, t, model)
        }
    };
    Ok(TrainedTrial {
        result: TrialResult {
            config: *config,
            epochs,
            best_epoch,
            best_valid_acc,
            test_acc,
            final_train_acc,
            seconds: clock.now() - start,
            seed: config.seed,
        },
        model: best_model,
    })
}

/// Hyperparameter grid: learning rate × decay scheme × dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub learning_rates: Vec<f64>,
    pub decays: Vec<DecayScheme>,
    pub dropouts: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            learning_rates: DEFAULT_LEARNING_RATES.to_vec(),
            decays: DecayScheme::ALL.to_vec(),
            dropouts: DEFAULT_DROPOUTS.to_vec(),
        }
    }
}

impl Grid {
    /// The one-point grid of `config`.
    pub fn single(config: &TrainConfig) -> Self {
        Grid {
            learning_rates: alloc::vec![config.learning_rate],
            decays: alloc::vec![config.decay],
            dropouts: alloc::vec![config.dropout_rate],
        }
    }

    pub fn len(&self) -> usize {
        self.learning_rates.len() * self.decays.len() * self.dropouts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dropout rates in ascending order.
    fn sorted_dropouts(&self) -> Vec<f64> {
        let mut d = self.dropouts.clone();
        d.sort_by(f64::total_cmp);
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Completed(TrialResult),
    Diverged { config: TrainConfig, message: String },
    Skipped { config: TrainConfig, reason: String },
}

impl TrialOutcome {
    pub fn config(&self) -> &TrainConfig {
        match self {
            TrialOutcome::Completed(r) => &r.config,
            TrialOutcome::Diverged { config, .. } | TrialOutcome::Skipped { config, .. } => config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best: TrialResult,
    /// Every grid point in grid order.
    pub trials: Vec<TrialOutcome>,
}

/// Runs every grid point sharing learning rate `lr`, dropout ascending then
/// decay scheme. Once a trial underfits (final training accuracy below
/// chance + [`UNDERFIT_MARGIN`]), points with a higher dropout are skipped.
pub fn run_lr_group<F>(
    factory: &F,
    splits: &DatasetSplits,
    objective: Objective<'_>,
    grid: &Grid,
    base: &TrainConfig,
    lr: f64,
    clock: &dyn Clock,
) -> Result<Vec<TrialOutcome>>
where
    F: Fn(&TrainConfig) -> Result<ClassifierModel> + ?Sized,
{
    let mut out = Vec::new();
    let mut underfit_at: Option<f64> = None;
    for dropout in grid.sorted_dropouts() {
        for &decay in &grid.decays {
            let config = TrainConfig {
                learning_rate: lr,
                decay,
                dropout_rate: dropout,
                ..*base
            };
            if let Some(d) = underfit_at {
                if dropout > d {
                    out.push(TrialOutcome::Skipped {
                        config,
                        reason: format!("underfitting already at dropout {d}"),
                    });
                    continue;
                }
            }
            let model = factory(&config)?;
            let chance = 1.0 / model.n_classes() as f64;
            match train_trial(model, splits, objective, &config, clock) {
                Ok(trial) => {
                    if trial.result.final_train_acc < chance + UNDERFIT_MARGIN {
                        underfit_at = Some(underfit_at.map_or(dropout, |d: f64| d.min(dropout)));
                    }
                    out.push(TrialOutcome::Completed(trial.result));
                }
                Err(e @ Error::Divergence { .. }) => out.push(TrialOutcome::Diverged {
                    config,
                    message: format!("{e}"),
                }),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Picks the completed trial with the highest validation accuracy; ties go
/// to the smaller learning rate, then the smaller dropout, then grid order.
pub fn select_best(trials: Vec<TrialOutcome>) -> Result<GridOutcome> {
    let mut best: Option<&TrialResult> = None;
    for t in &trials {
        let TrialOutcome::Completed(r) = t else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                r.best_valid_acc > b.best_valid_acc
                    || (r.best_valid_acc == b.best_valid_acc
                        && (r.config.learning_rate < b.config.learning_rate
                            || (r.config.learning_rate == b.config.learning_rate
                                && r.config.dropout_rate < b.config.dropout_rate)))
            }
        };
        if better {
            best = Some(r);
        }
    }
    match best {
        Some(b) => Ok(GridOutcome {
            best: b.clone(),
            trials,
        }),
        None => Err(Error::AllDiverged(
            trials
                .iter()
                .map(|t| match t {
                    TrialOutcome::Diverged { config, message } => format!(
                        "lr {} {} dropout {}: {message}",
                        config.learning_rate,
                        config.decay.name(),
                        config.dropout_rate
                    ),
                    TrialOutcome::Skipped { config, reason } => format!(
                        "lr {} {} dropout {}: skipped ({reason})",
                        config.learning_rate,
                        config.decay.name(),
                        config.dropout_rate
                    ),
                    TrialOutcome::Completed(_) => String::new(),
                })
                .collect(),
        )),
    }
}

/// One trial per grid point, all with `base.seed` and `base`'s budget.
pub fn grid_search<F>(
    factory: &F,
    splits: &DatasetSplits,
    objective: Objective<'_>,
    grid: &Grid,
    base: &TrainConfig,
    clock: &dyn Clock,
) -> Result<GridOutcome>
where
    F: Fn(&TrainConfig) -> Result<ClassifierModel> + ?Sized,
{
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let mut trials = Vec::with_capacity(grid.len());
    for &lr in &grid.learning_rates {
        trials.extend(run_lr_group(factory, splits, objective, grid, base, lr, clock)?);
    }
    select_best(trials)
}

/// Test accuracy statistics over restarts with different seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    /// Mean test accuracy (fraction).
    pub mean: f64,
    /// Population standard deviation of the test accuracies.
    pub std: f64,
    pub runs: Vec<TrialResult>,
    /// Index into `runs` of the restart with the highest validation accuracy
    /// (first one on ties).
    pub selected: usize,
}

impl AggregateResult {
    pub fn from_runs(runs: Vec<TrialResult>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Input("no restart results".into()));
        }
        let n = runs.len() as f64;
        let mean = runs.iter().map(|r| r.test_acc).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r.test_acc - mean) * (r.test_acc - mean)).sum::<f64>() / n;
        let mut selected = 0;
        for (i, r) in runs.iter().enumerate() {
            if r.best_valid_acc > runs[selected].best_valid_acc {
                selected = i;
            }
        }
        Ok(AggregateResult {
            mean,
            std: libm::sqrt(var),
            runs,
            selected,
        })
    }

    /// Test accuracy of the restart with the highest validation accuracy.
    pub fn selected_test_acc(&self) -> f64 {
        self.runs[self.selected].test_acc
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }
}

pub fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one restart seed is required".into()));
    }
    for (i, s) in seeds.iter().enumerate() {
        if seeds[..i].contains(s) {
            return Err(Error::Config(format!("restart seed {s} is repeated")));
        }
    }
    Ok(())
}

/// Retrains `config` once per seed and aggregates test accuracy.
pub fn multi_restart<F>(
    factory: &F,
    splits: &DatasetSplits,
    objective: Objective<'_>,
    config: &TrainConfig,
    seeds: &[u64],
    clock: &dyn Clock,
) -> Result<AggregateResult>
where
    F: Fn(&TrainConfig) -> Result<ClassifierModel> + ?Sized,
{
    check_seeds(seeds)?;
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = TrainConfig { seed, ..*config };
        runs.push(train_trial(factory(&cfg)?, splits, objective, &cfg, clock)?.result);
    }
    AggregateResult::from_runs(runs)
}
