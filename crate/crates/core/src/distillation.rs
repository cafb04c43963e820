//! The three compared training regimes.
//!
//! - direct: a small network trained on small (50-dim) word vectors.
//! - matching softmax: the same small network trained on a 1:1 mixture of
//!   the ground-truth loss and cross-entropy against a frozen teacher's
//!   temperature-softened outputs.
//! - encoding distillation: the large table feeds an encoding layer whose
//!   small outputs feed the small network; table, encoder and network are
//!   trained jointly on the plain ground-truth loss, then folded.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{DatasetSplits, Sample};
use crate::embeddings::{EmbeddingTable, Vocabulary};
use crate::math::{cross_entropy, one_hot, softmax_t, Activation};
use crate::model::{ClassifierModel, ModelConfig, RegimeTag};
use crate::training::{
    check_seeds, grid_search, init_rng, train_trial, AggregateResult, Clock, GridOutcome, Grid,
    Objective, TrainConfig, TrainedTrial, DEFAULT_SEEDS,
};
use crate::{Error, Result};

/// Temperature used for teacher soft targets by default.
pub const DEFAULT_TEMPERATURE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    DirectSmall,
    /// Student trained against teacher soft targets at `temperature`.
    MatchingSoftmax { temperature: f64 },
    EncodingDistill,
}

impl Regime {
    pub fn validate(&self) -> Result<()> {
        if let Regime::MatchingSoftmax { temperature } = *self {
            if !(temperature.is_finite() && temperature > 1.0) {
                return Err(Error::Config(format!(
                    "matching softmax needs a temperature > 1, got {temperature}"
                )));
            }
        }
        Ok(())
    }

    pub fn tag(&self) -> RegimeTag {
        match self {
            Regime::DirectSmall => RegimeTag::Direct,
            Regime::MatchingSoftmax { .. } => RegimeTag::MatchingSoftmax,
            Regime::EncodingDistill => RegimeTag::Encoding,
        }
    }

    pub fn from_tag(tag: RegimeTag, temperature: f64) -> Self {
        match tag {
            RegimeTag::Direct => Regime::DirectSmall,
            RegimeTag::MatchingSoftmax => Regime::MatchingSoftmax { temperature },
            RegimeTag::Encoding => Regime::EncodingDistill,
        }
    }
}

/// Teacher distributions aligned one-to-one with a list of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTargetSet {
    temperature: f64,
    n_classes: usize,
    data: Vec<f64>,
}

impl SoftTargetSet {
    /// `data` holds `len × n_classes` values; every row must sum to 1 ± 1e-6.
    pub fn new(temperature: f64, n_classes: usize, data: Vec<f64>) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::Parameter(format!("temperature must be > 0, got {temperature}")));
        }
        if n_classes == 0 || !data.len().is_multiple_of(n_classes) {
            return Err(Error::dim(
                "SoftTargetSet::new",
                format!("{} values for {n_classes} classes", data.len()),
            ));
        }
        for (i, row) in data.chunks(n_classes).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| p.is_nan() || p < 0.0) {
                return Err(Error::Input(format!("soft target {i} is not a distribution (sum {sum})")));
            }
        }
        Ok(SoftTargetSet {
            temperature,
            n_classes,
            data,
        })
    }

    /// The "perfect teacher": one-hot ground truth for every sample.
    pub fn from_labels(samples: &[Sample], n_classes: usize, temperature: f64) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * n_classes);
        for s in samples {
            if s.label >= n_classes {
                return Err(Error::Index {
                    index: s.label,
                    len: n_classes,
                });
            }
            data.extend(one_hot(n_classes, s.label));
        }
        SoftTargetSet::new(temperature, n_classes, data)
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn target(&self, index: usize) -> &[f64] {
        &self.data[index * self.n_classes..(index + 1) * self.n_classes]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Teacher output `softmax_t(logits, T)` for every sample, computed once.
pub fn generate_soft_targets(teacher: &ClassifierModel, samples: &[Sample], temperature: f64) -> Result<SoftTargetSet> {
    let mut data = Vec::with_capacity(samples.len() * teacher.n_classes());
    for s in samples {
        data.extend(softmax_t(&teacher.logits(&s.tokens)?, temperature)?);
    }
    SoftTargetSet::new(temperature, teacher.n_classes(), data)
}

/// `CE(y_student at T=1, one-hot truth) + CE(y_student at T, teacher at T)`.
pub fn mixed_loss(student_t1: &[f64], student_t: &[f64], truth: &[f64], teacher_t: &[f64]) -> Result<f64> {
    Ok(cross_entropy(student_t1, truth)? + cross_entropy(student_t, teacher_t)?)
}

/// Gradient of [`mixed_loss`] with respect to the student logits:
/// `(softmax(z) − truth) + (softmax_t(z, T) − teacher) / T`.
pub fn mixed_loss_backward(logits: &[f64], truth: &[f64], teacher_t: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if truth.len() != logits.len() || teacher_t.len() != logits.len() {
        return Err(Error::dim(
            "mixed_loss_backward",
            format!(
                "{} logits, {} truth, {} teacher entries",
                logits.len(),
                truth.len(),
                teacher_t.len()
            ),
        ));
    }
    let y1 = softmax_t(logits, 1.0)?;
    let yt = softmax_t(logits, temperature)?;
    Ok((0..logits.len())
        .map(|i| (y1[i] - truth[i]) + (yt[i] - teacher_t[i]) / temperature)
        .collect())
}

/// Shapes and search settings shared by all regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub grid: Grid,
    /// Batch size, epoch budget, patience and grid seed.
    pub base: TrainConfig,
    pub seeds: Vec<u64>,
    pub n_classes: usize,
    /// Hidden width of the small networks.
    pub n_hidden: usize,
    /// Encoder output / small table dimension.
    pub n_small: usize,
    /// Hidden width of the teacher.
    pub teacher_hidden: usize,
    /// Uniform init scale of small tables built without pretrained vectors.
    pub init_scale: f64,
    /// Soft-target temperature for matching softmax.
    pub temperature: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            grid: Grid::default(),
            base: TrainConfig::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            n_classes: crate::data::TREE_CLASSES,
            n_hidden: 50,
            n_small: 50,
            teacher_hidden: 200,
            init_scale: 0.1,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

/// Tables (already aligned to `vocab`) and teacher a regime may need.
#[derive(Debug, Clone, Copy)]
pub struct RegimeInputs<'a> {
    pub vocab: &'a Vocabulary,
    /// Large (e.g. 300-dim) table for encoding distillation and the teacher.
    pub large_table: Option<&'a EmbeddingTable>,
    /// Small pretrained table for the direct and matching-softmax students;
    /// random init when absent.
    pub small_table: Option<&'a EmbeddingTable>,
    /// Frozen teacher for matching softmax.
    pub teacher: Option<&'a ClassifierModel>,
}

fn small_config(protocol: &Protocol, regime: RegimeTag) -> ModelConfig {
    ModelConfig {
        n_embed: protocol.n_small,
        n_distill: 0,
        n_hidden: protocol.n_hidden,
        n_classes: protocol.n_classes,
        dropout_rate: 0.0,
        activation: Activation::Tanh,
        regime,
    }
}

/// Builds fresh models for a regime, seeded by the trial config.
pub fn regime_factory<'a>(
    regime: Regime,
    inputs: RegimeInputs<'a>,
    protocol: &'a Protocol,
) -> Result<impl Fn(&TrainConfig) -> Result<ClassifierModel> + 'a> {
    regime.validate()?;
    let large = match regime {
        Regime::EncodingDistill => {
            let t = inputs
                .large_table
                .ok_or_else(|| Error::Config("encoding distillation needs a large pretrained table".into()))?;
            if protocol.n_small >= t.dim() {
                return Err(Error::Config(format!(
                    "distilled dimension {} must be below the table dimension {}",
                    protocol.n_small,
                    t.dim()
                )));
            }
            Some(t)
        }
        _ => None,
    };
    if let Some(t) = inputs.small_table {
        if t.dim() != protocol.n_small {
            return Err(Error::Config(format!(
                "small table is {}-dim, protocol expects {}",
                t.dim(),
                protocol.n_small
            )));
        }
    }
    for t in [inputs.large_table, inputs.small_table].into_iter().flatten() {
        if t.vocab() != inputs.vocab {
            return Err(Error::Config("embedding table is not aligned to the task vocabulary".into()));
        }
    }
    let tag = regime.tag();
    Ok(move |config: &TrainConfig| {
        let mut rng = init_rng(config.seed);
        let mut mc = match large {
            Some(t) => ModelConfig {
                n_embed: t.dim(),
                n_distill: protocol.n_small,
                ..small_config(protocol, tag)
            },
            None => small_config(protocol, tag),
        };
        mc.dropout_rate = config.dropout_rate;
        let table = match (large, inputs.small_table) {
            (Some(t), _) => t.clone(),
            (None, Some(t)) => t.clone(),
            (None, None) => EmbeddingTable::random(inputs.vocab.clone(), protocol.n_small, protocol.init_scale, &mut rng)?,
        };
        ClassifierModel::new(mc, table, &mut rng)
    })
}

/// Factory for teacher-scale models: large table, no encoder, wide hidden layer.
pub fn teacher_factory<'a>(
    large_table: &'a EmbeddingTable,
    protocol: &'a Protocol,
) -> impl Fn(&TrainConfig) -> Result<ClassifierModel> + 'a {
    move |config: &TrainConfig| {
        let mut rng = init_rng(config.seed);
        let mc = ModelConfig {
            n_embed: large_table.dim(),
            n_distill: 0,
            n_hidden: protocol.teacher_hidden,
            n_classes: protocol.n_classes,
            dropout_rate: config.dropout_rate,
            activation: Activation::Tanh,
            regime: RegimeTag::Direct,
        };
        ClassifierModel::new(mc, large_table.clone(), &mut rng)
    }
}

/// Grid-searches a teacher-scale model and returns it retrained at the
/// selected configuration (same seed, so identical to the grid trial).
pub fn train_teacher(
    large_table: &EmbeddingTable,
    splits: &DatasetSplits,
    protocol: &Protocol,
    clock: &dyn Clock,
) -> Result<TrainedTrial> {
    let factory = teacher_factory(large_table, protocol);
    let outcome = grid_search(&factory, splits, Objective::Standard, &protocol.grid, &protocol.base, clock)?;
    let config = outcome.best.config;
    train_trial(factory(&config)?, splits, Objective::Standard, &config, clock)
}

#[derive(Debug, Clone)]
pub struct RegimeOutcome {
    pub regime: Regime,
    pub grid: GridOutcome,
    pub aggregate: AggregateResult,
    /// Restart with the highest validation accuracy, as trained.
    pub trained_model: ClassifierModel,
    /// The same model in deployment form (encoder folded into the table).
    pub deployed_model: ClassifierModel,
    /// Stored values of the trained model (before folding).
    pub trained_parameters: usize,
    /// Stored values of the deployed model.
    pub deployed_parameters: usize,
}

/// Soft targets a regime trains against, if any.
pub fn regime_soft_targets(
    regime: Regime,
    inputs: &RegimeInputs<'_>,
    splits: &DatasetSplits,
) -> Result<Option<SoftTargetSet>> {
    match regime {
        Regime::MatchingSoftmax { temperature } => {
            let teacher = inputs
                .teacher
                .ok_or_else(|| Error::Config("matching softmax needs a trained teacher".into()))?;
            Ok(Some(generate_soft_targets(teacher, &splits.train, temperature)?))
        }
        _ => Ok(None),
    }
}

/// Grid search followed by restart averaging under one regime.
pub fn run_regime(
    regime: Regime,
    splits: &DatasetSplits,
    inputs: RegimeInputs<'_>,
    protocol: &Protocol,
    clock: &dyn Clock,
) -> Result<RegimeOutcome> {
    check_seeds(&protocol.seeds)?;
    let factory = regime_factory(regime, inputs, protocol)?;
    let soft = regime_soft_targets(regime, &inputs, splits)?;
    let objective = match &soft {
        Some(s) => Objective::Mixed(s),
        None => Objective::Standard,
    };
    let grid = grid_search(&factory, splits, objective, &protocol.grid, &protocol.base, clock)?;
    let mut runs = Vec::with_capacity(protocol.seeds.len());
    let mut models = Vec::with_capacity(protocol.seeds.len());
    for &seed in &protocol.seeds {
        let config = TrainConfig { seed, ..grid.best.config };
        let trial = train_trial(factory(&config)?, splits, objective, &config, clock)?;
        runs.push(trial.result);
        models.push(trial.model);
    }
    let aggregate = AggregateResult::from_runs(runs)?;
    finish_regime(regime, grid, aggregate, models)
}

/// Folds the selected restart's model and records parameter counts.
pub fn finish_regime(
    regime: Regime,
    grid: GridOutcome,
    aggregate: AggregateResult,
    mut models: Vec<ClassifierModel>,
) -> Result<RegimeOutcome> {
    if models.len() != aggregate.runs.len() {
        return Err(Error::Contract("one model per restart is required".into()));
    }
    let trained_model = models.swap_remove(aggregate.selected);
    let deployed_model = trained_model.fold()?;
    Ok(RegimeOutcome {
        regime,
        grid,
        deployed_parameters: deployed_model.count_parameters(),
        trained_parameters: trained_model.count_parameters(),
        aggregate,
        trained_model,
        deployed_model,
    })
}
