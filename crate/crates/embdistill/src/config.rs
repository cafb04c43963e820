//! Run configuration: a flat JSON object whose keys mirror the long
//! command-line flags (with `_` for `-`). Flags override file values.
//!
//! ```json
//! { "data": "prep/splits.spl", "embeddings": "vectors.txt",
//!   "learning_rates": [1, 0.3], "seeds": [1, 2, 3], "out": "runs/encoding" }
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use embdistill_core::data::{PhraseMode, TREE_CLASSES};
use embdistill_core::distillation::{Protocol, Regime, DEFAULT_TEMPERATURE};
use embdistill_core::embeddings::MISSING_WORD_SCALE;
use embdistill_core::model::RegimeTag;
use embdistill_core::training::{DecayScheme, Grid, TrainConfig, DEFAULT_DROPOUTS, DEFAULT_SEEDS, DEFAULT_LEARNING_RATES};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;

macro_rules! run_spec {
    ($( $(#[$meta:meta])* $name:ident : $ty:ty ),* $(,)?) => {
        #[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct RunSpec {
            /// JSON run configuration; flags override its values.
            #[arg(long, value_name = "PATH")]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $( $(#[$meta])* pub $name: Option<$ty>, )*
        }

        impl RunSpec {
            /// Field-wise `self` if set, else `fallback`.
            pub fn or(self, fallback: RunSpec) -> RunSpec {
                RunSpec {
                    config: self.config.or(fallback.config),
                    $( $name: self.$name.or(fallback.$name), )*
                }
            }
        }
    };
}

run_spec! {
    /// Training tree file (one s-expression per line).
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    #[arg(long, value_name = "PATH")]
    valid: PathBuf,
    #[arg(long, value_name = "PATH")]
    test: PathBuf,
    /// Prepared split cache written by `prepare`.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Large pretrained vectors (word2vec text or EMB1).
    #[arg(long, value_name = "PATH")]
    embeddings: PathBuf,
    /// Small pretrained vectors for the direct and matching-softmax students.
    #[arg(long, value_name = "PATH")]
    small_embeddings: PathBuf,
    /// Trained teacher model.
    #[arg(long, value_name = "PATH")]
    teacher: PathBuf,
    /// Precomputed teacher soft targets.
    #[arg(long, value_name = "PATH")]
    soft_targets: PathBuf,
    /// Input model.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Deployed model to benchmark.
    #[arg(long, value_name = "PATH")]
    small_model: PathBuf,
    /// Cumbersome model to benchmark against.
    #[arg(long, value_name = "PATH")]
    large_model: PathBuf,
    /// Regime records written by `distill`.
    #[arg(long, value_name = "PATH", num_args = 1.., value_delimiter = ',')]
    results: Vec<PathBuf>,
    /// Benchmark records written by `bench`.
    #[arg(long, value_name = "PATH", num_args = 1.., value_delimiter = ',')]
    bench: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// `all-phrases` (default) or `sentence-only`.
    #[arg(long)]
    phrase_mode: String,
    /// Lowercase tokens while loading trees.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    lowercase: bool,
    /// Train matching softmax on whole sentences only.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    sentences_only: bool,
    /// `direct`, `matching-softmax` or `encoding`.
    #[arg(long)]
    regime: String,
    /// Seed for initialization, shuffling and dropout of single runs and of
    /// the grid search.
    #[arg(long)]
    seed: u64,
    /// Restart seeds.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Maximum concurrent trials.
    #[arg(long)]
    jobs: usize,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    learning_rates: Vec<f64>,
    /// Decay schemes: `constant`, `halve-every-3`, `inverse`.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    decays: Vec<String>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    dropouts: Vec<f64>,
    /// Learning rate of a single run.
    #[arg(long)]
    lr: f64,
    /// Decay scheme of a single run.
    #[arg(long)]
    decay: String,
    /// Dropout rate of a single run.
    #[arg(long)]
    dropout: f64,
    #[arg(long)]
    batch_size: usize,
    #[arg(long)]
    max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    patience: usize,
    #[arg(long)]
    n_hidden: usize,
    /// Small dimension: encoder output or small table width.
    #[arg(long)]
    n_distill: usize,
    #[arg(long)]
    teacher_hidden: usize,
    #[arg(long)]
    n_classes: usize,
    /// Soft-target temperature.
    #[arg(long)]
    temperature: f64,
    /// Uniform init scale for words without a pretrained vector.
    #[arg(long)]
    init_scale: f64,
    /// `train`, `valid` or `test`.
    #[arg(long)]
    split: String,
    /// Timed repetitions for `bench`.
    #[arg(long)]
    reps: usize,
}

impl RunSpec {
    /// Flags merged over the `--config` file, if any.
    pub fn resolve(self) -> Result<RunSpec> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fsio::read_text(&path).map_err(|e| Error::Config(e.to_string()))?;
        let file: RunSpec = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), e.line())))?;
        Ok(self.or(file))
    }

    pub fn require_path<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("--{} is required", key.replace('_', "-"))))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.require_path(&self.out, "out")
    }

    pub fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    pub fn phrase_mode(&self) -> Result<PhraseMode> {
        Ok(self.phrase_mode.as_deref().map(PhraseMode::from_name).transpose()?.unwrap_or_default())
    }

    pub fn temperature(&self) -> f64 {
        self.temperature.unwrap_or(DEFAULT_TEMPERATURE)
    }

    pub fn regime(&self) -> Result<Regime> {
        let name = self
            .regime
            .as_deref()
            .ok_or_else(|| Error::Config("--regime is required".into()))?;
        let regime = Regime::from_tag(RegimeTag::from_name(name)?, self.temperature());
        regime.validate()?;
        Ok(regime)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.to_vec())
    }

    pub fn grid(&self) -> Result<Grid> {
        let decays = match &self.decays {
            Some(names) => names
                .iter()
                .map(|n| DecayScheme::from_name(n))
                .collect::<embdistill_core::Result<Vec<_>>>()?,
            None => DecayScheme::ALL.to_vec(),
        };
        let grid = Grid {
            learning_rates: self.learning_rates.clone().unwrap_or_else(|| DEFAULT_LEARNING_RATES.to_vec()),
            decays,
            dropouts: self.dropouts.clone().unwrap_or_else(|| DEFAULT_DROPOUTS.to_vec()),
        };
        if grid.is_empty() {
            return Err(Error::Config("empty hyperparameter grid".into()));
        }
        let base = base_config(self)?;
        for &learning_rate in &grid.learning_rates {
            TrainConfig { learning_rate, ..base }.validate()?;
        }
        for &dropout_rate in &grid.dropouts {
            TrainConfig { dropout_rate, ..base }.validate()?;
        }
        Ok(grid)
    }

    /// Batch size, budget and seed, plus the single-run learning rate,
    /// decay and dropout.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let config = base_config(self)?;
        config.validate()?;
        Ok(config)
    }

    /// Shapes and search settings. `n_small` defaults to the small table's
    /// width when one is given.
    pub fn protocol(&self, small_dim: Option<usize>) -> Result<Protocol> {
        let defaults = Protocol::default();
        Ok(Protocol {
            grid: self.grid()?,
            base: self.train_config()?,
            seeds: self.seeds(),
            n_classes: self.n_classes.unwrap_or(TREE_CLASSES),
            n_hidden: self.n_hidden.unwrap_or(defaults.n_hidden),
            n_small: self.n_distill.or(small_dim).unwrap_or(defaults.n_small),
            teacher_hidden: self.teacher_hidden.unwrap_or(defaults.teacher_hidden),
            init_scale: self.init_scale.unwrap_or(MISSING_WORD_SCALE),
            temperature: self.temperature(),
        })
    }
}

fn base_config(spec: &RunSpec) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        learning_rate: spec.lr.unwrap_or(d.learning_rate),
        decay: spec.decay.as_deref().map(DecayScheme::from_name).transpose()?.unwrap_or(d.decay),
        batch_size: spec.batch_size.unwrap_or(d.batch_size),
        max_epochs: spec.max_epochs.unwrap_or(d.max_epochs),
        dropout_rate: spec.dropout.unwrap_or(d.dropout_rate),
        seed: spec.seed.unwrap_or(d.seed),
        patience: spec.patience.unwrap_or(d.patience),
    })
}
