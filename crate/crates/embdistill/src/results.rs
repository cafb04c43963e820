//! JSON records of finished runs and the trial log files.

use std::fmt::Write as _;
use std::path::Path;

use embdistill_core::distillation::{Protocol, Regime, RegimeOutcome};
use embdistill_core::model::RegimeTag;
use embdistill_core::report::{ComparisonReport, Provenance, ReportRow};
use embdistill_core::training::{GridOutcome, TrainConfig, TrialOutcome, TrialResult};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;

/// Toolkit version as printed in reports; set `EMBDISTILL_VERSION` at
/// build time (for instance to `git describe` output) to override.
pub fn version() -> &'static str {
    option_env!("EMBDISTILL_VERSION").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub learning_rate: f64,
    pub decay: String,
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl From<&TrainConfig> for ConfigRecord {
    fn from(c: &TrainConfig) -> Self {
        ConfigRecord {
            learning_rate: c.learning_rate,
            decay: c.decay.name().to_string(),
            dropout: c.dropout_rate,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            patience: c.patience,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ConfigRecord,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_valid_acc: f64,
    pub test_acc: f64,
    pub final_train_acc: f64,
    pub seconds: f64,
}

impl From<&TrialResult> for RunRecord {
    fn from(r: &TrialResult) -> Self {
        RunRecord {
            config: (&r.config).into(),
            best_epoch: r.best_epoch,
            epochs_run: r.epochs.len(),
            best_valid_acc: r.best_valid_acc,
            test_acc: r.test_acc,
            final_train_acc: r.final_train_acc,
            seconds: r.seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub learning_rates: Vec<f64>,
    pub decays: Vec<String>,
    pub dropouts: Vec<f64>,
}

/// Everything `compare` needs from a `distill` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRecord {
    pub version: String,
    pub regime: String,
    pub temperature: Option<f64>,
    pub grid: GridRecord,
    pub seeds: Vec<u64>,
    pub n_hidden: usize,
    pub n_small: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub best: RunRecord,
    pub runs: Vec<RunRecord>,
    pub mean_test_acc: f64,
    pub std_test_acc: f64,
    /// Index into `runs` of the highest-validation restart.
    pub selected: usize,
    pub trained_parameters: usize,
    pub deployed_parameters: usize,
}

impl RegimeRecord {
    pub fn new(outcome: &RegimeOutcome, protocol: &Protocol, train_samples: usize, test_samples: usize) -> Self {
        let temperature = match outcome.regime {
            Regime::MatchingSoftmax { temperature } => Some(temperature),
            _ => None,
        };
        RegimeRecord {
            version: version().to_string(),
            regime: outcome.regime.tag().name().to_string(),
            temperature,
            grid: GridRecord {
                learning_rates: protocol.grid.learning_rates.clone(),
                decays: protocol.grid.decays.iter().map(|d| d.name().to_string()).collect(),
                dropouts: protocol.grid.dropouts.clone(),
            },
            seeds: protocol.seeds.clone(),
            n_hidden: protocol.n_hidden,
            n_small: protocol.n_small,
            train_samples,
            test_samples,
            best: (&outcome.grid.best).into(),
            runs: outcome.aggregate.runs.iter().map(RunRecord::from).collect(),
            mean_test_acc: outcome.aggregate.mean,
            std_test_acc: outcome.aggregate.std,
            selected: outcome.aggregate.selected,
            trained_parameters: outcome.trained_parameters,
            deployed_parameters: outcome.deployed_parameters,
        }
    }

    pub fn regime_tag(&self) -> Result<RegimeTag> {
        Ok(RegimeTag::from_name(&self.regime)?)
    }

    pub fn report_row(&self) -> Result<ReportRow> {
        let selected = self
            .runs
            .get(self.selected)
            .ok_or_else(|| Error::Config(format!("selected restart {} out of range", self.selected)))?;
        Ok(ReportRow {
            regime: self.regime_tag()?,
            mean: self.mean_test_acc,
            std: self.std_test_acc,
            selected_test_acc: selected.test_acc,
            deployed_parameters: self.deployed_parameters,
            seconds: self.runs.iter().map(|r| r.seconds).sum::<f64>() / self.runs.len().max(1) as f64,
            restarts: self.runs.len(),
            relative_time: None,
        })
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            seeds: self.seeds.clone(),
            learning_rates: self.grid.learning_rates.clone(),
            decays: self.grid.decays.clone(),
            dropouts: self.grid.dropouts.clone(),
            temperature: self.temperature,
            version: version().to_string(),
            dataset: format!("{} train / {} test samples", self.train_samples, self.test_samples),
        }
    }
}

/// Report over saved regime records, with relative times from bench
/// results keyed by regime.
pub fn build_report(records: &[RegimeRecord], benches: &[crate::bench::BenchResult]) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::default();
    for (i, r) in records.iter().enumerate() {
        let tag = r.regime_tag()?;
        if records[..i].iter().any(|o| o.regime == r.regime) {
            return Err(Error::Config(format!("two results for regime {}", tag.name())));
        }
        if i == 0 {
            report.provenance = r.provenance();
        } else if r.seeds != records[0].seeds {
            report.provenance.seeds = merge_unique(&report.provenance.seeds, &r.seeds);
        }
        if let Some(t) = r.temperature {
            report.provenance.temperature = Some(t);
        }
        let mut row = r.report_row()?;
        row.relative_time = benches
            .iter()
            .find(|b| b.regime_tag().ok() == Some(tag))
            .map(|b| b.ratio);
        report.insert(row);
    }
    if records.is_empty() {
        report.provenance.version = version().to_string();
    }
    Ok(report)
}

fn merge_unique(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = a.to_vec();
    out.extend(b.iter().filter(|s| !a.contains(s)));
    out
}

/// Tab-separated grid trial table.
pub fn grid_tsv(grid: &GridOutcome) -> String {
    let mut s = String::from("learning_rate\tdecay\tdropout\tstatus\tbest_valid_acc\ttest_acc\tbest_epoch\n");
    for t in &grid.trials {
        let c = t.config();
        let _ = write!(s, "{}\t{}\t{}\t", c.learning_rate, c.decay.name(), c.dropout_rate);
        match t {
            TrialOutcome::Completed(r) => {
                let _ = writeln!(s, "completed\t{:.4}\t{:.4}\t{}", r.best_valid_acc, r.test_acc, r.best_epoch);
            }
            TrialOutcome::Diverged { .. } => s.push_str("diverged\t\t\t\n"),
            TrialOutcome::Skipped { .. } => s.push_str("skipped\t\t\t\n"),
        }
    }
    s
}

/// Per-epoch logs of several runs, each preceded by a `# seed` line.
pub fn runs_log(runs: &[TrialResult]) -> String {
    let mut s = String::new();
    for r in runs {
        let _ = writeln!(
            s,
            "# seed {} lr {} {} dropout {}",
            r.seed,
            r.config.learning_rate,
            r.config.decay.name(),
            r.config.dropout_rate
        );
        s.push_str(&r.log_lines());
    }
    s
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    fsio::write_atomic(path, text.as_bytes())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fsio::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, Some(e.line()), e.to_string()))
}
