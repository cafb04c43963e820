//! Side-by-side comparison of the regimes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::distillation::RegimeOutcome;
use crate::model::RegimeTag;
use crate::training::Grid;

/// Printed in place of values for a regime that was not run.
pub const MISSING: &str = "n/a";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub regime: RegimeTag,
    /// Mean and population std of test accuracy over restarts (fractions).
    pub mean: f64,
    pub std: f64,
    pub selected_test_acc: f64,
    pub deployed_parameters: usize,
    /// Mean wall-clock training seconds per restart.
    pub seconds: f64,
    pub restarts: usize,
    /// Inference time of the deployed model over that of the cumbersome
    /// model on the same benchmark corpus.
    pub relative_time: Option<f64>,
}

impl ReportRow {
    pub fn from_outcome(outcome: &RegimeOutcome) -> Self {
        let runs = &outcome.aggregate.runs;
        ReportRow {
            regime: outcome.regime.tag(),
            mean: outcome.aggregate.mean,
            std: outcome.aggregate.std,
            selected_test_acc: outcome.aggregate.selected_test_acc(),
            deployed_parameters: outcome.deployed_parameters,
            seconds: runs.iter().map(|r| r.seconds).sum::<f64>() / runs.len() as f64,
            restarts: runs.len(),
            relative_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub seeds: Vec<u64>,
    pub learning_rates: Vec<f64>,
    pub decays: Vec<String>,
    pub dropouts: Vec<f64>,
    pub temperature: Option<f64>,
    pub version: String,
    pub dataset: String,
}

impl Provenance {
    pub fn new(seeds: &[u64], grid: &Grid, version: &str) -> Self {
        Provenance {
            seeds: seeds.to_vec(),
            learning_rates: grid.learning_rates.clone(),
            decays: grid.decays.iter().map(|d| d.name().into()).collect(),
            dropouts: grid.dropouts.clone(),
            temperature: None,
            version: version.into(),
            dataset: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    /// At most one row per regime.
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

/// `0.4753, 0.0081` → `"47.5 ± 0.8"`.
pub fn format_accuracy(mean: f64, std: f64) -> String {
    format!("{:.1} ± {:.1}", mean * 100.0, std * 100.0)
}

fn join<T: core::fmt::Display>(xs: &[T]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x}")).collect();
    parts.join(",")
}

impl ComparisonReport {
    pub fn new(provenance: Provenance) -> Self {
        ComparisonReport {
            rows: Vec::new(),
            provenance,
        }
    }

    /// Adds or replaces the row for `row.regime`.
    pub fn insert(&mut self, row: ReportRow) {
        self.rows.retain(|r| r.regime != row.regime);
        self.rows.push(row);
    }

    pub fn row(&self, regime: RegimeTag) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.regime == regime)
    }

    fn cells(&self, regime: RegimeTag) -> [String; 6] {
        match self.row(regime) {
            Some(r) => [
                format!("{:.1}", r.mean * 100.0),
                format!("{:.1}", r.std * 100.0),
                format!("{:.1}", r.selected_test_acc * 100.0),
                format!("{}", r.deployed_parameters),
                format!("{:.3}", r.seconds),
                r.relative_time.map_or_else(|| MISSING.into(), |x| format!("{x:.2}")),
            ],
            None => core::array::from_fn(|_| MISSING.into()),
        }
    }

    /// Tab-separated table, one line per regime in fixed order, then
    /// `#`-prefixed provenance lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "regime\tmean_acc_pct\tstd_acc_pct\tselected_acc_pct\tdeployed_params\tseconds_per_restart\trelative_time\n",
        );
        for tag in RegimeTag::ALL {
            let c = self.cells(tag);
            let _ = writeln!(s, "{}\t{}", tag.name(), c.join("\t"));
        }
        for (k, v) in self.provenance_pairs() {
            let _ = writeln!(s, "# {k}\t{v}");
        }
        s
    }

    /// Human-readable table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<18} {:>14} {:>10} {:>16} {:>10}",
            "regime", "accuracy (%)", "selected", "deployed params", "rel. time"
        );
        for tag in RegimeTag::ALL {
            let (acc, sel, params, rel) = match self.row(tag) {
                Some(r) => (
                    format_accuracy(r.mean, r.std),
                    format!("{:.1}", r.selected_test_acc * 100.0),
                    format!("{}", r.deployed_parameters),
                    r.relative_time.map_or_else(|| MISSING.into(), |x| format!("{x:.2}x")),
                ),
                None => (MISSING.into(), MISSING.into(), MISSING.into(), MISSING.into()),
            };
            let _ = writeln!(s, "{:<18} {:>14} {:>10} {:>16} {:>10}", tag.name(), acc, sel, params, rel);
        }
        s.push('\n');
        for (k, v) in self.provenance_pairs() {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }

    fn provenance_pairs(&self) -> Vec<(&'static str, String)> {
        let p = &self.provenance;
        let mut out = alloc::vec![
            ("version", p.version.clone()),
            ("seeds", join(&p.seeds)),
            ("learning_rates", join(&p.learning_rates)),
            ("decays", p.decays.join(",")),
            ("dropouts", join(&p.dropouts)),
        ];
        if let Some(t) = p.temperature {
            out.push(("temperature", format!("{t}")));
        }
        if !p.dataset.is_empty() {
            out.push(("dataset", p.dataset.clone()));
        }
        out
    }
}
