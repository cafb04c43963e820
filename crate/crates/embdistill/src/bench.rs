//! Inference timing.

use std::hint::black_box;
use std::time::Instant;

use embdistill_core::data::Sample;
use embdistill_core::model::{ClassifierModel, RegimeTag};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_REPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    /// Regime of the small (deployed) model.
    pub regime: String,
    pub reps: usize,
    pub corpus_size: usize,
    /// Median seconds for one pass over the corpus.
    pub small_seconds: f64,
    pub large_seconds: f64,
    /// `small_seconds / large_seconds`.
    pub ratio: f64,
}

impl BenchResult {
    pub fn regime_tag(&self) -> Result<RegimeTag> {
        Ok(RegimeTag::from_name(&self.regime)?)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

fn corpus_pass(model: &ClassifierModel, corpus: &[Sample]) -> Result<f64> {
    let start = Instant::now();
    for s in corpus {
        black_box(model.logits(black_box(&s.tokens))?);
    }
    Ok(start.elapsed().as_secs_f64())
}

/// Median-of-`reps` time of a full inference pass per model over the same
/// corpus, after one untimed warm-up pass each. Repetitions alternate
/// between the models so drift affects both alike.
pub fn relative_time(
    small: &ClassifierModel,
    large: &ClassifierModel,
    corpus: &[Sample],
    reps: usize,
) -> Result<BenchResult> {
    if reps < MIN_REPS {
        return Err(Error::Config(format!("bench needs at least {MIN_REPS} repetitions, got {reps}")));
    }
    if corpus.is_empty() {
        return Err(Error::Config("benchmark corpus is empty".into()));
    }
    corpus_pass(small, corpus)?;
    corpus_pass(large, corpus)?;
    let mut ts = Vec::with_capacity(reps);
    let mut tl = Vec::with_capacity(reps);
    for _ in 0..reps {
        ts.push(corpus_pass(small, corpus)?);
        tl.push(corpus_pass(large, corpus)?);
    }
    let (small_seconds, large_seconds) = (median(&ts), median(&tl));
    Ok(BenchResult {
        regime: small.config().regime.name().to_string(),
        reps,
        corpus_size: corpus.len(),
        small_seconds,
        large_seconds,
        ratio: small_seconds / large_seconds,
    })
}
