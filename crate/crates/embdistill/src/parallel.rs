//! Grid search and restarts across threads. Every trial is an independent
//! deterministic job and results are merged in grid order, so output does
//! not depend on the number of workers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use embdistill_core::data::DatasetSplits;
use embdistill_core::distillation::{
    finish_regime, regime_factory, regime_soft_targets, Protocol, Regime, RegimeInputs, RegimeOutcome,
    SoftTargetSet,
};
use embdistill_core::model::ClassifierModel;
use embdistill_core::training::{
    check_seeds, run_lr_group, select_best, train_trial, AggregateResult, Clock, Grid, GridOutcome, Objective,
    TrainConfig, TrainedTrial,
};
use embdistill_core::Result;

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        WallClock::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// `f` over `items` on up to `jobs` threads; results keep input order.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len());
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}

/// Grid search with one job per learning rate (the underfitting skip rule
/// runs within a learning rate, so each group stays sequential).
pub fn grid_search_parallel<F>(
    factory: &F,
    splits: &DatasetSplits,
    objective: Objective<'_>,
    grid: &Grid,
    base: &TrainConfig,
    clock: &WallClock,
    jobs: usize,
) -> Result<GridOutcome>
where
    F: Fn(&TrainConfig) -> Result<ClassifierModel> + Sync + ?Sized,
{
    if grid.is_empty() {
        return Err(embdistill_core::Error::Config("empty hyperparameter grid".into()));
    }
    let groups = parallel_map(&grid.learning_rates, jobs, |&lr| {
        run_lr_group(factory, splits, objective, grid, base, lr, clock)
    });
    let mut trials = Vec::with_capacity(grid.len());
    for g in groups {
        trials.extend(g?);
    }
    select_best(trials)
}

/// One training run per seed at `config`, in seed order.
pub fn restarts_parallel<F>(
    factory: &F,
    splits: &DatasetSplits,
    objective: Objective<'_>,
    config: &TrainConfig,
    seeds: &[u64],
    clock: &WallClock,
    jobs: usize,
) -> Result<Vec<TrainedTrial>>
where
    F: Fn(&TrainConfig) -> Result<ClassifierModel> + Sync + ?Sized,
{
    check_seeds(seeds)?;
    parallel_map(seeds, jobs, |&seed| {
        let cfg = TrainConfig { seed, ..*config };
        train_trial(factory(&cfg)?, splits, objective, &cfg, clock)
    })
    .into_iter()
    .collect()
}

/// Parallel counterpart of [`embdistill_core::distillation::run_regime`]
/// with identical results. `soft` replaces soft targets generated from
/// the teacher.
pub fn run_regime_parallel(
    regime: Regime,
    splits: &DatasetSplits,
    inputs: RegimeInputs<'_>,
    protocol: &Protocol,
    soft: Option<&SoftTargetSet>,
    jobs: usize,
) -> Result<RegimeOutcome> {
    check_seeds(&protocol.seeds)?;
    let clock = WallClock::new();
    let factory = regime_factory(regime, inputs, protocol)?;
    let generated = match soft {
        Some(_) => None,
        None => regime_soft_targets(regime, &inputs, splits)?,
    };
    let objective = match soft.or(generated.as_ref()) {
        Some(s) => Objective::Mixed(s),
        None => Objective::Standard,
    };
    let grid = grid_search_parallel(&factory, splits, objective, &protocol.grid, &protocol.base, &clock, jobs)?;
    let trials = restarts_parallel(&factory, splits, objective, &grid.best.config, &protocol.seeds, &clock, jobs)?;
    let (runs, models): (Vec<_>, Vec<_>) = trials.into_iter().map(|t| (t.result, t.model)).unzip();
    finish_regime(regime, grid, AggregateResult::from_runs(runs)?, models)
}
