//! Generated classification task with a known low-rank labeling rule.
//!
//! Word vectors are i.i.d. Gaussian. A sentence is `seq_len` uniformly drawn
//! words; its label is the number of positive coordinates of
//! `probe · mean(vectors) + noise`, where `probe` is a fixed hidden
//! `rank × dim` matrix. With rank 5 there are 6 classes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{DatasetSplits, Sample};
use crate::embeddings::{EmbeddingTable, Vocabulary};
use crate::math::Matrix;
use crate::{seeded_rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    /// Total table columns, the unknown-word column included.
    pub vocab_size: usize,
    pub dim: usize,
    pub seq_len: usize,
    pub probe_rank: usize,
    /// Std of the table entries.
    pub scale: f64,
    /// Label noise std as a fraction of the probe output's std.
    pub noise: f64,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            vocab_size: 2000,
            dim: 300,
            seq_len: 8,
            probe_rank: 5,
            scale: 0.1,
            noise: 0.25,
            n_train: 4000,
            n_valid: 1000,
            n_test: 1000,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub config: SyntheticConfig,
    /// The generating table; the pretrained input of encoding distillation.
    pub table: EmbeddingTable,
    pub probe: Matrix,
    pub splits: DatasetSplits,
}

impl SyntheticTask {
    pub fn n_classes(&self) -> usize {
        self.config.probe_rank + 1
    }

    pub fn vocab(&self) -> &Vocabulary {
        self.table.vocab()
    }
}

/// Number of strictly positive entries.
pub fn positive_count(v: &[f64]) -> usize {
    v.iter().filter(|&&x| x > 0.0).count()
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticTask> {
    let c = *config;
    if c.vocab_size < 2 || c.dim == 0 || c.seq_len == 0 || c.probe_rank == 0 {
        return Err(Error::Config(format!("degenerate synthetic task {c:?}")));
    }
    if !(c.scale > 0.0 && c.noise >= 0.0 && c.scale.is_finite() && c.noise.is_finite()) {
        return Err(Error::Config("synthetic scale must be > 0 and noise >= 0".into()));
    }
    let mut rng = seeded_rng(c.seed);
    let words: Vec<String> = (0..c.vocab_size - 1).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::from_distinct(words)?;
    let entries: Vec<f64> = (0..c.dim * vocab.len())
        .map(|_| c.scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let table = EmbeddingTable::new(vocab, Matrix::from_vec(c.dim, c.vocab_size, entries)?)?;

    // Rows with variance 1/dim give unit-variance outputs per unit-variance word.
    let probe_std = 1.0 / libm::sqrt(c.dim as f64);
    let probe: Vec<f64> = (0..c.probe_rank * c.dim)
        .map(|_| probe_std * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let probe = Matrix::from_vec(c.probe_rank, c.dim, probe)?;
    let signal_std = c.scale / libm::sqrt(c.seq_len as f64);
    let noise = Normal::new(0.0, c.noise * signal_std).map_err(|e| Error::Config(format!("{e}")))?;

    let unk = table.vocab().unk_index();
    let mut make = |n: usize| -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let tokens: Vec<usize> = (0..c.seq_len)
                .map(|_| {
                    let w = rng.gen_range(0..c.vocab_size - 1);
                    if w >= unk { w + 1 } else { w }
                })
                .collect();
            let mut mean = alloc::vec![0.0; c.dim];
            for &t in &tokens {
                for (m, v) in mean.iter_mut().zip(table.lookup(t)?) {
                    *m += v / c.seq_len as f64;
                }
            }
            let mut projected = probe.matvec(&mean)?;
            for p in projected.iter_mut() {
                *p += noise.sample(&mut rng);
            }
            out.push(Sample {
                label: positive_count(&projected),
                tokens,
            });
        }
        Ok(out)
    };
    let splits = DatasetSplits {
        train: make(c.n_train)?,
        valid: make(c.n_valid)?,
        test: make(c.n_test)?,
    };
    Ok(SyntheticTask {
        config: c,
        table,
        probe,
        splits,
    })
}
