//! Vocabulary, the look-up table Φ, the encoding layer and folding.
//!
//! A table stores one column per vocabulary word (`dim × |V|`), so looking a
//! word up is the same as multiplying Φ by that word's one-hot vector. The
//! encoding layer squashes a looked-up column to a smaller space:
//! `f(W_encode · Φxᵢ + b_encode)`. Folding evaluates the encoder on every
//! column once, after which Φ and `W_encode` are no longer needed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::{affine_forward, uniform_symmetric, Activation, Matrix};
use crate::{Error, Result};

/// Reserved token standing for every out-of-vocabulary word.
pub const UNK_TOKEN: &str = "<unk>";

/// Scale of the uniform init given to task words absent from a pretrained file.
pub const MISSING_WORD_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
    unk: usize,
}

impl Vocabulary {
    /// Distinct tokens in first-occurrence order, followed by [`UNK_TOKEN`].
    /// Occurrences of the literal unknown token are folded into it.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words = Vec::new();
        let mut index = BTreeMap::new();
        for token in tokens {
            let token = token.as_ref();
            if token == UNK_TOKEN || index.contains_key(token) {
                continue;
            }
            index.insert(String::from(token), words.len());
            words.push(String::from(token));
        }
        let unk = words.len();
        index.insert(String::from(UNK_TOKEN), unk);
        words.push(String::from(UNK_TOKEN));
        Vocabulary { words, index, unk }
    }

    /// Builds a vocabulary from a list that must be free of duplicates and
    /// of the reserved token; [`UNK_TOKEN`] is appended.
    pub fn from_distinct(words: Vec<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if w == UNK_TOKEN {
                return Err(Error::Input(format!("token {UNK_TOKEN:?} is reserved")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate word {w:?}")));
            }
        }
        let mut words = words;
        let unk = words.len();
        index.insert(String::from(UNK_TOKEN), unk);
        words.push(String::from(UNK_TOKEN));
        Ok(Vocabulary { words, index, unk })
    }

    /// Rebuilds a stored vocabulary whose unknown token sits at `unk_index`.
    pub fn from_stored(words: Vec<String>, unk_index: usize) -> Result<Self> {
        if words.get(unk_index).map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::Input(format!(
                "stored vocabulary has no {UNK_TOKEN:?} at index {unk_index}"
            )));
        }
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate word {w:?}")));
            }
        }
        Ok(Vocabulary {
            words,
            index,
            unk: unk_index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// Always false: the unknown token is always present.
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }

    pub fn unk_index(&self) -> usize {
        self.unk
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Index of `word`, or the unknown index when it is not in the vocabulary.
    pub fn index_or_unk(&self, word: &str) -> usize {
        self.get(word).unwrap_or(self.unk)
    }
}

/// The look-up table Φ: column `i` is the vector of word `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    matrix: Matrix,
}

/// A table produced by [`fold`]: one already-encoded column per word.
pub type DistilledTable = EmbeddingTable;

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, matrix: Matrix) -> Result<Self> {
        if matrix.cols() != vocab.len() {
            return Err(Error::dim(
                "EmbeddingTable::new",
                format!("{} columns for {} words", matrix.cols(), vocab.len()),
            ));
        }
        if matrix.rows() == 0 {
            return Err(Error::dim("EmbeddingTable::new", "zero embedding dimension"));
        }
        Ok(EmbeddingTable { vocab, matrix })
    }

    /// Table over `words` (distinct, without the reserved token) whose
    /// unknown vector is the mean of all given vectors.
    pub fn with_mean_unknown(words: Vec<String>, dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        if words.len() != vectors.len() {
            return Err(Error::dim(
                "EmbeddingTable::with_mean_unknown",
                format!("{} words but {} vectors", words.len(), vectors.len()),
            ));
        }
        let vocab = Vocabulary::from_distinct(words)?;
        let mut matrix = Matrix::zeros(dim, vocab.len());
        let mut mean = vec![0.0; dim];
        for (col, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::dim(
                    "EmbeddingTable::with_mean_unknown",
                    format!("vector {col} has {} values, expected {dim}", v.len()),
                ));
            }
            for (r, &x) in v.iter().enumerate() {
                matrix.set(r, col, x);
                mean[r] += x;
            }
        }
        if !vectors.is_empty() {
            let n = vectors.len() as f64;
            for (r, m) in mean.iter().enumerate() {
                matrix.set(r, vocab.unk_index(), m / n);
            }
        }
        EmbeddingTable::new(vocab, matrix)
    }

    /// Entries i.i.d. uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(vocab: Vocabulary, dim: usize, scale: f64, rng: &mut R) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Parameter(format!("init scale must be > 0, got {scale}")));
        }
        let matrix = Matrix::uniform(dim, vocab.len(), scale, rng);
        EmbeddingTable::new(vocab, matrix)
    }

    /// Re-indexes a pretrained table onto a task vocabulary. Words found in
    /// `self` copy their vector, the unknown token copies `self`'s unknown
    /// vector, and the remaining words get uniform `±missing_scale` init.
    /// Returns the table and the number of task words that were found.
    pub fn aligned_to<R: Rng + ?Sized>(
        &self,
        vocab: &Vocabulary,
        missing_scale: f64,
        rng: &mut R,
    ) -> Result<(EmbeddingTable, usize)> {
        let dim = self.dim();
        let mut matrix = Matrix::zeros(dim, vocab.len());
        let mut hits = 0;
        for (col, word) in vocab.words().iter().enumerate() {
            let source = if col == vocab.unk_index() {
                Some(self.vocab.unk_index())
            } else {
                self.vocab.get(word)
            };
            match source {
                Some(src) => {
                    if col != vocab.unk_index() {
                        hits += 1;
                    }
                    for r in 0..dim {
                        matrix.set(r, col, self.matrix.get(r, src));
                    }
                }
                None => {
                    for r in 0..dim {
                        matrix.set(r, col, uniform_symmetric(missing_scale, rng));
                    }
                }
            }
        }
        Ok((EmbeddingTable::new(vocab.clone(), matrix)?, hits))
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn len(&self) -> usize {
        self.matrix.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.cols() == 0
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.matrix
    }

    /// Column `word_index` of Φ.
    pub fn lookup(&self, word_index: usize) -> Result<Vec<f64>> {
        if word_index >= self.len() {
            return Err(Error::Index {
                index: word_index,
                len: self.len(),
            });
        }
        Ok(self.matrix.column(word_index))
    }

    /// `column += scale · delta`.
    pub fn add_to_column(&mut self, word_index: usize, delta: &[f64], scale: f64) -> Result<()> {
        if word_index >= self.len() {
            return Err(Error::Index {
                index: word_index,
                len: self.len(),
            });
        }
        if delta.len() != self.dim() {
            return Err(Error::dim(
                "add_to_column",
                format!("delta has {}, table dim is {}", delta.len(), self.dim()),
            ));
        }
        let stride = self.len();
        let data = self.matrix.data_mut();
        for (r, d) in delta.iter().enumerate() {
            data[r * stride + word_index] += scale * d;
        }
        Ok(())
    }
}

/// The encoding layer `f(W_encode · v + b_encode)` with `n_distill < n_embed`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl EncoderLayer {
    /// Xavier-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(n_embed: usize, n_distill: usize, rng: &mut R) -> Result<Self> {
        check_bottleneck(n_embed, n_distill)?;
        Ok(EncoderLayer {
            weight: Matrix::xavier(n_distill, n_embed, rng),
            bias: vec![0.0; n_distill],
            activation: Activation::Tanh,
        })
    }

    pub fn from_parts(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        check_bottleneck(weight.cols(), weight.rows())?;
        if bias.len() != weight.rows() {
            return Err(Error::dim(
                "EncoderLayer::from_parts",
                format!("W_encode has {} rows, b_encode has {}", weight.rows(), bias.len()),
            ));
        }
        Ok(EncoderLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn n_embed(&self) -> usize {
        self.weight.cols()
    }

    pub fn n_distill(&self) -> usize {
        self.weight.rows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    pub fn encode_vector(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .activation
            .forward(&affine_forward(&self.weight, v, &self.bias)?))
    }

    /// Distilled vector of one word.
    pub fn encode(&self, table: &EmbeddingTable, word_index: usize) -> Result<Vec<f64>> {
        if table.dim() != self.n_embed() {
            return Err(Error::dim(
                "encode",
                format!(
                    "encoder expects {}-dim vectors, table is {}-dim",
                    self.n_embed(),
                    table.dim()
                ),
            ));
        }
        self.encode_vector(&table.lookup(word_index)?)
    }
}

fn check_bottleneck(n_embed: usize, n_distill: usize) -> Result<()> {
    if n_distill == 0 || n_distill >= n_embed {
        return Err(Error::Config(format!(
            "encoder needs 0 < n_distill < n_embed, got n_distill {n_distill}, n_embed {n_embed}"
        )));
    }
    Ok(())
}

/// Precomputes the encoder output for every word of `table`.
pub fn fold(encoder: &EncoderLayer, table: &EmbeddingTable) -> Result<DistilledTable> {
    let n = encoder.n_distill();
    let mut matrix = Matrix::zeros(n, table.len());
    for col in 0..table.len() {
        let v = encoder.encode(table, col)?;
        for (r, x) in v.into_iter().enumerate() {
            matrix.set(r, col, x);
        }
    }
    EmbeddingTable::new(table.vocab().clone(), matrix)
}
