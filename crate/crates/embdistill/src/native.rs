//! Little-endian binary formats.
//!
//! | magic  | contents |
//! |--------|----------|
//! | `EMB1` | u32 \|V\|, u32 dim, \|V\| length-prefixed UTF-8 tokens, dim×\|V\| f32 column-major |
//! | `MDL1` | u32 version, config, vocabulary, parameter blocks as f32 |
//! | `SFT1` | u32 count, u32 n_classes, f32 temperature, count×n_classes f32 |
//! | `SPL1` | u32 version, vocabulary, phrase mode, train/valid/test samples |
//!
//! Strings are a u32 byte length followed by UTF-8 bytes. A vocabulary is a
//! u32 unknown-token index followed by a u32 count and the tokens.

use std::path::Path;

use embdistill_core::data::{DatasetSplits, PhraseMode, Sample};
use embdistill_core::distillation::SoftTargetSet;
use embdistill_core::embeddings::{EmbeddingTable, EncoderLayer, Vocabulary, UNK_TOKEN};
use embdistill_core::math::{Activation, Matrix};
use embdistill_core::model::{ClassifierModel, Dense, ModelConfig, RegimeTag};

use crate::corpus::PreparedData;
use crate::error::{Error, Result};
use crate::fsio;

pub const TABLE_MAGIC: &[u8; 4] = b"EMB1";
pub const MODEL_MAGIC: &[u8; 4] = b"MDL1";
pub const SOFT_MAGIC: &[u8; 4] = b"SFT1";
pub const SPLITS_MAGIC: &[u8; 4] = b"SPL1";
pub const MODEL_VERSION: u32 = 1;
pub const SPLITS_VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Config(format!("{v} does not fit in a u32 field")))?;
        self.bytes(&v.to_le_bytes());
        Ok(())
    }

    fn f32(&mut self, v: f64) {
        self.bytes(&(v as f32).to_le_bytes());
    }

    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.bytes(s.as_bytes());
        Ok(())
    }

    fn vocab(&mut self, v: &Vocabulary) -> Result<()> {
        self.u32(v.unk_index())?;
        self.u32(v.len())?;
        for w in v.words() {
            self.str(w)?;
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path, magic: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != magic {
            return Err(Error::format(
                path,
                None,
                format!("not a {} file (bad magic)", String::from_utf8_lossy(magic)),
            ));
        }
        Ok(Reader { bytes, pos: 4, path })
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::format(self.path, None, message)
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated while reading {what} at byte {}", self.pos)));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32(&mut self, what: &str) -> Result<f64> {
        let b = self.take(4, what)?;
        Ok(f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(4).ok_or_else(|| self.err(format!("{what} is too large")))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect())
    }

    fn str(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.err(format!("{what} is not UTF-8")))
    }

    fn vocab(&mut self) -> Result<Vocabulary> {
        let unk = self.u32("unknown-token index")?;
        let n = self.u32("vocabulary size")?;
        let words = (0..n).map(|_| self.str("token")).collect::<Result<Vec<_>>>()?;
        Vocabulary::from_stored(words, unk).map_err(|e| self.err(e.to_string()))
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn table_to_bytes(table: &EmbeddingTable) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(TABLE_MAGIC);
    w.u32(table.len())?;
    w.u32(table.dim())?;
    for word in table.vocab().words() {
        w.str(word)?;
    }
    for c in 0..table.len() {
        for r in 0..table.dim() {
            w.f32(table.matrix().get(r, c));
        }
    }
    Ok(w.0)
}

/// The unknown token must be among the stored tokens.
pub fn table_from_bytes(bytes: &[u8], path: &Path) -> Result<EmbeddingTable> {
    let mut r = Reader::new(bytes, path, TABLE_MAGIC)?;
    let n = r.u32("vocabulary size")?;
    let dim = r.u32("dimension")?;
    let words = (0..n).map(|_| r.str("token")).collect::<Result<Vec<_>>>()?;
    let unk = words
        .iter()
        .position(|w| w == UNK_TOKEN)
        .ok_or_else(|| r.err(format!("no {UNK_TOKEN:?} token")))?;
    let vocab = Vocabulary::from_stored(words, unk).map_err(|e| r.err(e.to_string()))?;
    let values = r.f32s(n * dim, "vectors")?;
    r.finish()?;
    let mut m = Matrix::zeros(dim, n);
    for (i, v) in values.into_iter().enumerate() {
        m.set(i % dim, i / dim, v);
    }
    Ok(EmbeddingTable::new(vocab, m)?)
}

pub fn save_table(table: &EmbeddingTable, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &table_to_bytes(table)?)
}

pub fn load_table(path: &Path) -> Result<EmbeddingTable> {
    table_from_bytes(&fsio::read_bytes(path)?, path)
}

/// Native tables by magic, anything else as word2vec text.
pub fn load_any_table(path: &Path) -> Result<EmbeddingTable> {
    let bytes = fsio::read_bytes(path)?;
    if bytes.starts_with(TABLE_MAGIC) {
        table_from_bytes(&bytes, path)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::format(path, None, "neither EMB1 nor UTF-8 text"))?;
        crate::word2vec::parse_word2vec(&text, path)
    }
}

pub fn model_to_bytes(model: &ClassifierModel) -> Result<Vec<u8>> {
    let c = model.config();
    let mut w = Writer::default();
    w.bytes(MODEL_MAGIC);
    w.u32(MODEL_VERSION as usize)?;
    for v in [c.n_embed, c.n_distill, c.n_hidden, c.n_classes, model.embedding().len()] {
        w.u32(v)?;
    }
    w.u8(c.regime.code());
    w.f32(c.dropout_rate);
    w.vocab(model.embedding().vocab())?;
    for (_, block) in model.parameters() {
        for &v in block {
            w.f32(v);
        }
    }
    Ok(w.0)
}

/// Rebuilds a model, checking the header against the stored blocks.
pub fn model_from_bytes(bytes: &[u8], path: &Path) -> Result<ClassifierModel> {
    let mut r = Reader::new(bytes, path, MODEL_MAGIC)?;
    let version = r.u32("version")?;
    if version != MODEL_VERSION as usize {
        return Err(r.err(format!("unsupported model version {version}")));
    }
    let mut dims = [0usize; 5];
    for (d, what) in dims.iter_mut().zip(["n_embed", "n_distill", "n_hidden", "n_classes", "vocabulary size"]) {
        *d = r.u32(what)?;
    }
    let [n_embed, n_distill, n_hidden, n_classes, vocab_size] = dims;
    let regime = RegimeTag::from_code(r.u8("regime")?).map_err(|e| r.err(e.to_string()))?;
    let dropout_rate = r.f32("dropout")?;
    let config = ModelConfig {
        n_embed,
        n_distill,
        n_hidden,
        n_classes,
        dropout_rate,
        activation: Activation::Tanh,
        regime,
    };
    config.validate().map_err(|e| r.err(e.to_string()))?;
    let vocab = r.vocab()?;
    if vocab.len() != vocab_size {
        return Err(r.err(format!("header says {vocab_size} words, vocabulary has {}", vocab.len())));
    }
    let expected = config.parameter_count(vocab_size);
    let values = r.f32s(expected, "parameters")?;
    r.finish()?;

    let table = EmbeddingTable::new(vocab, Matrix::zeros(n_embed, vocab_size))?;
    let encoder = if config.has_encoder() {
        Some(EncoderLayer::from_parts(
            Matrix::zeros(n_distill, n_embed),
            vec![0.0; n_distill],
            Activation::Tanh,
        )?)
    } else {
        None
    };
    let hidden = Dense::zeros(n_hidden, config.word_dim());
    let output = Dense::zeros(n_classes, n_hidden);
    let mut model = ClassifierModel::from_parts(config, table, encoder, hidden, output)?;
    let mut rest = values.as_slice();
    for (_, block) in model.parameters_mut() {
        let (head, tail) = rest.split_at(block.len());
        block.copy_from_slice(head);
        rest = tail;
    }
    Ok(model)
}

pub fn save_model(model: &ClassifierModel, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &model_to_bytes(model)?)
}

pub fn load_model(path: &Path) -> Result<ClassifierModel> {
    model_from_bytes(&fsio::read_bytes(path)?, path)
}

/// Loads a model and checks its architecture against `expected`
/// (dropout is ignored).
pub fn load_model_expecting(path: &Path, expected: &ModelConfig) -> Result<ClassifierModel> {
    let model = load_model(path)?;
    let got = model.config();
    let same = ModelConfig {
        dropout_rate: expected.dropout_rate,
        ..*got
    } == *expected;
    if !same {
        return Err(Error::format(
            path,
            None,
            format!("model config mismatch: file has {got:?}, expected {expected:?}"),
        ));
    }
    Ok(model)
}

pub fn soft_targets_to_bytes(soft: &SoftTargetSet) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(SOFT_MAGIC);
    w.u32(soft.len())?;
    w.u32(soft.n_classes())?;
    w.f32(soft.temperature());
    for &v in soft.values() {
        w.f32(v);
    }
    Ok(w.0)
}

pub fn soft_targets_from_bytes(bytes: &[u8], path: &Path) -> Result<SoftTargetSet> {
    let mut r = Reader::new(bytes, path, SOFT_MAGIC)?;
    let count = r.u32("count")?;
    let n_classes = r.u32("class count")?;
    let temperature = r.f32("temperature")?;
    let values = r.f32s(count * n_classes, "targets")?;
    r.finish()?;
    SoftTargetSet::new(temperature, n_classes, values).map_err(|e| Error::format(path, None, e.to_string()))
}

pub fn save_soft_targets(soft: &SoftTargetSet, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &soft_targets_to_bytes(soft)?)
}

pub fn load_soft_targets(path: &Path) -> Result<SoftTargetSet> {
    soft_targets_from_bytes(&fsio::read_bytes(path)?, path)
}

fn write_samples(w: &mut Writer, samples: &[Sample]) -> Result<()> {
    w.u32(samples.len())?;
    for s in samples {
        w.u32(s.label)?;
        w.u32(s.tokens.len())?;
        for &t in &s.tokens {
            w.u32(t)?;
        }
    }
    Ok(())
}

fn read_samples(r: &mut Reader<'_>, vocab_size: usize) -> Result<Vec<Sample>> {
    let n = r.u32("sample count")?;
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let label = r.u32("label")?;
        let len = r.u32("sample length")?;
        let tokens = (0..len).map(|_| r.u32("token index")).collect::<Result<Vec<_>>>()?;
        if let Some(&t) = tokens.iter().find(|&&t| t >= vocab_size) {
            return Err(r.err(format!("token index {t} outside the vocabulary")));
        }
        out.push(Sample { tokens, label });
    }
    Ok(out)
}

pub fn prepared_to_bytes(data: &PreparedData) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(SPLITS_MAGIC);
    w.u32(SPLITS_VERSION as usize)?;
    w.vocab(&data.vocab)?;
    w.u8(match data.phrase_mode {
        PhraseMode::SentenceOnly => 0,
        PhraseMode::AllPhrases => 1,
    });
    write_samples(&mut w, &data.splits.train)?;
    for &f in &data.train_is_sentence {
        w.u8(u8::from(f));
    }
    write_samples(&mut w, &data.splits.valid)?;
    write_samples(&mut w, &data.splits.test)?;
    Ok(w.0)
}

pub fn prepared_from_bytes(bytes: &[u8], path: &Path) -> Result<PreparedData> {
    let mut r = Reader::new(bytes, path, SPLITS_MAGIC)?;
    let version = r.u32("version")?;
    if version != SPLITS_VERSION as usize {
        return Err(r.err(format!("unsupported split cache version {version}")));
    }
    let vocab = r.vocab()?;
    let phrase_mode = match r.u8("phrase mode")? {
        0 => PhraseMode::SentenceOnly,
        1 => PhraseMode::AllPhrases,
        other => return Err(r.err(format!("unknown phrase mode {other}"))),
    };
    let train = read_samples(&mut r, vocab.len())?;
    let train_is_sentence = (0..train.len())
        .map(|_| r.u8("sentence flag").map(|b| b != 0))
        .collect::<Result<Vec<_>>>()?;
    let valid = read_samples(&mut r, vocab.len())?;
    let test = read_samples(&mut r, vocab.len())?;
    r.finish()?;
    Ok(PreparedData {
        vocab,
        phrase_mode,
        splits: DatasetSplits { train, valid, test },
        train_is_sentence,
    })
}

pub fn save_prepared(data: &PreparedData, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &prepared_to_bytes(data)?)
}

pub fn load_prepared(path: &Path) -> Result<PreparedData> {
    prepared_from_bytes(&fsio::read_bytes(path)?, path)
}
