//! The sentence classifier Θ and its gradients.
//!
//! word vectors (optionally passed through the encoding layer) → mean pooling
//! → `tanh(W_hidden · pool + b_hidden)` → dropout → `W_out · h + b_out` →
//! temperature softmax.
//!
//! Every parameter is trainable, including the look-up table. Table
//! gradients are kept sparse: only the columns of words that occurred in the
//! forward pass get an entry.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::embeddings::{fold, EmbeddingTable, EncoderLayer};
use crate::math::{
    affine_forward, cross_entropy, dropout_mask, softmax_ce_backward, softmax_t, Activation,
    Matrix,
};
use crate::{Error, Result};

/// Which of the compared setups a model was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegimeTag {
    #[default]
    Direct,
    Encoding,
    MatchingSoftmax,
}

impl RegimeTag {
    pub const ALL: [RegimeTag; 3] = [RegimeTag::Direct, RegimeTag::MatchingSoftmax, RegimeTag::Encoding];

    pub fn name(self) -> &'static str {
        match self {
            RegimeTag::Direct => "direct",
            RegimeTag::Encoding => "encoding",
            RegimeTag::MatchingSoftmax => "matching-softmax",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "direct" | "direct-small" | "direct_small" => Ok(RegimeTag::Direct),
            "encoding" | "encoding-distill" | "encoding_distill" => Ok(RegimeTag::Encoding),
            "matching-softmax" | "matching_softmax" | "matching" => Ok(RegimeTag::MatchingSoftmax),
            other => Err(Error::Config(format!("unknown regime {other:?}"))),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            RegimeTag::Direct => 0,
            RegimeTag::Encoding => 1,
            RegimeTag::MatchingSoftmax => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(RegimeTag::Direct),
            1 => Ok(RegimeTag::Encoding),
            2 => Ok(RegimeTag::MatchingSoftmax),
            other => Err(Error::Config(format!("unknown regime code {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Dimension of the look-up table columns.
    pub n_embed: usize,
    /// Encoder output dimension; 0 means no encoder.
    pub n_distill: usize,
    pub n_hidden: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
    pub activation: Activation,
    pub regime: RegimeTag,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_embed == 0 || self.n_hidden == 0 || self.n_classes == 0 {
            return Err(Error::Config(format!(
                "dimensions must be >= 1 (n_embed {}, n_hidden {}, n_classes {})",
                self.n_embed, self.n_hidden, self.n_classes
            )));
        }
        if self.n_distill != 0 && self.n_distill >= self.n_embed {
            return Err(Error::Config(format!(
                "n_distill ({}) must be smaller than n_embed ({})",
                self.n_distill, self.n_embed
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn has_encoder(&self) -> bool {
        self.n_distill > 0
    }

    /// Dimension of the vectors that get pooled.
    pub fn word_dim(&self) -> usize {
        if self.has_encoder() {
            self.n_distill
        } else {
            self.n_embed
        }
    }

    /// Stored values of a model over `vocab_size` words.
    pub fn parameter_count(&self, vocab_size: usize) -> usize {
        let encoder = if self.has_encoder() {
            self.n_distill * self.n_embed + self.n_distill
        } else {
            0
        };
        self.n_embed * vocab_size + encoder + self.classifier_parameter_count()
    }

    /// Stored values once the encoder is folded into the table.
    pub fn deployed_parameter_count(&self, vocab_size: usize) -> usize {
        self.word_dim() * vocab_size + self.classifier_parameter_count()
    }

    fn classifier_parameter_count(&self) -> usize {
        let d = self.word_dim();
        d * self.n_hidden + self.n_hidden + self.n_hidden * self.n_classes + self.n_classes
    }
}

/// Weight and bias of a fully connected layer; also used for gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Dense {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    fn xavier<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        Dense {
            weight: Matrix::xavier(out_dim, in_dim, rng),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn scale(&mut self, s: f64) {
        self.weight.data_mut().iter_mut().for_each(|v| *v *= s);
        self.bias.iter_mut().for_each(|v| *v *= s);
    }

    fn step(&mut self, grad: &Dense, lr: f64) {
        for (p, g) in self.weight.data_mut().iter_mut().zip(grad.weight.data()) {
            *p -= lr * g;
        }
        for (p, g) in self.bias.iter_mut().zip(&grad.bias) {
            *p -= lr * g;
        }
    }

    fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|v| v.is_finite())
    }
}

/// Everything [`ClassifierModel::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    tokens: Vec<usize>,
    /// Looked-up table columns, kept only when an encoder is present.
    raw: Vec<Vec<f64>>,
    /// Vectors that were pooled (encoder outputs or table columns).
    words: Vec<Vec<f64>>,
    pool: Vec<f64>,
    hidden: Vec<f64>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    temperature: f64,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// `softmax_t(logits, temperature)` of the pass that built this cache.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn pool(&self) -> &[f64] {
        &self.pool
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

/// Gradients for every trainable parameter of a [`ClassifierModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Table columns touched by the batch, keyed by word index.
    pub embedding: BTreeMap<usize, Vec<f64>>,
    pub encoder: Option<Dense>,
    pub hidden: Dense,
    pub output: Dense,
}

impl Gradients {
    pub fn zeros_for(model: &ClassifierModel) -> Self {
        Gradients {
            embedding: BTreeMap::new(),
            encoder: model
                .encoder
                .as_ref()
                .map(|e| Dense::zeros(e.n_distill(), e.n_embed())),
            hidden: Dense::zeros(model.hidden.out_dim(), model.hidden.in_dim()),
            output: Dense::zeros(model.output.out_dim(), model.output.in_dim()),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for col in self.embedding.values_mut() {
            col.iter_mut().for_each(|v| *v *= s);
        }
        if let Some(e) = &mut self.encoder {
            e.scale(s);
        }
        self.hidden.scale(s);
        self.output.scale(s);
    }

    pub fn is_finite(&self) -> bool {
        self.embedding.values().all(|c| c.iter().all(|v| v.is_finite()))
            && self.encoder.as_ref().is_none_or(Dense::is_finite)
            && self.hidden.is_finite()
            && self.output.is_finite()
    }

    /// Dense copies in the order of [`ClassifierModel::parameters`]; the
    /// table block is row-major `dim × |V|` with zeros for untouched columns.
    pub fn dense_blocks(&self, model: &ClassifierModel) -> Vec<(&'static str, Vec<f64>)> {
        let dim = model.embedding.dim();
        let n_words = model.embedding.len();
        let mut table = vec![0.0; dim * n_words];
        for (&col, g) in &self.embedding {
            for (r, v) in g.iter().enumerate() {
                table[r * n_words + col] = *v;
            }
        }
        let mut out = vec![("embedding", table)];
        if let Some(e) = &self.encoder {
            out.push(("encoder.weight", e.weight.data().to_vec()));
            out.push(("encoder.bias", e.bias.clone()));
        }
        out.push(("hidden.weight", self.hidden.weight.data().to_vec()));
        out.push(("hidden.bias", self.hidden.bias.clone()));
        out.push(("output.weight", self.output.weight.data().to_vec()));
        out.push(("output.bias", self.output.bias.clone()));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    config: ModelConfig,
    embedding: EmbeddingTable,
    encoder: Option<EncoderLayer>,
    hidden: Dense,
    output: Dense,
    /// Bumped on every parameter update so stale caches are detected.
    generation: u64,
}

impl ClassifierModel {
    /// Fresh model over `table`: Xavier-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, table: EmbeddingTable, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if table.dim() != config.n_embed {
            return Err(Error::dim(
                "ClassifierModel::new",
                format!("table is {}-dim, config n_embed is {}", table.dim(), config.n_embed),
            ));
        }
        let encoder = if config.has_encoder() {
            Some(EncoderLayer::new(config.n_embed, config.n_distill, rng)?)
        } else {
            None
        };
        let hidden = Dense::xavier(config.n_hidden, config.word_dim(), rng);
        let output = Dense::xavier(config.n_classes, config.n_hidden, rng);
        Ok(ClassifierModel {
            config,
            embedding: table,
            encoder,
            hidden,
            output,
            generation: 0,
        })
    }

    /// Assembles a model from stored parts, checking the whole shape chain.
    pub fn from_parts(
        config: ModelConfig,
        table: EmbeddingTable,
        encoder: Option<EncoderLayer>,
        hidden: Dense,
        output: Dense,
    ) -> Result<Self> {
        config.validate()?;
        let shape_err = |detail: alloc::string::String| Error::dim("ClassifierModel::from_parts", detail);
        if table.dim() != config.n_embed {
            return Err(shape_err(format!("table dim {} != n_embed {}", table.dim(), config.n_embed)));
        }
        match (&encoder, config.has_encoder()) {
            (Some(e), true) => {
                if e.n_embed() != config.n_embed || e.n_distill() != config.n_distill {
                    return Err(shape_err(format!(
                        "encoder is {}x{}, config wants {}x{}",
                        e.n_distill(),
                        e.n_embed(),
                        config.n_distill,
                        config.n_embed
                    )));
                }
            }
            (None, false) => {}
            _ => return Err(shape_err("encoder presence disagrees with n_distill".into())),
        }
        let d = config.word_dim();
        if hidden.in_dim() != d || hidden.out_dim() != config.n_hidden || hidden.bias.len() != config.n_hidden {
            return Err(shape_err(format!(
                "hidden layer is {}x{}, expected {}x{}",
                hidden.out_dim(),
                hidden.in_dim(),
                config.n_hidden,
                d
            )));
        }
        if output.in_dim() != config.n_hidden
            || output.out_dim() != config.n_classes
            || output.bias.len() != config.n_classes
        {
            return Err(shape_err(format!(
                "output layer is {}x{}, expected {}x{}",
                output.out_dim(),
                output.in_dim(),
                config.n_classes,
                config.n_hidden
            )));
        }
        Ok(ClassifierModel {
            config,
            embedding: table,
            encoder,
            hidden,
            output,
            generation: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn embedding(&self) -> &EmbeddingTable {
        &self.embedding
    }

    pub fn encoder(&self) -> Option<&EncoderLayer> {
        self.encoder.as_ref()
    }

    pub fn hidden(&self) -> &Dense {
        &self.hidden
    }

    pub fn output(&self) -> &Dense {
        &self.output
    }

    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    pub fn set_dropout(&mut self, rate: f64) -> Result<()> {
        let mut config = self.config;
        config.dropout_rate = rate;
        config.validate()?;
        self.config = config;
        Ok(())
    }

    /// Total number of stored values.
    pub fn count_parameters(&self) -> usize {
        self.parameters().iter().map(|(_, p)| p.len()).sum()
    }

    /// Parameter blocks in storage order.
    pub fn parameters(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![("embedding", self.embedding.matrix().data())];
        if let Some(e) = &self.encoder {
            out.push(("encoder.weight", e.weight.data()));
            out.push(("encoder.bias", &e.bias));
        }
        out.push(("hidden.weight", self.hidden.weight.data()));
        out.push(("hidden.bias", &self.hidden.bias));
        out.push(("output.weight", self.output.weight.data()));
        out.push(("output.bias", &self.output.bias));
        out
    }

    /// Mutable parameter blocks in storage order. Invalidates outstanding
    /// forward caches.
    pub fn parameters_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        self.generation += 1;
        let mut out: Vec<(&'static str, &mut [f64])> =
            vec![("embedding", self.embedding.matrix_mut().data_mut())];
        if let Some(e) = &mut self.encoder {
            out.push(("encoder.weight", e.weight.data_mut()));
            out.push(("encoder.bias", &mut e.bias));
        }
        out.push(("hidden.weight", self.hidden.weight.data_mut()));
        out.push(("hidden.bias", &mut self.hidden.bias));
        out.push(("output.weight", self.output.weight.data_mut()));
        out.push(("output.bias", &mut self.output.bias));
        out
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::Input("empty sample".into()));
        }
        let len = self.embedding.len();
        if let Some(&bad) = tokens.iter().find(|&&t| t >= len) {
            return Err(Error::Index { index: bad, len });
        }
        Ok(())
    }

    /// Vector fed to pooling for one word.
    fn word_vector(&self, token: usize) -> Result<Vec<f64>> {
        let v = self.embedding.lookup(token)?;
        match &self.encoder {
            Some(e) => e.encode_vector(&v),
            None => Ok(v),
        }
    }

    /// Evaluation-mode logits (no dropout, nothing cached).
    pub fn logits(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        self.check_tokens(tokens)?;
        let mut pool = vec![0.0; self.config.word_dim()];
        for &t in tokens {
            for (p, v) in pool.iter_mut().zip(self.word_vector(t)?) {
                *p += v;
            }
        }
        let n = tokens.len() as f64;
        pool.iter_mut().for_each(|p| *p /= n);
        let h = self
            .config
            .activation
            .forward(&affine_forward(&self.hidden.weight, &pool, &self.hidden.bias)?);
        affine_forward(&self.output.weight, &h, &self.output.bias)
    }

    /// Index of the most probable class.
    pub fn predict(&self, tokens: &[usize]) -> Result<usize> {
        Ok(crate::math::argmax(&self.logits(tokens)?))
    }

    /// Evaluation-mode forward pass.
    pub fn forward_eval(&self, tokens: &[usize], temperature: f64) -> Result<(Vec<f64>, ForwardCache)> {
        self.forward_impl(tokens, temperature, None)
    }

    /// Training-mode forward pass: dropout on the hidden layer output.
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        tokens: &[usize],
        temperature: f64,
        rng: &mut R,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        let mask = if self.config.dropout_rate > 0.0 {
            Some(dropout_mask(self.config.n_hidden, self.config.dropout_rate, rng)?)
        } else {
            None
        };
        self.forward_impl(tokens, temperature, mask)
    }

    fn forward_impl(
        &self,
        tokens: &[usize],
        temperature: f64,
        mask: Option<Vec<f64>>,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_tokens(tokens)?;
        let mut raw = Vec::new();
        let mut words = Vec::with_capacity(tokens.len());
        for &t in tokens {
            let v = self.embedding.lookup(t)?;
            match &self.encoder {
                Some(e) => {
                    words.push(e.encode_vector(&v)?);
                    raw.push(v);
                }
                None => words.push(v),
            }
        }
        let mut pool = vec![0.0; self.config.word_dim()];
        for w in &words {
            for (p, v) in pool.iter_mut().zip(w) {
                *p += v;
            }
        }
        let n = tokens.len() as f64;
        pool.iter_mut().for_each(|p| *p /= n);

        let hidden = self
            .config
            .activation
            .forward(&affine_forward(&self.hidden.weight, &pool, &self.hidden.bias)?);
        let dropped = match &mask {
            Some(m) => hidden.iter().zip(m).map(|(h, m)| h * m).collect(),
            None => hidden.clone(),
        };
        let logits = affine_forward(&self.output.weight, &dropped, &self.output.bias)?;
        let probs = softmax_t(&logits, temperature)?;
        let cache = ForwardCache {
            generation: self.generation,
            tokens: tokens.to_vec(),
            raw,
            words,
            pool,
            hidden,
            mask,
            dropped,
            logits,
            probs: probs.clone(),
            temperature,
        };
        Ok((probs, cache))
    }

    /// `cross_entropy(softmax_t(z, T), target)` for a cached pass.
    pub fn loss(&self, cache: &ForwardCache, target: &[f64], temperature: f64) -> Result<f64> {
        cross_entropy(&softmax_t(&cache.logits, temperature)?, target)
    }

    /// Gradients of `cross_entropy(softmax_t(z, T), target)` for one sample.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64], temperature: f64) -> Result<Gradients> {
        let dz = softmax_ce_backward(&cache.logits, target, temperature)?;
        let mut grads = Gradients::zeros_for(self);
        self.backward_into(cache, &dz, &mut grads, 1.0)?;
        Ok(grads)
    }

    /// Accumulates `scale ·` (gradients given `∂L/∂logits`) into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        dlogits: &[f64],
        grads: &mut Gradients,
        scale: f64,
    ) -> Result<()> {
        if cache.generation != self.generation {
            return Err(Error::Contract(format!(
                "forward cache from parameter generation {} used at generation {}",
                cache.generation, self.generation
            )));
        }
        if dlogits.len() != self.config.n_classes {
            return Err(Error::dim(
                "backward",
                format!("{} logit gradients for {} classes", dlogits.len(), self.config.n_classes),
            ));
        }
        if grads.encoder.is_some() != self.encoder.is_some() {
            return Err(Error::Contract("gradient buffer does not match model".into()));
        }

        grads.output.weight.add_outer(dlogits, &cache.dropped, scale)?;
        add_scaled(&mut grads.output.bias, dlogits, scale);
        let mut dh = self.output.weight.matvec_transposed(dlogits)?;
        if let Some(m) = &cache.mask {
            dh.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
        }
        let dpre = self.config.activation.backward(&cache.hidden, &dh)?;
        grads.hidden.weight.add_outer(&dpre, &cache.pool, scale)?;
        add_scaled(&mut grads.hidden.bias, &dpre, scale);
        let mut dpool = self.hidden.weight.matvec_transposed(&dpre)?;
        let n = cache.tokens.len() as f64;
        dpool.iter_mut().for_each(|d| *d /= n);

        let dim = self.embedding.dim();
        for (k, &token) in cache.tokens.iter().enumerate() {
            let dword = match (&self.encoder, &mut grads.encoder) {
                (Some(enc), Some(genc)) => {
                    let dpre_enc = enc.activation.backward(&cache.words[k], &dpool)?;
                    genc.weight.add_outer(&dpre_enc, &cache.raw[k], scale)?;
                    add_scaled(&mut genc.bias, &dpre_enc, scale);
                    enc.weight.matvec_transposed(&dpre_enc)?
                }
                _ => dpool.clone(),
            };
            let col = grads.embedding.entry(token).or_insert_with(|| vec![0.0; dim]);
            add_scaled(col, &dword, scale);
        }
        Ok(())
    }

    /// `param −= lr · grad` for every parameter; table columns without a
    /// gradient entry are left untouched.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.encoder.is_some() != self.encoder.is_some() {
            return Err(Error::Contract("gradient buffer does not match model".into()));
        }
        self.generation += 1;
        for (&col, g) in &grads.embedding {
            self.embedding.add_to_column(col, g, -lr)?;
        }
        if let (Some(e), Some(g)) = (&mut self.encoder, &grads.encoder) {
            for (p, d) in e.weight.data_mut().iter_mut().zip(g.weight.data()) {
                *p -= lr * d;
            }
            for (p, d) in e.bias.iter_mut().zip(&g.bias) {
                *p -= lr * d;
            }
        }
        self.hidden.step(&grads.hidden, lr);
        self.output.step(&grads.output, lr);
        Ok(())
    }

    /// Deployment form: the encoder is evaluated on every word once and the
    /// model keeps only the small table and Θ. Models without an encoder
    /// are returned unchanged.
    pub fn fold(&self) -> Result<ClassifierModel> {
        let Some(encoder) = &self.encoder else {
            return Ok(self.clone());
        };
        let table = fold(encoder, &self.embedding)?;
        let mut config = self.config;
        config.n_embed = config.n_distill;
        config.n_distill = 0;
        ClassifierModel::from_parts(config, table, None, self.hidden.clone(), self.output.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.parameters()
            .iter()
            .all(|(_, p)| p.iter().all(|v| v.is_finite()))
    }
}

fn add_scaled(acc: &mut [f64], v: &[f64], scale: f64) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}
