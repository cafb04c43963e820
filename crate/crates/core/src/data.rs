//! Labeled sentiment trees in s-expression form, samples and splits.
//!
//! A line such as `(3 (2 A) (4 B))` is a tree whose every node carries a
//! sentiment label; leaves carry one token. Training may use every node as a
//! sample (phrase enrichment); validation and test only ever use whole
//! sentences.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::embeddings::Vocabulary;
use crate::{Error, Result};

/// Number of sentiment classes in tree files (labels are single digits 0–4).
pub const TREE_CLASSES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Leaf(String),
    Branch(Vec<LabeledTree>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree {
    pub label: usize,
    pub node: Node,
}

impl LabeledTree {
    pub fn leaf(label: usize, token: impl Into<String>) -> Self {
        LabeledTree {
            label,
            node: Node::Leaf(token.into()),
        }
    }

    pub fn branch(label: usize, children: Vec<LabeledTree>) -> Self {
        LabeledTree {
            label,
            node: Node::Branch(children),
        }
    }

    pub fn token(&self) -> Option<&str> {
        match &self.node {
            Node::Leaf(t) => Some(t),
            Node::Branch(_) => None,
        }
    }

    pub fn children(&self) -> &[LabeledTree] {
        match &self.node {
            Node::Leaf(_) => &[],
            Node::Branch(c) => c,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(LabeledTree::node_count).sum::<usize>()
    }

    /// Leaf tokens, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.node {
            Node::Leaf(t) => out.push(t),
            Node::Branch(children) => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn lowercase(&mut self) {
        match &mut self.node {
            Node::Leaf(t) => *t = t.to_lowercase(),
            Node::Branch(children) => children.iter_mut().for_each(LabeledTree::lowercase),
        }
    }
}

/// Single-line s-expression; [`parse_tree`] reads it back as long as no
/// token contains whitespace or parentheses.
impl fmt::Display for LabeledTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Leaf(w) => write!(f, "({} {})", self.label, w),
            Node::Branch(children) => {
                write!(f, "({}", self.label)?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parses one s-expression tree. Surrounding whitespace (including a
/// trailing `\r`) is ignored; anything else after the root is an error.
pub fn parse_tree(line: &str) -> Result<LabeledTree> {
    let mut p = Parser {
        src: line.as_bytes(),
        text: line,
        pos: 0,
    };
    p.skip_ws();
    let tree = p.tree()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected input after tree"));
    }
    Ok(tree)
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: String::from(message),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    fn tree(&mut self) -> Result<LabeledTree> {
        if self.peek() != Some(b'(') {
            return Err(self.error("expected '('"));
        }
        self.pos += 1;
        self.skip_ws();
        let label = self.label()?;
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unbalanced parentheses: missing ')'")),
            Some(b')') => Err(self.error("empty node")),
            Some(b'(') => {
                let mut children = Vec::new();
                while self.peek() == Some(b'(') {
                    children.push(self.tree()?);
                    self.skip_ws();
                }
                self.close()?;
                Ok(LabeledTree::branch(label, children))
            }
            Some(_) => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if matches!(c, b' ' | b'\t' | b'\r' | b'\n' | b'(' | b')') {
                        break;
                    }
                    self.pos += 1;
                }
                let token = &self.text[start..self.pos];
                self.skip_ws();
                self.close()?;
                Ok(LabeledTree::leaf(label, token))
            }
        }
    }

    fn close(&mut self) -> Result<()> {
        match self.peek() {
            Some(b')') => {
                self.pos += 1;
                Ok(())
            }
            None => Err(self.error("unbalanced parentheses: missing ')'")),
            Some(_) => Err(self.error("expected ')'")),
        }
    }

    fn label(&mut self) -> Result<usize> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if matches!(c, b' ' | b'\t' | b'\r' | b'\n' | b'(' | b')') {
                break;
            }
            self.pos += 1;
        }
        let raw = &self.text[start..self.pos];
        if raw.is_empty() {
            self.pos = start;
            return Err(self.error("missing label"));
        }
        let value: usize = raw.parse().map_err(|_| Error::Parse {
            offset: start,
            message: format!("label {raw:?} is not a non-negative integer"),
        })?;
        if value >= TREE_CLASSES {
            return Err(Error::Parse {
                offset: start,
                message: format!("label {value} out of range 0..{}", TREE_CLASSES - 1),
            });
        }
        Ok(value)
    }
}

/// Word-index sequence with a class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub tokens: Vec<usize>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhraseMode {
    SentenceOnly,
    #[default]
    AllPhrases,
}

impl PhraseMode {
    pub fn name(self) -> &'static str {
        match self {
            PhraseMode::SentenceOnly => "sentence-only",
            PhraseMode::AllPhrases => "all-phrases",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sentence-only" | "sentences" => Ok(PhraseMode::SentenceOnly),
            "all-phrases" | "phrases" => Ok(PhraseMode::AllPhrases),
            other => Err(Error::Config(format!("unknown phrase mode {other:?}"))),
        }
    }
}

/// Samples of one tree. In [`PhraseMode::AllPhrases`] every node yields a
/// sample (pre-order, root first, duplicates kept).
pub fn extract_samples(tree: &LabeledTree, mode: PhraseMode, vocab: &Vocabulary) -> Vec<Sample> {
    let mut out = Vec::new();
    match mode {
        PhraseMode::SentenceOnly => out.push(node_sample(tree, vocab)),
        PhraseMode::AllPhrases => collect_phrases(tree, vocab, &mut out),
    }
    out
}

fn node_sample(tree: &LabeledTree, vocab: &Vocabulary) -> Sample {
    Sample {
        tokens: tree.leaves().into_iter().map(|w| vocab.index_or_unk(w)).collect(),
        label: tree.label,
    }
}

fn collect_phrases(tree: &LabeledTree, vocab: &Vocabulary, out: &mut Vec<Sample>) {
    out.push(node_sample(tree, vocab));
    for child in tree.children() {
        collect_phrases(child, vocab, out);
    }
}

/// Vocabulary over the leaf tokens of the training trees.
pub fn build_vocab<'a, I>(train_trees: I) -> Vocabulary
where
    I: IntoIterator<Item = &'a LabeledTree>,
{
    Vocabulary::from_tokens(train_trees.into_iter().flat_map(|t| t.leaves()))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSplits {
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Builds the vocabulary from `train` only and extracts samples; validation
/// and test always use whole sentences.
pub fn assemble_splits(
    train: &[LabeledTree],
    valid: &[LabeledTree],
    test: &[LabeledTree],
    mode: PhraseMode,
) -> (Vocabulary, DatasetSplits) {
    let vocab = build_vocab(train);
    let samples = |trees: &[LabeledTree], mode| {
        trees
            .iter()
            .flat_map(|t| extract_samples(t, mode, &vocab))
            .collect::<Vec<_>>()
    };
    let splits = DatasetSplits {
        train: samples(train, mode),
        valid: samples(valid, PhraseMode::SentenceOnly),
        test: samples(test, PhraseMode::SentenceOnly),
    };
    (vocab, splits)
}
