//! Tree files and prepared datasets.

use std::path::Path;

use embdistill_core::data::{assemble_splits, parse_tree, DatasetSplits, LabeledTree, PhraseMode};
use embdistill_core::embeddings::Vocabulary;
use embdistill_core::Error as CoreError;

use crate::error::{Error, Result};
use crate::fsio;

/// Vocabulary and splits as written by `prepare`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub phrase_mode: PhraseMode,
    pub splits: DatasetSplits,
    /// Per training sample: whether it is a whole sentence (tree root).
    pub train_is_sentence: Vec<bool>,
}

impl PreparedData {
    /// The same data with phrase-level training samples dropped.
    pub fn sentences_only(&self) -> DatasetSplits {
        let train = self
            .splits
            .train
            .iter()
            .zip(&self.train_is_sentence)
            .filter(|(_, &root)| root)
            .map(|(s, _)| s.clone())
            .collect();
        DatasetSplits {
            train,
            valid: self.splits.valid.clone(),
            test: self.splits.test.clone(),
        }
    }

    pub fn train_sentence_count(&self) -> usize {
        self.train_is_sentence.iter().filter(|&&b| b).count()
    }
}

/// Parses one tree per non-blank line. CRLF line endings are accepted;
/// errors name the file and line.
pub fn parse_tree_file(text: &str, path: &Path, lowercase: bool) -> Result<Vec<LabeledTree>> {
    let mut out = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut tree = parse_tree(line).map_err(|e| match e {
            CoreError::Parse { offset, message } => {
                Error::format(path, Some(i + 1), format!("byte {offset}: {message}"))
            }
            other => Error::format(path, Some(i + 1), other.to_string()),
        })?;
        if lowercase {
            tree.lowercase();
        }
        out.push(tree);
    }
    Ok(out)
}

pub fn load_tree_file(path: &Path, lowercase: bool) -> Result<Vec<LabeledTree>> {
    parse_tree_file(&fsio::read_text(path)?, path, lowercase)
}

/// Trees → vocabulary (training split only) and samples. Validation and
/// test always hold whole sentences.
pub fn prepare_trees(
    train: &[LabeledTree],
    valid: &[LabeledTree],
    test: &[LabeledTree],
    mode: PhraseMode,
) -> PreparedData {
    let (vocab, splits) = assemble_splits(train, valid, test, mode);
    let mut train_is_sentence = Vec::with_capacity(splits.train.len());
    for t in train {
        let n = match mode {
            PhraseMode::SentenceOnly => 1,
            PhraseMode::AllPhrases => t.node_count(),
        };
        train_is_sentence.push(true);
        train_is_sentence.extend(std::iter::repeat_n(false, n - 1));
    }
    debug_assert_eq!(train_is_sentence.len(), splits.train.len());
    PreparedData {
        vocab,
        phrase_mode: mode,
        splits,
        train_is_sentence,
    }
}

pub fn load_splits(
    train_path: &Path,
    valid_path: &Path,
    test_path: &Path,
    mode: PhraseMode,
    lowercase: bool,
) -> Result<PreparedData> {
    let train = load_tree_file(train_path, lowercase)?;
    let valid = load_tree_file(valid_path, lowercase)?;
    let test = load_tree_file(test_path, lowercase)?;
    Ok(prepare_trees(&train, &valid, &test, mode))
}
