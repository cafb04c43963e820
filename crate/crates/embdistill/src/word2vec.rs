//! word2vec text format: a `<count> <dim>` header, then one line per word
//! holding the token and `dim` space-separated decimals.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use embdistill_core::embeddings::{EmbeddingTable, UNK_TOKEN};

use crate::error::{Error, Result};
use crate::fsio;

pub fn load_word2vec_text(path: &Path) -> Result<EmbeddingTable> {
    parse_word2vec(&fsio::read_text(path)?, path)
}

/// Parses file contents; `path` only labels errors. Values are read at f32
/// precision and the unknown-word vector (mean of all vectors) is rounded
/// to f32 as well, so the whole table survives the native format exactly.
pub fn parse_word2vec(text: &str, path: &Path) -> Result<EmbeddingTable> {
    let mut lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let header = lines.first().ok_or_else(|| Error::format(path, Some(1), "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (parse_usize(c), parse_usize(d)) {
            (Some(c), Some(d)) if d > 0 => (c, d),
            _ => return Err(Error::format(path, Some(1), format!("bad header {header:?}"))),
        },
        _ => {
            return Err(Error::format(
                path,
                Some(1),
                format!("header must be \"<count> <dim>\", got {header:?}"),
            ))
        }
    };
    let body = &lines[1..];
    if body.len() != count {
        return Err(Error::format(
            path,
            Some(lines.len()),
            format!("header declares {count} words, file has {}", body.len()),
        ));
    }

    let mut words = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let mut seen: HashMap<&str, usize> = HashMap::with_capacity(count);
    for (i, line) in body.iter().enumerate() {
        let line_no = i + 2;
        let mut parts = line.split_whitespace();
        let word = parts
            .next()
            .ok_or_else(|| Error::format(path, Some(line_no), "empty line"))?;
        if word == UNK_TOKEN {
            return Err(Error::format(path, Some(line_no), format!("token {UNK_TOKEN:?} is reserved")));
        }
        if let Some(first) = seen.insert(word, line_no) {
            return Err(Error::format(
                path,
                Some(line_no),
                format!("duplicate word {word:?} (first on line {first})"),
            ));
        }
        let mut v = Vec::with_capacity(dim);
        for field in parts {
            let x: f32 = field
                .parse()
                .map_err(|_| Error::format(path, Some(line_no), format!("not a number: {field:?}")))?;
            if !x.is_finite() {
                return Err(Error::format(path, Some(line_no), format!("non-finite value {field:?}")));
            }
            v.push(f64::from(x));
        }
        if v.len() != dim {
            return Err(Error::format(
                path,
                Some(line_no),
                format!("expected {dim} values, found {}", v.len()),
            ));
        }
        words.push(word.to_string());
        vectors.push(v);
    }
    let mut table = EmbeddingTable::with_mean_unknown(words, dim, &vectors)?;
    let unk = table.vocab().unk_index();
    let m = table.matrix_mut();
    for r in 0..dim {
        let q = m.get(r, unk) as f32;
        m.set(r, unk, f64::from(q));
    }
    Ok(table)
}

/// Text form of every word except the unknown token, values printed as the
/// shortest decimals that read back to the same f32.
pub fn to_word2vec_text(table: &EmbeddingTable) -> String {
    let vocab = table.vocab();
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", table.len() - 1, table.dim());
    for (col, word) in vocab.words().iter().enumerate() {
        if col == vocab.unk_index() {
            continue;
        }
        s.push_str(word);
        for r in 0..table.dim() {
            let _ = write!(s, " {}", table.matrix().get(r, col) as f32);
        }
        s.push('\n');
    }
    s
}

pub fn save_word2vec_text(table: &EmbeddingTable, path: &Path) -> Result<()> {
    fsio::write_atomic(path, to_word2vec_text(table).as_bytes())
}
