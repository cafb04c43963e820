#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use embdistill_core::data::LabeledTree;
use rand::Rng;

pub use embdistill_core::seeded_rng as rng;
pub type TestRng = embdistill_core::Rng;

pub fn random_tree<R: Rng>(rng: &mut R, words: &[String], depth: usize) -> LabeledTree {
    let label = rng.gen_range(0..5);
    if depth == 0 || rng.gen_bool(0.35) {
        return LabeledTree::leaf(label, words[rng.gen_range(0..words.len())].clone());
    }
    let n = rng.gen_range(1..=3);
    LabeledTree::branch(label, (0..n).map(|_| random_tree(rng, words, depth - 1)).collect())
}

pub fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

pub fn word2vec_text<R: Rng>(rng: &mut R, words: &[String], dim: usize) -> String {
    let mut s = format!("{} {dim}\n", words.len());
    for w in words {
        s.push_str(w);
        for _ in 0..dim {
            let v: f32 = rng.gen_range(-0.5..0.5);
            let _ = write!(s, " {v:?}");
        }
        s.push('\n');
    }
    s
}

/// Tree files plus a 6-dim and a 3-dim word2vec file covering 30 of 40 words.
pub struct Corpus {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    pub large: PathBuf,
    pub small: PathBuf,
}

pub fn write_corpus(dir: &Path) -> Corpus {
    let mut r = rng(11);
    let ws = words(40);
    let mut write_trees = |name: &str, n: usize| {
        let text: String = (0..n).map(|_| format!("{}\n", random_tree(&mut r, &ws, 3))).collect();
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let train = write_trees("train.txt", 60);
    let valid = write_trees("dev.txt", 20);
    let test = write_trees("test.txt", 20);
    let large = dir.join("large.txt");
    let small = dir.join("small.txt");
    std::fs::write(&large, word2vec_text(&mut r, &ws[..30], 6)).unwrap();
    std::fs::write(&small, word2vec_text(&mut r, &ws[..30], 3)).unwrap();
    Corpus {
        train,
        valid,
        test,
        large,
        small,
    }
}

pub fn embdistill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embdistill"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> String {
    let out = embdistill(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stderr.is_empty(), "stderr on success: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

pub const FAST: &[&str] = &[
    "--decays",
    "constant",
    "--dropouts",
    "0,0.2",
    "--max-epochs",
    "3",
    "--batch-size",
    "10",
    "--n-hidden",
    "4",
    "--seeds",
    "1,2,3",
    "--jobs",
    "2",
];

/// prepare → teacher → soft-targets → distill (all regimes) → fold → compare
/// into `out`.
pub fn full_pipeline(corpus: &Corpus, out: &Path) {
    let o = out.to_str().unwrap();
    let data = out.join("splits.spl");
    let data = data.to_str().unwrap();
    let s = |p: &PathBuf| p.to_str().unwrap().to_string();
    let (train, valid, test, large, small) =
        (s(&corpus.train), s(&corpus.valid), s(&corpus.test), s(&corpus.large), s(&corpus.small));
    ok(&["prepare", "--train", &train, "--valid", &valid, "--test", &test, "--out", o]);
    let with = |base: &[&str]| -> Vec<String> {
        base.iter().chain(FAST).map(|x| x.to_string()).collect()
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&refs)
    };
    run(with(&["teacher", "--data", data, "--embeddings", &large, "--learning-rates", "1,0.3", "--teacher-hidden", "8", "--out", o]));
    let teacher = out.join("teacher.mdl");
    ok(&["soft-targets", "--data", data, "--teacher", teacher.to_str().unwrap(), "--temperature", "2", "--out", o]);
    let soft = out.join("soft_targets.sft");
    run(with(&["distill", "--regime", "direct", "--data", data, "--small-embeddings", &small, "--learning-rates", "1,0.3", "--out", o]));
    run(with(&[
        "distill", "--regime", "matching-softmax", "--data", data, "--small-embeddings", &small,
        "--soft-targets", soft.to_str().unwrap(), "--learning-rates", "1,0.3", "--out", o,
    ]));
    run(with(&[
        "distill", "--regime", "encoding", "--data", data, "--embeddings", &large, "--n-distill", "3",
        "--learning-rates", "1,0.3", "--out", o,
    ]));
    let trained = out.join("encoding_trained.mdl");
    ok(&["fold", "--model", trained.to_str().unwrap(), "--out", o]);
    let results: Vec<String> = ["direct", "matching-softmax", "encoding"]
        .iter()
        .map(|r| out.join(format!("{r}.json")).to_str().unwrap().to_string())
        .collect();
    ok(&["compare", "--results", &results[0], &results[1], &results[2], "--out", o]);
}

/// Report text with timing columns and `seconds` fields removed.
pub fn without_timing(name: &str, text: &str) -> String {
    if name.ends_with(".json") {
        let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
        strip_seconds(&mut v);
        return v.to_string();
    }
    if name == "report.tsv" {
        let header: Vec<&str> = text.lines().next().unwrap_or("").split('\t').collect();
        let skip: Vec<usize> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.contains("seconds") || h.contains("time"))
            .map(|(i, _)| i)
            .collect();
        return text
            .lines()
            .map(|l| {
                if l.starts_with('#') {
                    return l.to_string();
                }
                l.split('\t')
                    .enumerate()
                    .filter(|(i, _)| !skip.contains(i))
                    .map(|(_, f)| f)
                    .collect::<Vec<_>>()
                    .join("\t")
            })
            .collect::<Vec<_>>()
            .join("\n");
    }
    text.to_string()
}

fn strip_seconds(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("seconds");
            m.values_mut().for_each(strip_seconds);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_seconds),
        _ => {}
    }
}
