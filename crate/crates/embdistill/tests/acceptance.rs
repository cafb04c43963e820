//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use embdistill::corpus::{load_tree_file, prepare_trees};
use embdistill::native::{load_model, load_table, save_model, save_table};
use embdistill::parallel::run_regime_parallel;
use embdistill::word2vec::{load_word2vec_text, parse_word2vec, to_word2vec_text};
use embdistill_core::data::{extract_samples, parse_tree, DatasetSplits, PhraseMode, Sample};
use embdistill_core::distillation::{
    mixed_loss, mixed_loss_backward, regime_factory, teacher_factory, Protocol, Regime, RegimeInputs, SoftTargetSet,
};
use embdistill_core::embeddings::{EmbeddingTable, Vocabulary};
use embdistill_core::gradcheck::{central_difference, max_relative_error, STEP, TOLERANCE};
use embdistill_core::math::{
    affine_backward, affine_forward, argmax, cross_entropy, dot, one_hot, softmax_ce_backward, softmax_t,
    tanh_backward, tanh_forward, Activation, Matrix,
};
use embdistill_core::model::{ClassifierModel, ModelConfig, RegimeTag};
use embdistill_core::synthetic::{generate, SyntheticConfig};
use embdistill_core::training::{evaluate, sgd_step, train_trial, DecayScheme, Grid, NoClock, Objective, TrainConfig};
use embdistill_core::seeded_rng;
use rand::seq::SliceRandom;
use rand::Rng;

use common::TestRng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient suite", gradient_suite),
        ("temperature example", temperature_example),
        ("lookup identity", lookup_identity),
        ("fold equivalence", fold_equivalence),
        ("deployment compression", deployment_compression),
        ("synthetic distillation experiment", synthetic_experiment),
        ("matching-softmax sanity", matching_softmax_sanity),
        ("determinism", determinism),
        ("data formats", data_formats),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

const POINTS: usize = 20;

fn random_vec(rng: &mut TestRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random_distribution(rng: &mut TestRng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Worst relative error of one check over `POINTS` random points.
fn over_points(rng: &mut TestRng, mut point: impl FnMut(&mut TestRng) -> (Vec<f64>, Vec<f64>)) -> f64 {
    (0..POINTS)
        .map(|_| {
            let (analytic, numeric) = point(rng);
            max_relative_error(&analytic, &numeric)
        })
        .fold(0.0, f64::max)
}

fn tiny_model(rng: &mut TestRng, n_distill: usize, dropout: f64) -> ClassifierModel {
    let words: Vec<String> = (0..4).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::from_distinct(words).unwrap();
    let table = EmbeddingTable::random(vocab, 4, 1.0, rng).unwrap();
    let config = ModelConfig {
        n_embed: 4,
        n_distill,
        n_hidden: 3,
        n_classes: 5,
        dropout_rate: dropout,
        activation: Activation::Tanh,
        regime: if n_distill > 0 { RegimeTag::Encoding } else { RegimeTag::Direct },
    };
    let mut m = ClassifierModel::new(config, table, rng).unwrap();
    for (name, block) in m.parameters_mut() {
        if name.ends_with("bias") {
            block.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        }
    }
    m
}

fn flat_parameters(m: &ClassifierModel) -> Vec<f64> {
    m.parameters().iter().flat_map(|(_, p)| p.iter().copied()).collect()
}

fn with_parameters(m: &ClassifierModel, x: &[f64]) -> ClassifierModel {
    let mut probe = m.clone();
    let mut it = x.iter();
    for (_, block) in probe.parameters_mut() {
        block.iter_mut().for_each(|v| *v = *it.next().unwrap());
    }
    probe
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(2024);
    let mut results: Vec<(String, f64)> = Vec::new();

    let affine = over_points(&mut rng, |r| {
        let w = Matrix::from_vec(4, 3, random_vec(r, 12, 1.0)).unwrap();
        let (x, b, up) = (random_vec(r, 3, 1.0), random_vec(r, 4, 1.0), random_vec(r, 4, 1.0));
        let g = affine_backward(&w, &x, &up).unwrap();
        let analytic: Vec<f64> = g.weight.data().iter().chain(&g.input).chain(&g.bias).copied().collect();
        let point: Vec<f64> = w.data().iter().chain(&x).chain(&b).copied().collect();
        let numeric = central_difference(
            |p| {
                let w = Matrix::from_vec(4, 3, p[..12].to_vec()).unwrap();
                dot(&up, &affine_forward(&w, &p[12..15], &p[15..]).unwrap())
            },
            &point,
            STEP,
        );
        (analytic, numeric)
    });
    results.push(("affine".into(), affine));

    let tanh = over_points(&mut rng, |r| {
        let (x, up) = (random_vec(r, 6, 2.0), random_vec(r, 6, 1.0));
        let analytic = tanh_backward(&tanh_forward(&x), &up).unwrap();
        (analytic, central_difference(|p| dot(&up, &tanh_forward(p)), &x, STEP))
    });
    results.push(("tanh".into(), tanh));

    for temperature in [1.0, 2.0] {
        for soft in [false, true] {
            let err = over_points(&mut rng, |r| {
                let z = random_vec(r, 5, 3.0);
                let t = if soft { random_distribution(r, 5) } else { one_hot(5, r.gen_range(0..5)) };
                let analytic = softmax_ce_backward(&z, &t, temperature).unwrap();
                let numeric = central_difference(
                    |p| cross_entropy(&softmax_t(p, temperature).unwrap(), &t).unwrap(),
                    &z,
                    STEP,
                );
                (analytic, numeric)
            });
            results.push((format!("softmax-ce T={temperature} soft={soft}"), err));
        }
    }

    for temperature in [1.0, 2.0] {
        let err = over_points(&mut rng, |r| {
            let z = random_vec(r, 5, 3.0);
            let truth = one_hot(5, r.gen_range(0..5));
            let teacher = random_distribution(r, 5);
            let analytic = mixed_loss_backward(&z, &truth, &teacher, temperature).unwrap();
            let numeric = central_difference(
                |p| {
                    let y1 = softmax_t(p, 1.0).unwrap();
                    let yt = softmax_t(p, temperature).unwrap();
                    mixed_loss(&y1, &yt, &truth, &teacher).unwrap()
                },
                &z,
                STEP,
            );
            (analytic, numeric)
        });
        results.push((format!("mixed loss T={temperature}"), err));
    }

    for n_distill in [0, 2] {
        for temperature in [1.0, 2.0] {
            for soft in [false, true] {
                let err = over_points(&mut rng, |r| {
                    let m = tiny_model(r, n_distill, 0.0);
                    let len = r.gen_range(1..6);
                    let tokens: Vec<usize> = (0..len).map(|_| r.gen_range(0..5)).collect();
                    let target = if soft { random_distribution(r, 5) } else { one_hot(5, r.gen_range(0..5)) };
                    let (_, cache) = m.forward_eval(&tokens, temperature).unwrap();
                    let grads = m.backward(&cache, &target, temperature).unwrap();
                    let analytic: Vec<f64> = grads.dense_blocks(&m).into_iter().flat_map(|(_, v)| v).collect();
                    let numeric = central_difference(
                        |x| {
                            let probe = with_parameters(&m, x);
                            let (_, c) = probe.forward_eval(&tokens, temperature).unwrap();
                            probe.loss(&c, &target, temperature).unwrap()
                        },
                        &flat_parameters(&m),
                        STEP,
                    );
                    (analytic, numeric)
                });
                let enc = if n_distill > 0 { "encoder" } else { "no encoder" };
                results.push((format!("model {enc} T={temperature} soft={soft}"), err));
            }
        }
    }

    let dropout = over_points(&mut rng, |r| {
        let m = tiny_model(r, 2, 0.4);
        let tokens = [0, 1, 4];
        let target = one_hot(5, r.gen_range(0..5));
        let mask_seed: u64 = r.gen();
        let (_, cache) = m.forward_train(&tokens, 1.0, &mut seeded_rng(mask_seed)).unwrap();
        let grads = m.backward(&cache, &target, 1.0).unwrap();
        let analytic: Vec<f64> = grads.dense_blocks(&m).into_iter().flat_map(|(_, v)| v).collect();
        let numeric = central_difference(
            |x| {
                let probe = with_parameters(&m, x);
                let (_, c) = probe.forward_train(&tokens, 1.0, &mut seeded_rng(mask_seed)).unwrap();
                probe.loss(&c, &target, 1.0).unwrap()
            },
            &flat_parameters(&m),
            STEP,
        );
        (analytic, numeric)
    });
    results.push(("model with dropout".into(), dropout));

    let secs = start.elapsed().as_secs_f64();
    let (worst_name, worst) = results
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap_or_default();
    let bad: Vec<String> = results
        .iter()
        .filter(|(_, e)| e.is_nan() || *e >= TOLERANCE)
        .map(|(n, e)| format!("{n}: {e:.2e}"))
        .collect();
    ensure(bad.is_empty(), || format!("relative error >= {TOLERANCE:e}: {}", bad.join(", ")))?;
    ensure(secs < 30.0, || format!("took {secs:.1}s, limit 30s"))?;
    Ok(format!(
        "{} checks x {POINTS} points, worst {worst:.2e} ({worst_name})",
        results.len()
    ))
}

fn temperature_example() -> Outcome {
    let z: Vec<f64> = [0.95f64, 0.04, 0.01].iter().map(|p| p.ln()).collect();
    let y = softmax_t(&z, 3.0).map_err(|e| e.to_string())?;
    let expected = [0.64, 0.22, 0.14];
    let worst = y.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(worst <= 0.005, || format!("got {y:.4?}, max deviation {worst:.4}"))?;
    Ok(format!("({:.4}, {:.4}, {:.4}), max deviation {worst:.4}", y[0], y[1], y[2]))
}

fn lookup_identity() -> Outcome {
    let words: Vec<String> = (0..100).map(|i| format!("word{i}")).collect();
    let vocab = Vocabulary::from_distinct(words).map_err(|e| e.to_string())?;
    let table = EmbeddingTable::random(vocab, 300, 1.0, &mut seeded_rng(3)).map_err(|e| e.to_string())?;
    let n = table.len();
    for i in 0..n {
        let via_product = table.matrix().matvec(&one_hot(n, i)).map_err(|e| e.to_string())?;
        let direct = table.lookup(i).map_err(|e| e.to_string())?;
        ensure(
            direct.iter().zip(&via_product).all(|(a, b)| a.to_bits() == b.to_bits()),
            || format!("column {i} differs"),
        )?;
    }
    Ok(format!("{n} columns (100 words + unknown), bit-identical"))
}

fn random_sentences(rng: &mut TestRng, n: usize, vocab_len: usize, n_classes: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..20);
            Sample {
                tokens: (0..len).map(|_| rng.gen_range(0..vocab_len)).collect(),
                label: rng.gen_range(0..n_classes),
            }
        })
        .collect()
}

fn fold_equivalence() -> Outcome {
    let task = generate(&SyntheticConfig {
        vocab_size: 500,
        n_train: 400,
        n_valid: 100,
        n_test: 100,
        ..SyntheticConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let protocol = Protocol {
        n_classes: task.n_classes(),
        ..Protocol::default()
    };
    let inputs = RegimeInputs {
        vocab: task.vocab(),
        large_table: Some(&task.table),
        small_table: None,
        teacher: None,
    };
    let config = TrainConfig {
        learning_rate: 0.3,
        batch_size: 20,
        max_epochs: 2,
        patience: 0,
        seed: 7,
        ..TrainConfig::default()
    };
    let factory = regime_factory(Regime::EncodingDistill, inputs, &protocol).map_err(|e| e.to_string())?;
    let model = factory(&config).map_err(|e| e.to_string())?;
    let trained = train_trial(model, &task.splits, Objective::Standard, &config, &NoClock)
        .map_err(|e| e.to_string())?
        .model;
    let folded = trained.fold().map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("folded.mdl");
    save_model(&folded, &path).map_err(|e| e.to_string())?;
    let reloaded = load_model(&path).map_err(|e| e.to_string())?;

    let sentences = random_sentences(&mut common::rng(50), 50, task.vocab().len(), task.n_classes());
    let mut worst: f64 = 0.0;
    let mut worst_file: f64 = 0.0;
    for s in &sentences {
        let live = trained.logits(&s.tokens).map_err(|e| e.to_string())?;
        let a = folded.logits(&s.tokens).map_err(|e| e.to_string())?;
        let b = reloaded.logits(&s.tokens).map_err(|e| e.to_string())?;
        for i in 0..live.len() {
            worst = worst.max((live[i] - a[i]).abs());
            worst_file = worst_file.max((live[i] - b[i]).abs());
        }
        ensure(argmax(&live) == argmax(&a) && argmax(&live) == argmax(&b), || {
            "a prediction changed after folding".to_string()
        })?;
    }
    let accs = [
        evaluate(&trained, &sentences),
        evaluate(&folded, &sentences),
        evaluate(&reloaded, &sentences),
    ]
    .map(|r| r.unwrap_or(f64::NAN));
    ensure(worst < 1e-5 && worst_file < 1e-5, || {
        format!("max logit difference {worst:.2e} in memory, {worst_file:.2e} from file")
    })?;
    ensure(accs[0] == accs[1] && accs[0] == accs[2], || format!("accuracies differ: {accs:?}"))?;
    Ok(format!(
        "50 sentences, max logit difference {worst:.1e} in memory, {worst_file:.1e} after save/load, accuracy {:.2} for all",
        accs[0]
    ))
}

fn deployment_compression() -> Outcome {
    let words: Vec<String> = (0..20_999).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::from_distinct(words).map_err(|e| e.to_string())?;
    let large = EmbeddingTable::random(vocab.clone(), 300, 0.1, &mut seeded_rng(1)).map_err(|e| e.to_string())?;
    let protocol = Protocol::default();
    let config = TrainConfig::default();
    let teacher = teacher_factory(&large, &protocol)(&config).map_err(|e| e.to_string())?;
    let inputs = RegimeInputs {
        vocab: &vocab,
        large_table: Some(&large),
        small_table: None,
        teacher: None,
    };
    let student = regime_factory(Regime::EncodingDistill, inputs, &protocol).map_err(|e| e.to_string())?(&config)
        .map_err(|e| e.to_string())?;
    let folded = student.fold().map_err(|e| e.to_string())?;
    let (t, s, f) = (teacher.count_parameters(), student.count_parameters(), folded.count_parameters());
    let ratio = f as f64 / t as f64;
    ensure(vocab.len() == 21_000, || format!("vocabulary has {} words", vocab.len()))?;
    ensure(
        (protocol.n_small, protocol.n_hidden, protocol.n_classes) == (50, 50, 5),
        || "unexpected default shapes".into(),
    )?;
    ensure(ratio <= 0.20, || format!("folded {f} / teacher {t} = {ratio:.4}"))?;
    Ok(format!(
        "teacher {t}, trained student {s}, folded {f}, ratio {ratio:.4} (|V| = 21000, teacher hidden {})",
        protocol.teacher_hidden
    ))
}

fn synthetic_experiment() -> Outcome {
    let start = Instant::now();
    let task = generate(&SyntheticConfig::default()).map_err(|e| e.to_string())?;
    let base = TrainConfig {
        learning_rate: 0.3,
        decay: DecayScheme::Constant,
        batch_size: 20,
        max_epochs: 15,
        dropout_rate: 0.0,
        seed: 1,
        patience: 0,
    };
    let protocol = Protocol {
        grid: Grid::single(&base),
        base,
        seeds: vec![1, 2, 3, 4, 5],
        n_classes: task.n_classes(),
        n_hidden: 50,
        n_small: 50,
        init_scale: 0.1,
        ..Protocol::default()
    };
    let inputs = RegimeInputs {
        vocab: task.vocab(),
        large_table: Some(&task.table),
        small_table: None,
        teacher: None,
    };
    let run = |regime| run_regime_parallel(regime, &task.splits, inputs, &protocol, None, 1);
    let direct = run(Regime::DirectSmall).map_err(|e| e.to_string())?;
    let encoding = run(Regime::EncodingDistill).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let pairs: Vec<(f64, f64)> = direct
        .aggregate
        .runs
        .iter()
        .zip(&encoding.aggregate.runs)
        .map(|(d, e)| {
            assert_eq!(d.seed, e.seed);
            (d.test_acc, e.test_acc)
        })
        .collect();
    let wins = pairs.iter().filter(|(d, e)| e > d).count();
    let (dm, em) = (100.0 * direct.aggregate.mean, 100.0 * encoding.aggregate.mean);
    let per_seed: Vec<String> = pairs
        .iter()
        .map(|(d, e)| format!("{:.1}/{:.1}", 100.0 * d, 100.0 * e))
        .collect();
    let detail = format!(
        "direct {dm:.1} ± {:.1}, encoding {em:.1} ± {:.1}, encoding ahead in {wins}/5 seeds [{}], {secs:.0}s single-threaded",
        100.0 * direct.aggregate.std,
        100.0 * encoding.aggregate.std,
        per_seed.join(" ")
    );
    ensure(em >= dm - 0.5, || format!("encoding mean below direct mean - 0.5: {detail}"))?;
    ensure(wins >= 3, || format!("encoding ahead in fewer than 3 seeds: {detail}"))?;
    ensure(secs < 600.0, || format!("over 10 minutes: {detail}"))?;
    Ok(detail)
}

/// Five classes of five words each; a sentence draws all its words from
/// the class it is labeled with.
fn separable_task(rng: &mut TestRng) -> (Vocabulary, DatasetSplits) {
    let words: Vec<String> = (0..25).map(|i| format!("c{}w{}", i / 5, i % 5)).collect();
    let vocab = Vocabulary::from_distinct(words).unwrap();
    let mut sample = |_| {
        let label = rng.gen_range(0..5);
        let len = rng.gen_range(2..5);
        Sample {
            tokens: (0..len).map(|_| label * 5 + rng.gen_range(0..5)).collect(),
            label,
        }
    };
    let train = (0..200).map(&mut sample).collect();
    let valid = (0..50).map(&mut sample).collect();
    let test = (0..100).map(&mut sample).collect();
    (vocab, DatasetSplits { train, valid, test })
}

fn matching_softmax_sanity() -> Outcome {
    let mut rng = common::rng(7);
    let (vocab, splits) = separable_task(&mut rng);
    let protocol = Protocol {
        n_classes: 5,
        n_hidden: 10,
        n_small: 10,
        init_scale: 0.5,
        ..Protocol::default()
    };
    let inputs = RegimeInputs {
        vocab: &vocab,
        large_table: None,
        small_table: None,
        teacher: None,
    };
    let factory = regime_factory(Regime::DirectSmall, inputs, &protocol).map_err(|e| e.to_string())?;
    let perfect = SoftTargetSet::from_labels(&splits.train, 5, 1.0).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        learning_rate: 0.3,
        batch_size: 10,
        max_epochs: 30,
        patience: 0,
        seed: 3,
        ..TrainConfig::default()
    };

    // both objectives from the same initialisation over the same batches
    let mut mixed_model = factory(&config).map_err(|e| e.to_string())?;
    let mut standard_model = mixed_model.clone();
    let (mut mixed_rng, mut standard_rng) = (seeded_rng(99), seeded_rng(99));
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let (mut steps, mut worst) = (0usize, 0.0f64);
    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut standard = 0.0;
            for &i in batch {
                let s = &splits.train[i];
                let z = mixed_model.logits(&s.tokens).map_err(|e| e.to_string())?;
                let y = softmax_t(&z, 1.0).map_err(|e| e.to_string())?;
                standard += cross_entropy(&y, &one_hot(5, s.label)).map_err(|e| e.to_string())?;
            }
            let lr = config.learning_rate;
            let mixed = sgd_step(&mut mixed_model, &splits.train, batch, Objective::Mixed(&perfect), lr, &mut mixed_rng)
                .map_err(|e| e.to_string())?;
            sgd_step(&mut standard_model, &splits.train, batch, Objective::Standard, lr, &mut standard_rng)
                .map_err(|e| e.to_string())?;
            let n = batch.len() as f64;
            worst = worst.max((mixed / n - 2.0 * standard / n).abs());
            steps += 1;
        }
    }
    ensure(worst < 1e-9, || format!("mixed loss differs from twice the standard loss by {worst:.2e}"))?;

    let a = 100.0 * evaluate(&standard_model, &splits.test).map_err(|e| e.to_string())?;
    let b = 100.0 * evaluate(&mixed_model, &splits.test).map_err(|e| e.to_string())?;
    ensure((a - b).abs() <= 1.0, || format!("final test accuracy standard {a:.1}% vs mixed {b:.1}%"))?;
    Ok(format!(
        "{steps} steps, max |mixed - 2 x standard| {worst:.1e}; final test accuracy standard {a:.1}%, mixed {b:.1}%"
    ))
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<String> = std::fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| !n.ends_with(".log"))
        .collect();
    names.sort();
    for name in &names {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let same = if name.ends_with(".json") || name.ends_with(".tsv") || name.ends_with(".txt") {
            let (x, y) = (String::from_utf8_lossy(&x), String::from_utf8_lossy(&y));
            common::without_timing(name, &x) == common::without_timing(name, &y)
        } else {
            x == y
        };
        ensure(same, || format!("{name} differs between runs"))?;
    }
    Ok(names.len())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = common::write_corpus(dir.path());
    let (first, second) = (dir.path().join("first"), dir.path().join("second"));
    common::full_pipeline(&corpus, &first);
    common::full_pipeline(&corpus, &second);
    let n = compare_dirs(&first, &second)?;
    ensure(n >= 15, || format!("only {n} artifacts produced"))?;
    Ok(format!(
        "{n} artifacts from prepare, teacher, soft-targets, distill x3, fold, compare identical across two executions"
    ))
}

fn data_formats() -> Outcome {
    let mut rng = common::rng(1000);
    let words = common::words(200);
    let trees: Vec<_> = (0..1000).map(|_| common::random_tree(&mut rng, &words, 6)).collect();
    for (i, t) in trees.iter().enumerate() {
        let back = parse_tree(&t.to_string()).map_err(|e| format!("tree {i}: {e}"))?;
        ensure(&back == t, || format!("tree {i} changed in a round trip"))?;
        let vocab = embdistill_core::data::build_vocab([t]);
        let n = extract_samples(t, PhraseMode::AllPhrases, &vocab).len();
        ensure(n == t.node_count(), || format!("tree {i}: {n} samples for {} nodes", t.node_count()))?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tree_file = dir.path().join("trees.txt");
    let text: String = trees.iter().map(|t| format!("{t}\n")).collect();
    std::fs::write(&tree_file, text).map_err(|e| e.to_string())?;
    let loaded = load_tree_file(&tree_file, false).map_err(|e| e.to_string())?;
    ensure(loaded == trees, || "tree file round trip changed trees".into())?;
    let nodes: usize = trees.iter().map(|t| t.node_count()).sum();
    let data = prepare_trees(&trees, &[], &[], PhraseMode::AllPhrases);
    ensure(data.splits.train.len() == nodes, || "phrase count differs from node count".into())?;

    let vec_words = common::words(300);
    let w2v = common::word2vec_text(&mut rng, &vec_words, 50);
    let w2v_path = dir.path().join("vectors.txt");
    std::fs::write(&w2v_path, &w2v).map_err(|e| e.to_string())?;
    let table = load_word2vec_text(&w2v_path).map_err(|e| e.to_string())?;
    let emb = dir.path().join("vectors.emb");
    save_table(&table, &emb).map_err(|e| e.to_string())?;
    let native = load_table(&emb).map_err(|e| e.to_string())?;
    ensure(native == table, || "native table differs from the word2vec table".into())?;
    let mut values = 0;
    for (line, word) in w2v.lines().skip(1).zip(&vec_words) {
        let i = native.vocab().get(word).ok_or_else(|| format!("{word} missing"))?;
        let col = native.lookup(i).map_err(|e| e.to_string())?;
        for (field, v) in line.split(' ').skip(1).zip(&col) {
            let f: f32 = field.parse().map_err(|e| format!("{e}"))?;
            ensure(f as f64 == *v && *v as f32 as f64 == *v, || format!("{word}: {field} stored as {v}"))?;
            values += 1;
        }
    }
    let again = parse_word2vec(&to_word2vec_text(&native), Path::new("<memory>")).map_err(|e| e.to_string())?;
    ensure(again == native, || "word2vec text written back differs".into())?;
    Ok(format!(
        "1000 trees ({nodes} nodes) round-tripped with phrase count = node count; {values} word2vec values f32-exact through the native format"
    ))
}
