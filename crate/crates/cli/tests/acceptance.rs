//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use hatesense::audit::{aggregate, word_overlap, AuditConfig, BiasReport, OverlapConfig};
use hatesense::encoder::EncoderConfig;
use hatesense::experiments::{run_dispersion_experiment, run_fig3_curve, ExperimentSpec};
use hatesense::gradcheck::{check_model, check_op, primitive_cases};
use hatesense::objectives::{consensus_hard, consensus_loss, unique_hard, unique_loss, LossWeights};
use hatesense::sense::{argmax, assign_senses, ModelConfig, ModelMode, SenseModel};
use hatesense::synth::{synth_corpus, SynthSpec};
use hatesense::text::Vocabulary;
use hatesense::training::{train, TrainConfig};
use hatesense::{ClassSet, Example, GroupedCorpus, Split, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1. Published per-group accuracy columns through `aggregate`.

const A_GROUPS: [&str; 15] = [
    "Women", "Black", "Jew", "Muslim", "Transgender", "Gay", "Immigrants", "Refugee", "Disable",
    "South Asian", "Arab", "Gay Men", "Black Women", "East Asian", "Hispanic",
];
const A_BASE: [f64; 15] = [
    0.73, 0.81, 0.83, 0.79, 0.75, 0.67, 0.66, 0.77, 0.83, 0.86, 0.82, 0.43, 0.41, 0.74, 0.60,
];
const A_METHOD: [f64; 15] = [
    0.71, 0.83, 0.85, 0.82, 0.78, 0.74, 0.69, 0.77, 0.80, 0.82, 0.85, 0.57, 0.59, 0.79, 0.56,
];
const B_GROUPS: [&str; 6] = ["African", "Jewish", "Islam", "Homosexual", "Women", "Arab"];
const B_BASE: [f64; 6] = [0.54, 0.57, 0.75, 0.76, 0.63, 0.71];
const B_METHOD: [f64; 6] = [0.75, 0.79, 0.71, 0.73, 0.61, 0.74];

fn metrics_oracle() -> Check {
    let rows = [
        ("dataset A baseline", &A_GROUPS[..], &A_BASE[..], 0.71, 0.14, "Black Women"),
        ("dataset A method", &A_GROUPS[..], &A_METHOD[..], 0.74, 0.10, "Hispanic"),
        ("dataset B baseline", &B_GROUPS[..], &B_BASE[..], 0.66, 0.09, "African"),
        ("dataset B method", &B_GROUPS[..], &B_METHOD[..], 0.72, 0.06, "Women"),
    ];
    let mut parts = Vec::new();
    for (name, groups, accs, avg, disp, min_group) in rows {
        let pairs: Vec<(&str, f64)> = groups.iter().copied().zip(accs.iter().copied()).collect();
        let a = aggregate(&pairs).map_err(err)?;
        ensure((a.average - avg).abs() <= 0.005 && (a.dispersion - disp).abs() <= 0.005, || {
            format!("{name}: got ({:.4}, {:.4}), want ({avg}, {disp})", a.average, a.dispersion)
        })?;
        ensure(a.min_group == min_group, || format!("{name}: min group {}", a.min_group))?;
        parts.push(format!("{name} ({:.3}, {:.3})", a.average, a.dispersion));
    }
    Ok(parts.join(", "))
}

// 2. Finite-difference gradients.

const GRAD_TOL: f64 = 1e-4;
const GRAD_SEEDS: u64 = 20;

fn tiny_model(seed: u64, mode: ModelMode) -> SenseModel {
    let tokens = ["hate", "nothate", "w1", "w2", "w3", "w4", "w5", "w6"];
    let vocab = Vocabulary::from_tokens(&tokens, 16).unwrap();
    let mut enc = EncoderConfig::new(vocab.len());
    enc.d_model = 8;
    enc.n_heads = 2;
    enc.n_layers = 1;
    enc.d_ff = 16;
    enc.max_len = 8;
    enc.seed = seed;
    let mut config = ModelConfig::new(enc, mode);
    config.d_hidden = 8;
    SenseModel::new(config, ClassSet::binary(), vocab).unwrap()
}

fn gradient_correctness() -> Check {
    let mut worst = 0.0f64;
    let mut primitives = 0;
    for seed in 0..GRAD_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, inputs, f) in primitive_cases(&mut rng) {
            let w = check_op(seed, &inputs, f).map_err(err)?;
            ensure(w.rel_err < GRAD_TOL, || format!("{name} seed {seed}: {w:?}"))?;
            worst = worst.max(w.rel_err);
            primitives += 1;
        }
    }
    let words = ["w1", "w2", "w3", "w4", "w5", "w6"];
    for mode in [ModelMode::Sense, ModelMode::Baseline] {
        for seed in 0..GRAD_SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let text: Vec<&str> = (0..5).map(|_| words[rng.random_range(0..words.len())]).collect();
            let mut model = tiny_model(seed, mode);
            let w = check_model(&mut model, &text.join(" "), (seed % 2) as usize, &LossWeights::default())
                .map_err(err)?;
            ensure(w.rel_err < GRAD_TOL, || format!("{mode:?} model seed {seed}: {w:?}"))?;
            worst = worst.max(w.rel_err);
        }
    }
    Ok(format!(
        "{primitives} primitive checks and {} full-model checks, worst relative error {worst:.2e}",
        2 * GRAD_SEEDS
    ))
}

// 3. Sense assignment against a brute-force cosine scan.

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

fn cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

fn senses_of(tokens: &Tensor, classes: &Tensor, temperature: f64) -> hatesense::Result<(Vec<usize>, Tensor)> {
    let mut tape = Tape::new();
    let t = tape.constant(tokens.clone());
    let c = tape.constant(classes.clone());
    let (_, a) = assign_senses(&mut tape, t, c, temperature)?;
    Ok((a.senses, a.distributions))
}

fn sense_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tokens_checked = 0;
    for instance in 0..200 {
        let n = rng.random_range(1..8);
        let k = rng.random_range(2..5);
        let d = rng.random_range(2..9);
        let tokens = matrix(&mut rng, n, d);
        let classes = matrix(&mut rng, k, d);
        let temperature = rng.random_range(0.05..2.0);
        let (senses, dist) = senses_of(&tokens, &classes, temperature).map_err(err)?;
        for i in 0..n {
            let mut best = (0, f64::NEG_INFINITY);
            for j in 0..k {
                let c = cos(tokens.row(i), classes.row(j));
                if c > best.1 {
                    best = (j, c);
                }
            }
            ensure(senses[i] == best.0, || format!("instance {instance} token {i}: brute force disagrees"))?;
            ensure(argmax(dist.row(i)) == best.0, || {
                format!("instance {instance} token {i}: softmax argmax disagrees")
            })?;
            tokens_checked += 1;
        }
        let i = rng.random_range(0..n);
        let alpha = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut scaled = tokens.clone();
        for x in &mut scaled.data_mut()[i * d..(i + 1) * d] {
            *x *= alpha;
        }
        let (rescaled, _) = senses_of(&scaled, &classes, temperature).map_err(err)?;
        ensure(rescaled == senses, || format!("instance {instance}: rescaling token {i} changed senses"))?;
    }
    Ok(format!("200 instances, {tokens_checked} tokens"))
}

// 4. Hard and soft objectives on one-hot distributions.

fn brute_consensus(senses: &[usize], mask: &[bool]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in senses.iter().filter(|&&s| mask[s]) {
        *counts.entry(s).or_default() += 1;
    }
    let top = counts.values().copied().max();
    match top {
        Some(top) => counts.iter().find(|(_, &c)| c == top).map(|(&s, _)| s).unwrap(),
        None => (0..mask.len()).find(|&j| !mask[j]).unwrap(),
    }
}

fn hard_soft_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut zero_cases = 0;
    for case in 0..1000 {
        let k = rng.random_range(2..5);
        let mut mask: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
        mask[0] = true;
        mask[k - 1] = false;
        let n = rng.random_range(1..10);
        let senses: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();

        let hard = consensus_hard(&senses, &mask).map_err(err)?;
        ensure(hard == brute_consensus(&senses, &mask), || format!("case {case}: consensus_hard"))?;
        let distinct: HashSet<usize> = senses.iter().copied().filter(|&s| mask[s]).collect();
        ensure(unique_hard(&senses, &mask) == distinct.len(), || format!("case {case}: unique_hard"))?;

        let rows: Vec<Vec<f64>> = senses
            .iter()
            .map(|&s| (0..k).map(|j| if j == s { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut tape = Tape::new();
        let dist = tape.constant(Tensor::matrix(&rows));
        let u = unique_loss(&mut tape, dist, &mask).map_err(err)?;
        ensure(tape.value(u).item() == distinct.len() as f64, || format!("case {case}: unique_loss"))?;
        let y = rng.random_range(0..k);
        let c = consensus_loss(&mut tape, dist, y).map_err(err)?;
        let value = tape.value(c).item();
        let agree = senses.iter().all(|&s| s == y);
        ensure(value >= 0.0 && (value == 0.0) == agree, || {
            format!("case {case}: consensus_loss {value} with agreement {agree}")
        })?;
        zero_cases += usize::from(agree);
    }
    Ok(format!("1000 sense lists, {zero_cases} with full agreement"))
}

// 5. Sense model with augmentation and auxiliary terms off equals the baseline.

fn baseline_reduction() -> Check {
    let corpus = synth_corpus(&SynthSpec::uniform(3, 30, 30, 2)).map_err(err)?;
    let mut enc = EncoderConfig::new(0);
    enc.d_model = 16;
    enc.n_heads = 2;
    enc.n_layers = 1;
    enc.d_ff = 32;
    enc.max_len = 16;
    enc.dropout_rate = 0.1;
    enc.seed = 5;
    let mut sense = ModelConfig::new(enc.clone(), ModelMode::Sense);
    sense.augment = false;
    let baseline = ModelConfig::new(enc, ModelMode::Baseline);
    let weights = LossWeights {
        cls: 1.0,
        consensus: 0.0,
        unique: 0.0,
    };
    let config = TrainConfig {
        epochs: 3,
        batch_size: 8,
        seed: 5,
        weights,
        ..Default::default()
    };
    let a = train(&corpus, &sense, &config).map_err(err)?;
    let b = train(&corpus, &baseline, &config).map_err(err)?;
    let bits = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    for (e, (x, y)) in a.history.iter().zip(&b.history).enumerate() {
        ensure(x.cls.to_bits() == y.cls.to_bits() && x.total.to_bits() == y.total.to_bits(), || {
            format!("epoch {}: losses {} vs {}", e + 1, x.total, y.total)
        })?;
    }
    ensure(a.history.len() == b.history.len(), || "history lengths differ".into())?;
    ensure(bits(&a.dev_accuracy) == bits(&b.dev_accuracy), || "dev accuracy differs".into())?;
    ensure(a.model.params().names() == b.model.params().names(), || "parameter sets differ".into())?;
    for (name, (x, y)) in a
        .model
        .params()
        .names()
        .iter()
        .zip(a.model.params().tensors().iter().zip(b.model.params().tensors()))
    {
        ensure(bits(x.data()) == bits(y.data()), || format!("parameter {name} differs"))?;
    }
    Ok(format!(
        "{} epochs with dropout, losses, dev accuracy and {} parameter tensors bitwise equal",
        a.history.len(),
        a.model.params().len()
    ))
}

// 6 and 7. Desk-scale experiment on the synthetic skewed corpus.

fn desk_replication(spec: &ExperimentSpec) -> Check {
    let corpus = spec.corpus.load().map_err(err)?;
    let mut volumes: Vec<usize> = corpus.group_counts(Split::Train).values().copied().collect();
    volumes.sort_unstable();
    let median = volumes[volumes.len() / 2] as f64;
    let g5 = corpus.group_counts(Split::Train)["g5"] as f64;
    ensure(volumes.len() >= 4 && g5 <= 0.2 * median, || format!("starved group at {g5} of median {median}"))?;
    let t = Instant::now();
    let s = run_dispersion_experiment(spec).map_err(err)?;
    let m = &s.median;
    let line = format!(
        "median deltas over {} seeds: dispersion {:+.4}, average {:+.4}, overall {:+.4} ({:.1}s)",
        s.runs.len(),
        m.dispersion,
        m.average,
        m.overall,
        t.elapsed().as_secs_f64()
    );
    ensure(s.flags.all(), || line.clone())?;
    Ok(line)
}

fn volume_curve(spec: &ExperimentSpec) -> Check {
    let curve = run_fig3_curve(spec, "g5", &[0, 4, 8, 16]).map_err(err)?;
    let shown: Vec<String> = curve.median.iter().map(|v| format!("{v:.3}")).collect();
    let line = format!("g5 median accuracy at sizes {:?}: [{}]", curve.sizes, shown.join(", "));
    ensure(curve.nearly_monotone(), || line.clone())?;
    Ok(line)
}

// 8. Every CLI command twice with the same inputs.

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli_pass(dir: &Path) -> std::result::Result<(Vec<u8>, BTreeMap<PathBuf, Vec<u8>>), String> {
    let _ = fs::remove_dir_all(dir);
    fs::create_dir_all(dir).map_err(err)?;
    let d = |p: &str| dir.join(p).to_string_lossy().into_owned();
    let small = [
        "--d-model", "8", "--heads", "2", "--layers", "1", "--d-ff", "16", "--max-len", "12", "--epochs", "2",
        "--batch-size", "8", "--lr", "1e-3", "--dropout", "0.1", "--seed", "3",
    ];
    let mut stdout = Vec::new();
    let mut run = |args: Vec<String>| -> std::result::Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_hatesense")).args(&args).output().map_err(err)?;
        if !out.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
        }
        stdout.extend(out.stdout);
        Ok(())
    };
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let corpus = d("corpus.jsonl");
    run([s(&["synth", "--groups", "3", "--hate-per-group", "40", "--benign-per-group", "40"]),
        s(&["--skew", "g3:6", "--disjoint", "g3", "--seed", "4", "--out", &corpus])].concat())?;
    for (mode, out) in [("sense", "sense"), ("baseline", "base")] {
        run([s(&["train", "--corpus", &corpus, "--mode", mode, "--out", &d(out)]), s(&small)].concat())?;
        let ckpt = d(&format!("{out}/model.ckpt"));
        run(s(&["evaluate", "--corpus", &corpus, "--checkpoint", &ckpt, "--out", &d(&format!("{out}_eval.json"))]))?;
        run(s(&[
            "audit", "--corpus", &corpus, "--checkpoint", &ckpt, "--min-test-count", "5", "--overlap-k", "10",
            "--out", &d(&format!("{out}_audit.json")), "--svg", &d(&format!("{out}_audit.svg")),
        ]))?;
    }
    run(s(&["compare", "--baseline", &d("base_audit.json"), "--method", &d("sense_audit.json"), "--out", &d("cmp.json")]))?;
    run(s(&["predict", "--checkpoint", &d("sense/model.ckpt"), "--text", "some words here", "--out", &d("pred.json")]))?;
    run([s(&["subset", "--corpus", &corpus, "--group", "g3", "--sizes", "0,6,12", "--min-test-count", "5"]),
        s(&["--out", &d("subset")]), s(&small)].concat())?;
    run(s(&["experiment", "--seeds", "0,1", "--curve-sizes", "0,16", "--out", &d("exp")]))?;
    Ok((stdout, read_tree(dir)))
}

fn cli_determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("hatesense-acceptance-{}", std::process::id()));
    let (out_a, files_a) = cli_pass(&dir)?;
    let (out_b, files_b) = cli_pass(&dir)?;
    let _ = fs::remove_dir_all(&dir);
    ensure(out_a == out_b, || "stdout differs between runs".into())?;
    let names: Vec<_> = files_a.keys().collect();
    ensure(names == files_b.keys().collect::<Vec<_>>(), || "different files written".into())?;
    for (name, bytes) in &files_a {
        ensure(&files_b[name] == bytes, || format!("{} differs between runs", name.display()))?;
    }
    let bytes: usize = files_a.values().map(Vec::len).sum();
    Ok(format!("8 commands, {} files ({bytes} bytes) and stdout identical", files_a.len()))
}

// 9. Audit on a hand-counted fixture.

fn fixture() -> GroupedCorpus {
    let mut ex = Vec::new();
    let mut add = |text: &str, label: &str, groups: &[&str], split: Split, times: usize| {
        for _ in 0..times {
            ex.push(Example::new(text, label, groups.iter().copied(), split));
        }
    };
    add("alpha alpha beta", "hate", &["a"], Split::Train, 3);
    add("alpha gamma", "nothate", &["a"], Split::Train, 3);
    add("delta alpha", "hate", &["a", "b"], Split::Train, 3);
    add("beta beta omega", "nothate", &["b"], Split::Train, 5);
    add("alpha test", "hate", &["a"], Split::Test, 5);
    add("beta test", "nothate", &["b"], Split::Test, 5);
    add("delta test", "hate", &["a", "b"], Split::Test, 4);
    let none: &[&str] = &[];
    add("dev text", "nothate", none, Split::Dev, 2);
    GroupedCorpus::new(ex, ClassSet::binary()).unwrap()
}

fn audit_fixture() -> Check {
    let corpus = fixture();
    ensure(corpus.len() == 30, || format!("fixture has {} examples", corpus.len()))?;
    // Wrong on the 5th a-only, the last 3 b-only and the last a+b test example.
    let test = corpus.split_indices(Split::Test);
    let wrong: HashSet<usize> = [4, 7, 8, 9, 13].into_iter().collect();
    let preds: Vec<usize> = test
        .iter()
        .enumerate()
        .map(|(pos, &i)| if wrong.contains(&pos) { 1 - corpus.label(i) } else { corpus.label(i) })
        .collect();
    let config = AuditConfig {
        min_test_count: 1,
        overlap: OverlapConfig { k: 3, stopwords: 0 },
    };
    let report = BiasReport::build(&corpus, &preds, &config).map_err(err)?;
    let row = |g: &str| report.groups.iter().find(|r| r.name == g).cloned().unwrap();
    let (a, b) = (row("a"), row("b"));
    let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
    ensure(close(a.accuracy, 7.0 / 9.0) && close(b.accuracy, 5.0 / 9.0), || {
        format!("accuracies {} and {}", a.accuracy, b.accuracy)
    })?;
    ensure(close(report.overall_accuracy, 9.0 / 14.0), || format!("overall {}", report.overall_accuracy))?;
    ensure(
        (a.test_count, b.test_count, a.train_count, b.train_count) == (9, 9, 9, 8)
            && (a.train_count_exclusive, b.train_count_exclusive) == (6, 5),
        || format!("counts a {a:?} b {b:?}"),
    )?;
    ensure(close(a.word_overlap.unwrap(), 1.0 / 3.0) && close(b.word_overlap.unwrap(), 2.0 / 3.0), || {
        format!("overlap {:?} {:?}", a.word_overlap, b.word_overlap)
    })?;
    let cfg = OverlapConfig { k: 3, stopwords: 1 };
    let (oa, ob) = (word_overlap(&corpus, "a", &cfg).map_err(err)?, word_overlap(&corpus, "b", &cfg).map_err(err)?);
    ensure(close(oa.fraction, 0.0) && close(ob.fraction, 1.0 / 3.0), || {
        format!("overlap without stopword {} {}", oa.fraction, ob.fraction)
    })?;
    Ok("accuracies 7/9 and 5/9, overall 9/14, counts and overlaps as hand-computed".into())
}

fn main() -> ExitCode {
    let desk = ExperimentSpec::desk_scale((0..5).collect());
    let criteria: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        ("1 metrics oracle", Box::new(metrics_oracle)),
        ("2 gradient correctness", Box::new(gradient_correctness)),
        ("3 sense assignment invariants", Box::new(sense_invariants)),
        ("4 hard/soft objective consistency", Box::new(hard_soft_consistency)),
        ("5 baseline reduction", Box::new(baseline_reduction)),
        ("6 desk-scale directional replication", Box::new(|| desk_replication(&desk))),
        ("7 group-volume curve", Box::new(|| volume_curve(&desk))),
        ("8 CLI determinism", Box::new(cli_determinism)),
        ("9 audit fixture", Box::new(audit_fixture)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
