use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hatesense::audit::{compare_reports, AuditConfig, BiasReport, OverlapConfig};
use hatesense::checkpoint;
use hatesense::corpus::load_corpus;
use hatesense::encoder::EncoderConfig;
use hatesense::experiments::{run_dispersion_experiment, run_fig3_curve, CorpusSource, ExperimentSpec};
use hatesense::objectives::LossWeights;
use hatesense::plot;
use hatesense::sense::{ModelConfig, ModelMode, SenseModel};
use hatesense::synth::{synth_corpus, SynthSpec};
use hatesense::training::{accuracy, predict_test, subset_experiment, train, AdamConfig, TrainConfig};
use hatesense::{ClassSet, Error, GroupedCorpus, Split};

#[derive(Parser)]
#[command(name = "hatesense", version, about = "Token-level hate-sense classifier and per-group bias audit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grouped corpus
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus a training log
    Train(TrainCmd),
    /// Accuracy of a checkpoint on one split
    Evaluate(EvaluateArgs),
    /// Per-group bias report for a checkpoint's test predictions
    Audit(AuditArgs),
    /// Deltas between a baseline report and a method report
    Compare(CompareArgs),
    /// Predict one text, with per-token senses
    Predict(PredictArgs),
    /// Retrain with one group's training data cut to each size
    Subset(SubsetArgs),
    /// Baseline against sense model over several seeds, plus the group-volume curve
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of groups, named g1..gN
    #[arg(long, required_unless_present = "benchmark")]
    groups: Option<usize>,
    /// Hateful examples per group, all splits
    #[arg(long, required_unless_present = "benchmark")]
    hate_per_group: Option<usize>,
    /// Benign examples per group, all splits
    #[arg(long, required_unless_present = "benchmark")]
    benign_per_group: Option<usize>,
    /// Cut a group's training data: GROUP:HATE[:BENIGN] (BENIGN defaults to HATE)
    #[arg(long, value_name = "GROUP:HATE[:BENIGN]")]
    skew: Vec<String>,
    /// Give a group its own hateful and benign vocabulary
    #[arg(long, value_name = "GROUP")]
    disjoint: Vec<String>,
    /// Use the built-in benchmark (four groups plus a starved, disjoint g5),
    /// the corpus `experiment` trains on
    #[arg(long, conflicts_with_all = ["groups", "hate_per_group", "benign_per_group"])]
    benchmark: bool,
    /// Label noise rate [default: 0.1]
    #[arg(long)]
    noise: Option<f64>,
    /// Slur and theme words per group [default: 8, benchmark 3]
    #[arg(long)]
    lexicon_size: Option<usize>,
    /// [default: 0.2]
    #[arg(long)]
    dev_fraction: Option<f64>,
    /// [default: 0.2, benchmark 0.3]
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output corpus file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sense,
    Baseline,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "sense")]
    mode: Mode,
    #[arg(long, default_value_t = 64)]
    d_model: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 128)]
    d_ff: usize,
    /// Hidden width of the classifier MLP (defaults to d_model)
    #[arg(long)]
    d_hidden: Option<usize>,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Softmax temperature of the sense distribution
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Keep the senses but do not add class vectors to the tokens
    #[arg(long)]
    no_augment: bool,
    /// Add the distribution-weighted class vector instead of the argmax one
    #[arg(long)]
    soft_augment: bool,
}

impl ModelArgs {
    fn config(&self, seed: u64) -> ModelConfig {
        let mut enc = EncoderConfig::new(0);
        enc.d_model = self.d_model;
        enc.n_heads = self.heads;
        enc.n_layers = self.layers;
        enc.d_ff = self.d_ff;
        enc.max_len = self.max_len;
        enc.dropout_rate = self.dropout;
        enc.seed = seed;
        let mode = match self.mode {
            Mode::Sense => ModelMode::Sense,
            Mode::Baseline => ModelMode::Baseline,
        };
        let mut cfg = ModelConfig::new(enc, mode);
        cfg.d_hidden = self.d_hidden.unwrap_or(self.d_model);
        cfg.temperature = self.temperature;
        cfg.augment = !self.no_augment;
        cfg.soft_augment = self.soft_augment;
        cfg
    }
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_cls: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda_consensus: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda_unique: f64,
    /// Stop after this many epochs without dev improvement
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value_t = 5000)]
    max_vocab: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self, mode: Mode) -> TrainConfig {
        let weights = match mode {
            Mode::Sense => LossWeights {
                cls: self.lambda_cls,
                consensus: self.lambda_consensus,
                unique: self.lambda_unique,
            },
            Mode::Baseline => LossWeights {
                cls: self.lambda_cls,
                ..LossWeights::cls_only()
            },
        };
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                learning_rate: self.lr,
                ..AdamConfig::default()
            },
            seed: self.seed,
            weights,
            patience: self.patience,
            max_vocab: self.max_vocab,
            checkpoint: None,
        }
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file (one JSON object per line)
    #[arg(long)]
    corpus: PathBuf,
    /// Classes as NAME:HATEFUL pairs; HATEFUL is 1/0
    #[arg(long, default_value = "hate:1,nothate:0")]
    classes: String,
}

impl CorpusArgs {
    fn load(&self) -> Result<GroupedCorpus, Error> {
        load_corpus(&self.corpus, &ClassSet::parse(&self.classes)?)
    }
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Output directory for model.ckpt and train_log.jsonl
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Dev,
    Test,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Corpus file; labels are read with the checkpoint's classes
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Write the result object here as well as to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditParams {
    /// Groups with fewer test examples are left out
    #[arg(long, default_value_t = 25)]
    min_test_count: usize,
    /// Top-K tokens compared by the word-overlap statistic
    #[arg(long, default_value_t = 100)]
    overlap_k: usize,
    /// Most frequent train tokens dropped before the overlap statistic
    #[arg(long, default_value_t = 20)]
    stopwords: usize,
}

impl AuditParams {
    fn config(&self) -> AuditConfig {
        AuditConfig {
            min_test_count: self.min_test_count,
            overlap: OverlapConfig {
                k: self.overlap_k,
                stopwords: self.stopwords,
            },
        }
    }
}

#[derive(Args)]
struct AuditArgs {
    /// Corpus file; labels are read with the checkpoint's classes
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    audit: AuditParams,
    /// Report file (one JSON object)
    #[arg(long)]
    out: PathBuf,
    /// Also write a per-group accuracy bar chart (SVG)
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    method: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SubsetArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Group whose training data is cut
    #[arg(long)]
    group: String,
    /// Comma-separated, non-decreasing training sizes
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value_t = 25)]
    min_test_count: usize,
    /// Output directory for subset.json and subset.svg
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Corpus file; the built-in benchmark when absent
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "hate:1,nothate:0")]
    classes: String,
    /// Group for the volume curve
    #[arg(long, default_value = "g5")]
    curve_group: String,
    /// Sizes for the volume curve; empty skips the curve
    #[arg(long, value_delimiter = ',', default_value = "0,4,8,16")]
    curve_sizes: Vec<usize>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_skew(s: &str) -> Result<(String, usize, usize), Error> {
    let bad = || Error::Config(format!("bad --skew {s:?}; expected GROUP:HATE[:BENIGN]"));
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.parse::<usize>().map_err(|_| bad());
    match parts.as_slice() {
        [g, h] => Ok((g.to_string(), num(h)?, num(h)?)),
        [g, h, b] => Ok((g.to_string(), num(h)?, num(b)?)),
        _ => Err(bad()),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<(), Error> {
    let mut spec = if a.benchmark {
        SynthSpec::desk_benchmark(a.seed)
    } else {
        let (n, h, b) = (a.groups.unwrap(), a.hate_per_group.unwrap(), a.benign_per_group.unwrap());
        SynthSpec::uniform(n, h, b, a.seed)
    };
    for s in &a.skew {
        let (name, h, b) = parse_skew(s)?;
        let g = spec
            .groups
            .iter_mut()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::Config(format!("--skew names unknown group {name:?}")))?;
        *g = g.clone().starved(h, b);
    }
    for name in &a.disjoint {
        let g = spec
            .groups
            .iter_mut()
            .find(|g| &g.name == name)
            .ok_or_else(|| Error::Config(format!("--disjoint names unknown group {name:?}")))?;
        *g = g.clone().disjoint();
    }
    spec.noise = a.noise.unwrap_or(spec.noise);
    spec.lexicon_size = a.lexicon_size.unwrap_or(spec.lexicon_size);
    spec.dev_fraction = a.dev_fraction.unwrap_or(spec.dev_fraction);
    spec.test_fraction = a.test_fraction.unwrap_or(spec.test_fraction);
    let corpus = synth_corpus(&spec)?;
    write(&a.out, &corpus.to_jsonl())?;
    println!("{:<8} {:>6} {:>6} {:>6}", "group", "train", "dev", "test");
    for g in corpus.group_names() {
        let n = |s| corpus.group_split_indices(g, s).len();
        println!("{g:<8} {:>6} {:>6} {:>6}", n(Split::Train), n(Split::Dev), n(Split::Test));
    }
    println!("wrote {} examples to {}", corpus.len(), a.out.display());
    Ok(())
}

fn cmd_train(a: TrainCmd) -> Result<(), Error> {
    let corpus = a.corpus.load()?;
    let model_cfg = a.model.config(a.train.seed);
    let result = train(&corpus, &model_cfg, &a.train.config(a.model.mode))?;
    fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    checkpoint::save(&result.model, a.out.join("model.ckpt"))?;
    write(&a.out.join("train_log.jsonl"), &result.log_lines())?;
    println!(
        "best epoch {} dev accuracy {:.4}; wrote {}",
        result.best_epoch,
        result.dev_accuracy[result.best_epoch - 1],
        a.out.display()
    );
    Ok(())
}

fn load_with_model(corpus: &Path, ckpt: &Path) -> Result<(SenseModel, GroupedCorpus), Error> {
    let model = checkpoint::load(ckpt)?;
    let corpus = load_corpus(corpus, model.classes())?;
    Ok((model, corpus))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let (model, corpus) = load_with_model(&a.corpus, &a.checkpoint)?;
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Dev => Split::Dev,
        SplitArg::Test => Split::Test,
    };
    let acc = accuracy(&model, &corpus, split)?;
    let obj = serde_json::json!({
        "split": split,
        "count": corpus.split_indices(split).len(),
        "accuracy": acc,
    });
    let line = obj.to_string() + "\n";
    if let Some(out) = &a.out {
        write(out, &line)?;
    }
    print!("{line}");
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<(), Error> {
    let (model, corpus) = load_with_model(&a.corpus, &a.checkpoint)?;
    let preds = predict_test(&model, &corpus)?;
    let report = BiasReport::build(&corpus, &preds, &a.audit.config())?;
    write(&a.out, &report.to_json_line())?;
    if let Some(svg) = &a.svg {
        let bars: Vec<(String, f64)> = report.groups.iter().map(|g| (g.name.clone(), g.accuracy)).collect();
        write(svg, &plot::bar_chart("test accuracy per target group", &bars))?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn read_report(path: &Path) -> Result<BiasReport, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    BiasReport::from_json(&text)
}

fn cmd_compare(a: CompareArgs) -> Result<(), Error> {
    let cmp = compare_reports(&read_report(&a.baseline)?, &read_report(&a.method)?)?;
    write(&a.out, &cmp.to_json_line())?;
    print!("{}", cmp.render_table());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), Error> {
    let model = checkpoint::load(&a.checkpoint)?;
    let seq = model.encode_text(&a.text);
    let pred = model.forward(&seq)?;
    let classes = model.classes();
    let tokens: Vec<&str> = seq
        .ids()
        .iter()
        .map(|&id| model.vocab().token(id).unwrap_or("<unk>"))
        .collect();
    let (senses, sense_probs) = match &pred.assignment {
        Some(a) => (
            Some(a.senses.iter().map(|&s| classes.name(s)).collect::<Vec<_>>()),
            Some((0..a.distributions.rows()).map(|i| a.distributions.row(i).to_vec()).collect::<Vec<_>>()),
        ),
        None => (None, None),
    };
    let obj = serde_json::json!({
        "text": a.text,
        "tokens": tokens,
        "label": classes.name(pred.predicted),
        "probabilities": pred.probabilities(),
        "classes": classes.names(),
        "senses": senses,
        "sense_probabilities": sense_probs,
    });
    let line = obj.to_string() + "\n";
    if let Some(out) = &a.out {
        write(out, &line)?;
    }
    print!("{line}");
    Ok(())
}

fn cmd_subset(a: SubsetArgs) -> Result<(), Error> {
    let corpus = a.corpus.load()?;
    let model_cfg = a.model.config(a.train.seed);
    let points = subset_experiment(
        &corpus,
        &a.group,
        &a.sizes,
        &model_cfg,
        &a.train.config(a.model.mode),
        a.min_test_count,
    )?;
    let json = serde_json::to_string_pretty(&points)? + "\n";
    write(&a.out.join("subset.json"), &json)?;
    let curve: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.accuracy_of(&a.group).map(|acc| (p.size as f64, acc)))
        .collect();
    write(
        &a.out.join("subset.svg"),
        &plot::line_chart(
            &format!("test accuracy on group {}", a.group),
            "training examples of the group",
            &[(a.group.clone(), curve.clone())],
        ),
    )?;
    for (size, acc) in curve {
        println!("{size:>6} {acc:.4}");
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), Error> {
    let mut spec = ExperimentSpec::desk_scale(a.seeds.clone());
    if let Some(path) = &a.corpus {
        spec.corpus = CorpusSource::Path {
            path: path.clone(),
            classes: ClassSet::parse(&a.classes)?,
        };
    }
    spec.out_dir = Some(a.out.clone());
    let summary = run_dispersion_experiment(&spec)?;
    print!("{}", summary.render());
    if !a.curve_sizes.is_empty() {
        let curve = run_fig3_curve(&spec, &a.curve_group, &a.curve_sizes)?;
        println!(
            "curve {}: median {:?}; nearly non-decreasing: {}",
            curve.group,
            curve.median,
            curve.nearly_monotone()
        );
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Subset(a) => cmd_subset(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
