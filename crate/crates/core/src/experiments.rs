//! End-to-end experiment recipes: baseline against sense model over several
//! seeds, and the per-group data-volume curve.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{compare_reports, AuditConfig, BiasReport, Comparison};
use crate::classes::ClassSet;
use crate::corpus::{load_corpus, GroupedCorpus};
use crate::encoder::EncoderConfig;
use crate::error::{io_err, Error, Result};
use crate::objectives::LossWeights;
use crate::plot;
use crate::sense::{ModelConfig, ModelMode};
use crate::synth::{synth_corpus, SynthSpec};
use crate::training::{predict_test, subset_experiment, train, TrainConfig};

/// Largest tolerated drop (or gain) in overall test accuracy.
pub const OVERALL_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusSource {
    Synth(SynthSpec),
    Path { path: PathBuf, classes: ClassSet },
}

impl CorpusSource {
    pub fn load(&self) -> Result<GroupedCorpus> {
        match self {
            CorpusSource::Synth(spec) => synth_corpus(spec),
            CorpusSource::Path { path, classes } => load_corpus(path, classes),
        }
    }
}

/// One arm of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub model: ModelConfig,
    pub weights: LossWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub corpus: CorpusSource,
    pub baseline: ArmConfig,
    pub method: ArmConfig,
    /// The seed of `train` is replaced by each of these in turn; it also
    /// seeds parameter initialization.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub audit: AuditConfig,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Small configuration for the skewed synthetic benchmark.
    pub fn desk_scale(seeds: Vec<u64>) -> Self {
        let mut enc = EncoderConfig::new(0);
        enc.d_model = 16;
        enc.n_heads = 2;
        enc.n_layers = 1;
        enc.d_ff = 32;
        enc.max_len = 16;
        let mut sense = ModelConfig::new(enc.clone(), ModelMode::Sense);
        sense.temperature = 0.3;
        let base = ModelConfig::new(enc, ModelMode::Baseline);
        // A short budget: both arms reach the same ceiling on this corpus
        // when trained to convergence.
        let train = TrainConfig {
            epochs: 2,
            batch_size: 8,
            adam: crate::training::AdamConfig {
                learning_rate: 1e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        Self {
            corpus: CorpusSource::Synth(SynthSpec::desk_benchmark(0)),
            baseline: ArmConfig {
                model: base,
                weights: LossWeights::cls_only(),
            },
            method: ArmConfig {
                model: sense,
                weights: LossWeights {
                    consensus: 1.0,
                    ..LossWeights::default()
                },
            },
            train,
            seeds,
            audit: AuditConfig::default(),
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        for arm in [&self.baseline, &self.method] {
            // The vocabulary size is only known once the corpus is loaded.
            let mut model = arm.model.clone();
            model.encoder.vocab_size = model.encoder.vocab_size.max(2);
            model.validate()?;
        }
        self.baseline.weights.validate()?;
        self.method.weights.validate()?;
        self.train.validate()
    }

    fn seeded(&self, arm: &ArmConfig, seed: u64) -> (ModelConfig, TrainConfig) {
        let mut model = arm.model.clone();
        model.encoder.seed = seed;
        let mut train = self.train.clone();
        train.seed = seed;
        train.weights = arm.weights;
        train.checkpoint = None;
        (model, train)
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianDeltas {
    pub overall: f64,
    pub average: f64,
    pub dispersion: f64,
    pub min_accuracy: f64,
    pub groups: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub dispersion_reduced: bool,
    pub average_improved: bool,
    pub overall_within_tolerance: bool,
}

impl Flags {
    pub fn all(&self) -> bool {
        self.dispersion_reduced && self.average_improved && self.overall_within_tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub baseline: BiasReport,
    pub method: BiasReport,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub runs: Vec<SeedRun>,
    /// Medians over seeds of the paired (method − baseline) deltas.
    pub median: MedianDeltas,
    pub flags: Flags,
}

impl ExperimentSummary {
    pub fn from_runs(runs: Vec<SeedRun>) -> Self {
        let median = median_deltas(&runs);
        let flags = flags_of(&median);
        Self { runs, median, flags }
    }

    /// Flags recomputed from the stored per-seed reports.
    pub fn recompute_flags(&self) -> Result<Flags> {
        let runs = self
            .runs
            .iter()
            .map(|r| {
                Ok(SeedRun {
                    comparison: compare_reports(&r.baseline, &r.method)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(flags_of(&median_deltas(&runs)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }

    pub fn render(&self) -> String {
        let m = &self.median;
        let mut out = format!("seeds: {}\n", self.runs.len());
        for (g, d) in &m.groups {
            out += &format!("  median delta {g:<12} {d:+.4}\n");
        }
        out += &format!(
            "median delta overall {:+.4}, average {:+.4}, dispersion {:+.4}, worst group {:+.4}\n",
            m.overall, m.average, m.dispersion, m.min_accuracy
        );
        out += &format!(
            "dispersion reduced: {}; average improved: {}; overall within {OVERALL_TOLERANCE}: {}\n",
            self.flags.dispersion_reduced, self.flags.average_improved, self.flags.overall_within_tolerance
        );
        out
    }
}

fn median_deltas(runs: &[SeedRun]) -> MedianDeltas {
    let col = |f: &dyn Fn(&Comparison) -> f64| median(&runs.iter().map(|r| f(&r.comparison)).collect::<Vec<_>>());
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in runs {
        for g in &r.comparison.groups {
            groups.entry(g.group.clone()).or_default().push(g.delta.delta);
        }
    }
    MedianDeltas {
        overall: col(&|c| c.overall.delta),
        average: col(&|c| c.average.delta),
        dispersion: col(&|c| c.dispersion.delta),
        min_accuracy: col(&|c| c.min_accuracy.delta),
        groups: groups.into_iter().map(|(g, v)| (g, median(&v))).collect(),
    }
}

fn flags_of(m: &MedianDeltas) -> Flags {
    Flags {
        dispersion_reduced: m.dispersion < 0.0,
        average_improved: m.average > 0.0,
        overall_within_tolerance: m.overall.abs() <= OVERALL_TOLERANCE,
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn wrap(seed: u64, mode: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::Run {
        seed,
        mode: mode.to_string(),
        source: Box::new(e),
    }
}

/// Trains one arm on `corpus` and audits its test predictions.
pub fn run_arm(
    corpus: &GroupedCorpus,
    spec: &ExperimentSpec,
    arm: &ArmConfig,
    seed: u64,
) -> Result<BiasReport> {
    let (model, train_cfg) = spec.seeded(arm, seed);
    let result = train(corpus, &model, &train_cfg)?;
    let preds = predict_test(&result.model, corpus)?;
    BiasReport::build(corpus, &preds, &spec.audit)
}

/// Trains and audits both arms for every seed on the same corpus and
/// summarizes the median deltas.
pub fn run_dispersion_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    spec.validate()?;
    let corpus = spec.corpus.load()?;
    let mut runs = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let baseline = run_arm(&corpus, spec, &spec.baseline, seed).map_err(wrap(seed, "baseline"))?;
        let method = run_arm(&corpus, spec, &spec.method, seed).map_err(wrap(seed, "method"))?;
        let comparison = compare_reports(&baseline, &method)?;
        runs.push(SeedRun {
            seed,
            baseline,
            method,
            comparison,
        });
    }
    let summary = ExperimentSummary::from_runs(runs);
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for r in &summary.runs {
            write(&dir.join(format!("report_seed{}_baseline.json", r.seed)), &r.baseline.to_json_line())?;
            write(&dir.join(format!("report_seed{}_method.json", r.seed)), &r.method.to_json_line())?;
        }
        write(&dir.join("summary.json"), &summary.to_json())?;
        let bars: Vec<(String, f64)> = summary
            .median
            .groups
            .iter()
            .map(|(g, d)| (g.clone(), (0.5 + d).clamp(0.0, 1.0)))
            .collect();
        write(
            &dir.join("median_group_delta.svg"),
            &plot::bar_chart("median per-group accuracy delta (0.5 = no change)", &bars),
        )?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveArtifact {
    pub group: String,
    pub sizes: Vec<usize>,
    /// `per_seed[s][i]` is the group's test accuracy at `sizes[i]`.
    pub per_seed: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
    pub median: Vec<f64>,
}

impl CurveArtifact {
    /// Non-decreasing once at most one interior point is ignored.
    pub fn nearly_monotone(&self) -> bool {
        let m = &self.median;
        let sorted_without = |skip: Option<usize>| {
            let kept: Vec<f64> = m
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, v)| *v)
                .collect();
            kept.windows(2).all(|w| w[1] >= w[0])
        };
        sorted_without(None) || (1..m.len().saturating_sub(1)).any(|i| sorted_without(Some(i)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes") + "\n"
    }

    pub fn to_svg(&self) -> String {
        let xs: Vec<f64> = self.sizes.iter().map(|&s| s as f64).collect();
        let mut series: Vec<(String, Vec<(f64, f64)>)> = self
            .per_seed
            .iter()
            .zip(&self.seeds)
            .map(|(acc, s)| (format!("seed {s}"), xs.iter().copied().zip(acc.iter().copied()).collect()))
            .collect();
        series.insert(0, ("median".into(), xs.iter().copied().zip(self.median.iter().copied()).collect()));
        plot::line_chart(
            &format!("test accuracy on group {}", self.group),
            "training examples of the group",
            &series,
        )
    }
}

/// Group accuracy against the group's training volume, per seed, using the
/// baseline arm.
pub fn run_fig3_curve(spec: &ExperimentSpec, group: &str, sizes: &[usize]) -> Result<CurveArtifact> {
    spec.validate()?;
    let corpus = spec.corpus.load()?;
    let mut per_seed = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let (model, train_cfg) = spec.seeded(&spec.baseline, seed);
        let points = subset_experiment(&corpus, group, sizes, &model, &train_cfg, spec.audit.min_test_count)
            .map_err(wrap(seed, "baseline"))?;
        let acc = points
            .iter()
            .map(|p| {
                p.accuracy_of(group).ok_or_else(|| {
                    Error::Config(format!(
                        "group {group:?} has fewer than {} test examples",
                        spec.audit.min_test_count
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        per_seed.push(acc);
    }
    let median = (0..sizes.len())
        .map(|i| median(&per_seed.iter().map(|s| s[i]).collect::<Vec<_>>()))
        .collect();
    let curve = CurveArtifact {
        group: group.to_string(),
        sizes: sizes.to_vec(),
        per_seed,
        seeds: spec.seeds.clone(),
        median,
    };
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write(&dir.join("curve.json"), &curve.to_json())?;
        write(&dir.join("curve.svg"), &curve.to_svg())?;
    }
    Ok(curve)
}
