//! Per-target-group bias audit.
//!
//! A [`BiasReport`] lists per-group test accuracy together with the
//! unweighted average across groups and the group dispersion, the sample
//! standard deviation (n - 1 denominator) of those accuracies. Results tables
//! in the literature sometimes label the dispersion "Performance Variance";
//! the numbers are standard deviations.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{GroupedCorpus, Split};
use crate::error::{Error, Result};
use crate::text::{rank_by_frequency, tokenize};

pub const DEFAULT_MIN_TEST_COUNT: usize = 25;
pub const DEFAULT_OVERLAP_K: usize = 100;
pub const DEFAULT_STOPWORDS: usize = 20;
pub const DISPERSION_NOTE: &str =
    "group dispersion = sample standard deviation of per-group accuracy (reported as \"Performance Variance\" in results tables)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub group: String,
    pub accuracy: f64,
    pub correct: usize,
    pub count: usize,
}

/// Accuracy per group over the test split. `predictions[i]` is the predicted
/// class of the `i`-th test example in corpus order. An example counts
/// toward every group it is annotated with; groups with fewer than
/// `min_test_count` test examples are left out.
pub fn per_group_accuracy(
    predictions: &[usize],
    corpus: &GroupedCorpus,
    min_test_count: usize,
) -> Result<Vec<GroupAccuracy>> {
    let test = corpus.split_indices(Split::Test);
    if predictions.len() != test.len() {
        return Err(Error::MissingPredictions {
            expected: test.len(),
            actual: predictions.len(),
        });
    }
    let pred_of: HashMap<usize, usize> = test.iter().copied().zip(predictions.iter().copied()).collect();
    let mut out = Vec::new();
    for group in corpus.group_names() {
        let idx = corpus.group_split_indices(group, Split::Test);
        if idx.is_empty() || idx.len() < min_test_count {
            continue;
        }
        let correct = idx.iter().filter(|&&i| pred_of[&i] == corpus.label(i)).count();
        out.push(GroupAccuracy {
            group: group.to_string(),
            accuracy: correct as f64 / idx.len() as f64,
            correct,
            count: idx.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub average: f64,
    pub dispersion: f64,
    pub min_group: String,
    pub min_accuracy: f64,
}

/// Unweighted mean, sample standard deviation and the worst group
/// (lexicographically smallest name among ties). A single group has zero
/// dispersion.
pub fn aggregate<S: AsRef<str>>(groups: &[(S, f64)]) -> Result<Aggregate> {
    if groups.is_empty() {
        return Err(Error::NoGroups);
    }
    let n = groups.len() as f64;
    // Shifted by the first value so identical inputs give exactly zero spread.
    let first = groups[0].1;
    let average = first + groups.iter().map(|(_, a)| a - first).sum::<f64>() / n;
    let dispersion = if groups.len() < 2 {
        0.0
    } else {
        (groups.iter().map(|(_, a)| (a - average).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let (min_group, min_accuracy) = groups
        .iter()
        .map(|(g, a)| (g.as_ref(), *a))
        .min_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(y.0)))
        .unwrap();
    Ok(Aggregate {
        average,
        dispersion,
        min_group: min_group.to_string(),
        min_accuracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapConfig {
    /// Number of top tokens compared.
    pub k: usize,
    /// The most frequent tokens of the whole train split are dropped first.
    pub stopwords: usize,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_OVERLAP_K,
            stopwords: DEFAULT_STOPWORDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStat {
    pub group: String,
    /// Effective K: the requested K, shrunk to the group's distinct tokens.
    pub k: usize,
    pub shared: usize,
    pub fraction: f64,
}

fn counts_over(corpus: &GroupedCorpus, indices: impl Iterator<Item = usize>, skip: &HashSet<String>) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for i in indices {
        for tok in tokenize(&corpus.examples()[i].text) {
            if !skip.contains(&tok) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Corpus-wide stopwords: the `n` most frequent train tokens.
pub fn stopwords(corpus: &GroupedCorpus, n: usize) -> HashSet<String> {
    let counts = counts_over(corpus, corpus.split_indices(Split::Train).into_iter(), &HashSet::new());
    rank_by_frequency(counts).into_iter().take(n).map(|(t, _)| t).collect()
}

/// Fraction of `group`'s top-K train tokens that are also among the top-K
/// tokens of all other train examples.
pub fn word_overlap(corpus: &GroupedCorpus, group: &str, config: &OverlapConfig) -> Result<OverlapStat> {
    let stop = stopwords(corpus, config.stopwords);
    word_overlap_with(corpus, group, config.k, &stop)
}

fn word_overlap_with(corpus: &GroupedCorpus, group: &str, k: usize, stop: &HashSet<String>) -> Result<OverlapStat> {
    if k == 0 {
        return Err(Error::Config("overlap K must be positive".into()));
    }
    let own: HashSet<usize> = corpus.group_split_indices(group, Split::Train).into_iter().collect();
    if own.is_empty() {
        return Err(Error::EmptyGroup(group.to_string()));
    }
    let train = corpus.split_indices(Split::Train);
    let mine = rank_by_frequency(counts_over(corpus, train.iter().copied().filter(|i| own.contains(i)), stop));
    let rest = rank_by_frequency(counts_over(corpus, train.iter().copied().filter(|i| !own.contains(i)), stop));
    let k_eff = k.min(mine.len());
    let top_rest: HashSet<&str> = rest.iter().take(k_eff).map(|(t, _)| t.as_str()).collect();
    let shared = mine
        .iter()
        .take(k_eff)
        .filter(|(t, _)| top_rest.contains(t.as_str()))
        .count();
    Ok(OverlapStat {
        group: group.to_string(),
        k: k_eff,
        shared,
        fraction: if k_eff == 0 { 0.0 } else { shared as f64 / k_eff as f64 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub min_test_count: usize,
    pub overlap: OverlapConfig,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            min_test_count: DEFAULT_MIN_TEST_COUNT,
            overlap: OverlapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub name: String,
    pub test_count: usize,
    /// Train examples annotated with the group (multi-group examples count
    /// toward each of their groups).
    pub train_count: usize,
    /// Train examples annotated with this group only.
    pub train_count_exclusive: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub word_overlap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub groups: Vec<GroupRow>,
    pub overall_accuracy: f64,
    pub test_count: usize,
    pub average: f64,
    pub dispersion: f64,
    pub min_group: String,
    pub min_accuracy: f64,
    pub min_test_count: usize,
    pub overlap_k: usize,
    pub note: String,
}

impl BiasReport {
    /// Audits test-split predictions (corpus order) against `corpus`.
    pub fn build(corpus: &GroupedCorpus, predictions: &[usize], config: &AuditConfig) -> Result<Self> {
        let accs = per_group_accuracy(predictions, corpus, config.min_test_count)?;
        let test = corpus.split_indices(Split::Test);
        let correct = test
            .iter()
            .zip(predictions)
            .filter(|(&i, &p)| corpus.label(i) == p)
            .count();
        let overall = correct as f64 / test.len().max(1) as f64;
        let train_counts = corpus.group_counts(Split::Train);
        let exclusive = corpus.exclusive_group_counts(Split::Train);
        let stop = stopwords(corpus, config.overlap.stopwords);
        let mut rows = Vec::with_capacity(accs.len());
        for a in &accs {
            let overlap = match word_overlap_with(corpus, &a.group, config.overlap.k, &stop) {
                Ok(s) => Some(s.fraction),
                Err(Error::EmptyGroup(_)) => None,
                Err(e) => return Err(e),
            };
            rows.push(GroupRow {
                name: a.group.clone(),
                test_count: a.count,
                train_count: train_counts.get(&a.group).copied().unwrap_or(0),
                train_count_exclusive: exclusive.get(&a.group).copied().unwrap_or(0),
                correct: a.correct,
                accuracy: a.accuracy,
                word_overlap: overlap,
            });
        }
        Self::from_rows(rows, overall, test.len(), config)
    }

    /// A report from published accuracy columns alone (counts left at zero).
    pub fn from_accuracies<S: AsRef<str>>(groups: &[(S, f64)], overall_accuracy: f64) -> Result<Self> {
        let rows = groups
            .iter()
            .map(|(g, a)| GroupRow {
                name: g.as_ref().to_string(),
                test_count: 0,
                train_count: 0,
                train_count_exclusive: 0,
                correct: 0,
                accuracy: *a,
                word_overlap: None,
            })
            .collect();
        Self::from_rows(rows, overall_accuracy, 0, &AuditConfig::default())
    }

    fn from_rows(rows: Vec<GroupRow>, overall: f64, test_count: usize, config: &AuditConfig) -> Result<Self> {
        let pairs: Vec<(&str, f64)> = rows.iter().map(|r| (r.name.as_str(), r.accuracy)).collect();
        let agg = aggregate(&pairs)?;
        Ok(Self {
            groups: rows,
            overall_accuracy: overall,
            test_count,
            average: agg.average,
            dispersion: agg.dispersion,
            min_group: agg.min_group,
            min_accuracy: agg.min_accuracy,
            min_test_count: config.min_test_count,
            overlap_k: config.overlap.k,
            note: DISPERSION_NOTE.to_string(),
        })
    }

    pub fn accuracy_of(&self, group: &str) -> Option<f64> {
        self.groups.iter().find(|g| g.name == group).map(|g| g.accuracy)
    }

    /// Single-line JSON object followed by a newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text.trim())?)
    }

    pub fn render_table(&self) -> String {
        let width = self.groups.iter().map(|g| g.name.len()).max().unwrap_or(5).max(24);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>7}  {:>8}",
            "Target group", "train", "test", "overlap", "accuracy"
        );
        for g in &self.groups {
            let overlap = g.word_overlap.map_or("-".to_string(), |o| format!("{o:.2}"));
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>6}  {:>7}  {:>8.4}",
                g.name, g.train_count, g.test_count, overlap, g.accuracy
            );
        }
        let _ = writeln!(out, "{:<width$}  {:>34.4}", "Test accuracy (overall)", self.overall_accuracy);
        let _ = writeln!(out, "{:<width$}  {:>34.4}", "Average (across groups)", self.average);
        let _ = writeln!(out, "{:<width$}  {:>34.4}", "Group dispersion", self.dispersion);
        let _ = writeln!(out, "{:<width$}  {:>34}", "Worst group", format!("{} ({:.4})", self.min_group, self.min_accuracy));
        let _ = writeln!(out, "note: {}", self.note);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub baseline: f64,
    pub method: f64,
    pub delta: f64,
}

impl Delta {
    fn of(baseline: f64, method: f64) -> Self {
        Self {
            baseline,
            method,
            delta: method - baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDelta {
    pub group: String,
    #[serde(flatten)]
    pub delta: Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub groups: Vec<GroupDelta>,
    pub overall: Delta,
    pub average: Delta,
    pub dispersion: Delta,
    pub min_accuracy: Delta,
    pub baseline_min_group: String,
    pub method_min_group: String,
    pub improves_average: bool,
    pub reduces_dispersion: bool,
}

impl Comparison {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("comparison serializes") + "\n"
    }

    pub fn render_table(&self) -> String {
        let width = self.groups.iter().map(|g| g.group.len()).max().unwrap_or(5).max(24);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>8}", "Target group", "baseline", "method", "delta");
        let mut line = |name: &str, d: &Delta| {
            let _ = writeln!(out, "{:<width$}  {:>8.4}  {:>8.4}  {:>+8.4}", name, d.baseline, d.method, d.delta);
        };
        for g in &self.groups {
            line(&g.group, &g.delta);
        }
        line("Test accuracy (overall)", &self.overall);
        line("Average (across groups)", &self.average);
        line("Group dispersion", &self.dispersion);
        line("Worst-group accuracy", &self.min_accuracy);
        let _ = writeln!(
            out,
            "worst group: {} -> {}; improves average: {}; reduces dispersion: {}",
            self.baseline_min_group, self.method_min_group, self.improves_average, self.reduces_dispersion
        );
        out
    }
}

/// Per-group and aggregate deltas (method − baseline). Both reports must
/// cover the same groups.
pub fn compare_reports(baseline: &BiasReport, method: &BiasReport) -> Result<Comparison> {
    let b: BTreeMap<&str, f64> = baseline.groups.iter().map(|g| (g.name.as_str(), g.accuracy)).collect();
    let m: BTreeMap<&str, f64> = method.groups.iter().map(|g| (g.name.as_str(), g.accuracy)).collect();
    if b.keys().ne(m.keys()) {
        let only_b: Vec<_> = b.keys().filter(|k| !m.contains_key(*k)).collect();
        let only_m: Vec<_> = m.keys().filter(|k| !b.contains_key(*k)).collect();
        return Err(Error::GroupMismatch(format!(
            "baseline only {only_b:?}, method only {only_m:?}"
        )));
    }
    let groups = baseline
        .groups
        .iter()
        .map(|g| GroupDelta {
            group: g.name.clone(),
            delta: Delta::of(g.accuracy, m[g.name.as_str()]),
        })
        .collect();
    Ok(Comparison {
        groups,
        overall: Delta::of(baseline.overall_accuracy, method.overall_accuracy),
        average: Delta::of(baseline.average, method.average),
        dispersion: Delta::of(baseline.dispersion, method.dispersion),
        min_accuracy: Delta::of(baseline.min_accuracy, method.min_accuracy),
        baseline_min_group: baseline.min_group.clone(),
        method_min_group: method.min_group.clone(),
        improves_average: method.average > baseline.average,
        reduces_dispersion: method.dispersion < baseline.dispersion,
    })
}
