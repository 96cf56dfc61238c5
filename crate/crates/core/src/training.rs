//! Deterministic mini-batch training with Adam, evaluation helpers and the
//! per-group training-volume (subset) experiment.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{per_group_accuracy, GroupAccuracy};
use crate::checkpoint;
use crate::corpus::{GroupedCorpus, Split};
use crate::encoder::Dropout;
use crate::error::{Error, Result};
use crate::objectives::{total_loss, LossBreakdown, LossWeights};
use crate::params::ParamStore;
use crate::sense::{ModelConfig, SenseModel};
use crate::tensor::{Tape, Tensor};
use crate::text::{build_vocabulary_with, tokenize, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction; one moment buffer pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros = || store.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor]) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for (k, (param, grad)) in store.tensors_mut().iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, (p, g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub weights: LossWeights,
    /// Stop after this many epochs without a dev-accuracy improvement.
    pub patience: Option<usize>,
    /// Upper bound on vocabulary size, reserved tokens included.
    pub max_vocab: usize,
    /// Where to write the best-dev checkpoint, if anywhere.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            adam: AdamConfig::default(),
            seed: 0,
            weights: LossWeights::default(),
            patience: None,
            max_vocab: 5000,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.max_vocab < 2 {
            return Err(Error::Config(
                "epochs, batch_size and max_vocab must be positive".into(),
            ));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        self.weights.validate()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub cls: f64,
    pub consensus: f64,
    pub unique: f64,
    pub total: f64,
    pub dev_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// The model restored to its best-dev-accuracy parameters.
    pub model: SenseModel,
    pub history: Vec<LossBreakdown>,
    pub dev_accuracy: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainResult {
    pub fn records(&self) -> Vec<EpochRecord> {
        self.history
            .iter()
            .zip(&self.dev_accuracy)
            .enumerate()
            .map(|(i, (l, &dev))| EpochRecord {
                epoch: i + 1,
                cls: l.cls,
                consensus: l.consensus,
                unique: l.unique,
                total: l.total,
                dev_accuracy: dev,
            })
            .collect()
    }

    /// Machine-readable log, one JSON object per epoch.
    pub fn log_lines(&self) -> String {
        self.records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

/// Builds the vocabulary from the corpus train split (class-name tokens
/// always included) and initializes a model for it.
pub fn prepare_model(
    corpus: &GroupedCorpus,
    config: &ModelConfig,
    max_vocab: usize,
) -> Result<SenseModel> {
    let required: Vec<String> = corpus
        .classes()
        .names()
        .iter()
        .flat_map(|n| tokenize(n))
        .collect();
    let vocab = build_vocabulary_with(corpus, max_vocab, &required)?;
    let mut config = config.clone();
    config.encoder.vocab_size = vocab.len();
    SenseModel::new(config, corpus.classes().clone(), vocab)
}

fn encode_split(model: &SenseModel, corpus: &GroupedCorpus, indices: &[usize]) -> Vec<(TokenSequence, usize)> {
    indices
        .iter()
        .map(|&i| (model.encode_text(&corpus.examples()[i].text), corpus.label(i)))
        .collect()
}

/// Predicted class per example at `indices`.
pub fn predict_indices(model: &SenseModel, corpus: &GroupedCorpus, indices: &[usize]) -> Result<Vec<usize>> {
    indices
        .iter()
        .map(|&i| Ok(model.predict_text(&corpus.examples()[i].text)?.predicted))
        .collect()
}

/// Predictions for the whole test split, in corpus order.
pub fn predict_test(model: &SenseModel, corpus: &GroupedCorpus) -> Result<Vec<usize>> {
    predict_indices(model, corpus, &corpus.split_indices(Split::Test))
}

pub fn accuracy(model: &SenseModel, corpus: &GroupedCorpus, split: Split) -> Result<f64> {
    let idx = corpus.split_indices(split);
    if idx.is_empty() {
        return Err(Error::EmptySplit(split));
    }
    let preds = predict_indices(model, corpus, &idx)?;
    let correct = idx
        .iter()
        .zip(&preds)
        .filter(|(&i, &p)| corpus.label(i) == p)
        .count();
    Ok(correct as f64 / idx.len() as f64)
}

/// Builds a fresh model from the corpus and trains it.
pub fn train(corpus: &GroupedCorpus, model: &ModelConfig, config: &TrainConfig) -> Result<TrainResult> {
    config.validate()?;
    let model = prepare_model(corpus, model, config.max_vocab)?;
    train_model(model, corpus, config)
}

/// Trains `model` on the corpus train split, selecting the parameters with
/// the best dev accuracy (earliest epoch on ties).
pub fn train_model(mut model: SenseModel, corpus: &GroupedCorpus, config: &TrainConfig) -> Result<TrainResult> {
    config.validate()?;
    let train_idx = corpus.split_indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::EmptySplit(Split::Train));
    }
    if corpus.split_indices(Split::Dev).is_empty() {
        return Err(Error::EmptySplit(Split::Dev));
    }
    let data: Vec<(TokenSequence, usize)> = encode_split(&model, corpus, &train_idx)
        .into_iter()
        .filter(|(seq, _)| !seq.is_empty())
        .collect();
    if data.is_empty() {
        return Err(Error::EmptySplit(Split::Train));
    }
    let mask = model.classes().hateful_mask().to_vec();
    let dropout_rate = model.config().encoder.dropout_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = Adam::new(config.adam, model.params());

    let mut history = Vec::new();
    let mut dev_history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_terms = Vec::with_capacity(data.len());
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let bound = model.params().bind(&mut tape);
            let mut losses = Vec::with_capacity(batch.len());
            for &j in batch {
                let (seq, label) = &data[j];
                let mut dropout = Dropout {
                    rate: dropout_rate,
                    rng: &mut dropout_rng,
                };
                let dropout = (dropout_rate > 0.0).then_some(&mut dropout);
                let trace = model.forward_on_tape(&mut tape, &bound, seq, dropout)?;
                let (loss, terms) = total_loss(
                    &mut tape,
                    trace.logits,
                    trace.distributions,
                    *label,
                    &mask,
                    &config.weights,
                )?;
                if !terms.is_finite() {
                    return Err(Error::Diverged { epoch, what: "loss" });
                }
                losses.push(loss);
                epoch_terms.push(terms);
            }
            let mut sum = losses[0];
            for &l in &losses[1..] {
                sum = tape.add(sum, l)?;
            }
            let mean = tape.scale(sum, 1.0 / losses.len() as f64)?;
            tape.backward(mean)?;
            let grads = model.params().grads(&tape, &bound);
            if !grads.iter().all(Tensor::is_finite) {
                return Err(Error::Diverged {
                    epoch,
                    what: "gradient",
                });
            }
            adam.step(model.params_mut(), &grads);
        }
        if !model.params().all_finite() {
            return Err(Error::Diverged {
                epoch,
                what: "parameter",
            });
        }
        history.push(LossBreakdown::mean(&epoch_terms));
        let dev = accuracy(&model, corpus, Split::Dev)?;
        dev_history.push(dev);
        if best.as_ref().is_none_or(|(acc, _, _)| dev > *acc) {
            best = Some((dev, epoch, model.params().clone()));
        }
        if let (Some(patience), Some((_, best_epoch, _))) = (config.patience, &best) {
            if epoch - best_epoch >= patience {
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.set_params(params)?;
    if let Some(path) = &config.checkpoint {
        checkpoint::save(&model, path)?;
    }
    Ok(TrainResult {
        model,
        history,
        dev_accuracy: dev_history,
        best_epoch,
    })
}

/// One point of the subset curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetPoint {
    pub size: usize,
    pub groups: Vec<GroupAccuracy>,
}

impl SubsetPoint {
    pub fn accuracy_of(&self, group: &str) -> Option<f64> {
        self.groups.iter().find(|g| g.group == group).map(|g| g.accuracy)
    }
}

/// Train-split positions kept when `group` is cut down to `size` training
/// examples: every train example not annotated with `group`, plus a seeded
/// sample of `size` of the group's own. Returned in corpus order.
pub fn subset_train_indices(corpus: &GroupedCorpus, group: &str, size: usize, seed: u64) -> Result<Vec<usize>> {
    let own = corpus.group_split_indices(group, Split::Train);
    if size > own.len() {
        return Err(Error::SubsetTooLarge {
            group: group.to_string(),
            size,
            available: own.len(),
        });
    }
    let mut shuffled = own.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep: Vec<usize> = shuffled[..size].to_vec();
    keep.extend(
        corpus
            .split_indices(Split::Train)
            .into_iter()
            .filter(|i| !own.contains(i)),
    );
    keep.sort_unstable();
    Ok(keep)
}

/// Retrains from scratch for each size, keeping all other data fixed, and
/// reports per-group test accuracy (groups with fewer than `min_test_count`
/// test examples omitted).
pub fn subset_experiment(
    corpus: &GroupedCorpus,
    group: &str,
    sizes: &[usize],
    model: &ModelConfig,
    config: &TrainConfig,
    min_test_count: usize,
) -> Result<Vec<SubsetPoint>> {
    if sizes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::SubsetOrder);
    }
    let available = corpus.group_split_indices(group, Split::Train).len();
    if let Some(&too_big) = sizes.iter().find(|&&s| s > available) {
        return Err(Error::SubsetTooLarge {
            group: group.to_string(),
            size: too_big,
            available,
        });
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let sub = subset_corpus(corpus, group, size, config.seed)?;
        let result = train(&sub, model, config)?;
        let preds = predict_test(&result.model, &sub)?;
        let groups = per_group_accuracy(&preds, &sub, min_test_count)?;
        points.push(SubsetPoint { size, groups });
    }
    Ok(points)
}

/// The corpus with `group`'s training data cut to `size`; dev and test are
/// untouched.
pub fn subset_corpus(corpus: &GroupedCorpus, group: &str, size: usize, seed: u64) -> Result<GroupedCorpus> {
    let mut keep = subset_train_indices(corpus, group, size, seed)?;
    keep.extend(corpus.split_indices(Split::Dev));
    keep.extend(corpus.split_indices(Split::Test));
    keep.sort_unstable();
    Ok(corpus.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sense::ModelMode;
    use crate::synth::{synth_corpus, SynthSpec};
    use crate::encoder::EncoderConfig;

    fn tiny_config(mode: ModelMode) -> ModelConfig {
        let mut enc = EncoderConfig::new(0);
        enc.d_model = 8;
        enc.n_heads = 2;
        enc.n_layers = 1;
        enc.d_ff = 16;
        enc.max_len = 16;
        ModelConfig::new(enc, mode)
    }

    #[test]
    fn adam_zero_grad_leaves_params() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::vector(vec![0.5, -1.5]));
        let before = store.clone();
        let mut adam = Adam::new(AdamConfig::default(), &store);
        adam.step(&mut store, &[Tensor::zeros(vec![2])]);
        assert_eq!(store, before);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::vector(vec![1.0, 1.0]));
        let mut adam = Adam::new(AdamConfig::default(), &store);
        adam.step(&mut store, &[Tensor::vector(vec![2.0, -0.5])]);
        let w = store.tensors()[0].data();
        assert!((w[0] - (1.0 - 3e-4)).abs() < 1e-9);
        assert!((w[1] - (1.0 + 3e-4)).abs() < 1e-9);
    }

    #[test]
    fn subset_indices_boundaries() {
        let corpus = synth_corpus(&SynthSpec::uniform(3, 20, 20, 2)).unwrap();
        let own = corpus.group_split_indices("g2", Split::Train);
        let none = subset_train_indices(&corpus, "g2", 0, 9).unwrap();
        assert!(none.iter().all(|i| !own.contains(i)));
        let all = subset_train_indices(&corpus, "g2", own.len(), 9).unwrap();
        assert_eq!(all, corpus.split_indices(Split::Train));
        assert!(matches!(
            subset_train_indices(&corpus, "g2", own.len() + 1, 9),
            Err(Error::SubsetTooLarge { .. })
        ));
    }

    #[test]
    fn subset_rejects_decreasing_sizes() {
        let corpus = synth_corpus(&SynthSpec::uniform(2, 20, 20, 2)).unwrap();
        let err = subset_experiment(
            &corpus,
            "g1",
            &[5, 2],
            &tiny_config(ModelMode::Baseline),
            &TrainConfig::default(),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SubsetOrder));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.epochs = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.adam.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn diverging_run_is_reported() {
        let corpus = synth_corpus(&SynthSpec::uniform(2, 10, 10, 2)).unwrap();
        let mut cfg = TrainConfig::default();
        cfg.epochs = 3;
        cfg.adam.learning_rate = 1e300;
        let err = train(&corpus, &tiny_config(ModelMode::Baseline), &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }
}
