//! Token-level hate-sense assignment and the sense-augmented classifier.
//!
//! For token representations `E(x_i)` and class-name representations
//! `E(c_j)`, each token's sense distribution is
//! `softmax_j(cos(E(x_i), E(c_j)) / T)` and its sense `s_i` is the argmax
//! (lowest class index on ties). The classifier max-pools
//! `E(x_i) + E(c_{s_i})` over tokens and applies a two-layer MLP.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::classes::ClassSet;
use crate::encoder::{Dropout, Encoder, EncoderConfig, INIT_STD};
use crate::error::{Error, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};
use crate::text::{TokenSequence, Vocabulary};

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseAssignment {
    /// `[n×k]`, rows sum to one.
    pub distributions: Tensor,
    /// One class index per non-pad token.
    pub senses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub predicted: usize,
    /// Absent in baseline mode.
    pub assignment: Option<SenseAssignment>,
}

impl Prediction {
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }
}

/// Sense distributions and argmax senses for `token_reps[n×d]` against
/// `class_reps[k×d]`. Returns the tape variable of the distributions too, so
/// auxiliary losses can differentiate through them.
pub fn assign_senses(
    tape: &mut Tape,
    token_reps: Var,
    class_reps: Var,
    temperature: f64,
) -> Result<(Var, SenseAssignment)> {
    if !(temperature > 0.0) {
        return Err(Error::Config("temperature must be positive".into()));
    }
    let k = tape.shape(class_reps)[0];
    if k < 2 {
        return Err(Error::ClassSet("need at least two class representations".into()));
    }
    let cos = tape.cosine_matrix(token_reps, class_reps)?;
    let logits = tape.scale(cos, 1.0 / temperature)?;
    let dist = tape.softmax(logits, 1)?;
    let distributions = tape.value(dist).clone();
    let senses = (0..distributions.rows())
        .map(|i| argmax(distributions.row(i)))
        .collect();
    Ok((
        dist,
        SenseAssignment {
            distributions,
            senses,
        },
    ))
}

/// Row `i` becomes `token_reps[i] + class_reps[senses[i]]`.
pub fn augment(tape: &mut Tape, token_reps: Var, class_reps: Var, senses: &[usize]) -> Result<Var> {
    let n = tape.shape(token_reps)[0];
    if senses.len() != n {
        return Err(Error::Config(format!(
            "{} senses for {n} token representations",
            senses.len()
        )));
    }
    let selected = tape.gather_rows(class_reps, senses)?;
    Ok(tape.add(token_reps, selected)?)
}

/// Soft variant: row `i` becomes `token_reps[i] + Σ_j p_ij · class_reps[j]`.
pub fn augment_soft(tape: &mut Tape, token_reps: Var, class_reps: Var, dist: Var) -> Result<Var> {
    let mixed = tape.matmul(dist, class_reps)?;
    Ok(tape.add(token_reps, mixed)?)
}

/// Max-pool over tokens followed by `d → d_hidden → k` with GELU.
#[derive(Debug, Clone)]
pub struct ClassifierHead {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl ClassifierHead {
    pub fn new(
        d_model: usize,
        d_hidden: usize,
        k: usize,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Self {
        let w1 = store.add_normal("head.w1", vec![d_model, d_hidden], INIT_STD, rng);
        let b1 = store.add("head.b1", Tensor::zeros(vec![d_hidden]));
        let w2 = store.add_normal("head.w2", vec![d_hidden, k], INIT_STD, rng);
        let b2 = store.add("head.b2", Tensor::zeros(vec![k]));
        Self { w1, b1, w2, b2 }
    }

    pub fn ids(&self) -> [ParamId; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }

    /// Logits `[k]` for `reps[n×d]`.
    pub fn classify(&self, tape: &mut Tape, bound: &Bound, reps: Var) -> Result<Var> {
        if tape.shape(reps)[0] == 0 {
            return Err(Error::EmptySequence);
        }
        let (pooled, _) = tape.max_pool_rows(reps)?;
        let d = tape.shape(pooled)[0];
        let pooled = tape.reshape(pooled, vec![1, d])?;
        let h = tape.matmul(pooled, bound[self.w1])?;
        let h = tape.add_row(h, bound[self.b1])?;
        let h = tape.gelu(h)?;
        let z = tape.matmul(h, bound[self.w2])?;
        let z = tape.add_row(z, bound[self.b2])?;
        let k = tape.shape(z)[1];
        Ok(tape.reshape(z, vec![k])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    /// Sense assignment, augmentation and auxiliary losses.
    Sense,
    /// Encode, max-pool, MLP. No class-name encoding at all.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub d_hidden: usize,
    pub temperature: f64,
    pub mode: ModelMode,
    /// In sense mode, add the selected class vector to each token. When
    /// false the senses are still computed (for the auxiliary losses and
    /// inspection) but the classifier sees the raw token representations.
    pub augment: bool,
    /// Add the distribution-weighted mix of class vectors instead of the
    /// argmax-selected one.
    pub soft_augment: bool,
}

impl ModelConfig {
    pub fn new(encoder: EncoderConfig, mode: ModelMode) -> Self {
        let d_hidden = encoder.d_model;
        Self {
            encoder,
            d_hidden,
            temperature: 1.0,
            mode,
            augment: true,
            soft_augment: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.d_hidden == 0 {
            return Err(Error::Config("d_hidden must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        Ok(())
    }
}

/// Tape variables produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub logits: Var,
    /// Sense distributions `[n×k]` (sense mode only).
    pub distributions: Option<Var>,
    pub assignment: Option<SenseAssignment>,
}

/// The full classifier: vocabulary, class set, encoder, head and parameters.
#[derive(Debug, Clone)]
pub struct SenseModel {
    config: ModelConfig,
    classes: ClassSet,
    vocab: Vocabulary,
    encoder: Encoder,
    head: ClassifierHead,
    store: ParamStore,
}

impl SenseModel {
    /// Initializes parameters from `config.encoder.seed`. The vocabulary size
    /// in the config must match `vocab`.
    pub fn new(config: ModelConfig, classes: ClassSet, vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        if config.encoder.vocab_size != vocab.len() {
            return Err(Error::Config(format!(
                "encoder vocab_size {} does not match vocabulary of {} tokens",
                config.encoder.vocab_size,
                vocab.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.encoder.seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(config.encoder.clone(), &mut store, &mut rng)?;
        let head = ClassifierHead::new(
            config.encoder.d_model,
            config.d_hidden,
            classes.len(),
            &mut store,
            &mut rng,
        );
        Ok(Self {
            config,
            classes,
            vocab,
            encoder,
            head,
            store,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn head(&self) -> &ClassifierHead {
        &self.head
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Replaces all parameters; names and shapes must match.
    pub fn set_params(&mut self, store: ParamStore) -> Result<()> {
        let same = store.names() == self.store.names()
            && store
                .tensors()
                .iter()
                .zip(self.store.tensors())
                .all(|(a, b)| a.shape() == b.shape());
        if !same {
            return Err(Error::Checkpoint("parameter layout does not match the model".into()));
        }
        self.store = store;
        Ok(())
    }

    pub fn encode_text(&self, text: &str) -> TokenSequence {
        self.vocab.encode(text, self.config.encoder.max_len)
    }

    /// Records the forward pass on `tape`:
    /// encode → class names → senses → augment → classify.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        seq: &TokenSequence,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<ForwardTrace> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        let reps = self.encoder.encode_ids(tape, bound, seq.ids(), dropout.as_deref_mut())?;
        match self.config.mode {
            ModelMode::Baseline => {
                let logits = self.head.classify(tape, bound, reps)?;
                Ok(ForwardTrace {
                    logits,
                    distributions: None,
                    assignment: None,
                })
            }
            ModelMode::Sense => {
                let class_reps =
                    self.encoder
                        .encode_class_names(tape, bound, &self.vocab, self.classes.names())?;
                let (dist, assignment) =
                    assign_senses(tape, reps, class_reps, self.config.temperature)?;
                let pooled_input = if !self.config.augment {
                    reps
                } else if self.config.soft_augment {
                    augment_soft(tape, reps, class_reps, dist)?
                } else {
                    augment(tape, reps, class_reps, &assignment.senses)?
                };
                let logits = self.head.classify(tape, bound, pooled_input)?;
                Ok(ForwardTrace {
                    logits,
                    distributions: Some(dist),
                    assignment: Some(assignment),
                })
            }
        }
    }

    /// Eval-mode prediction for an encoded sequence.
    pub fn forward(&self, seq: &TokenSequence) -> Result<Prediction> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape);
        let trace = self.forward_on_tape(&mut tape, &bound, seq, None)?;
        let logits = tape.value(trace.logits).data().to_vec();
        Ok(Prediction {
            predicted: argmax(&logits),
            logits,
            assignment: trace.assignment,
        })
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        self.forward(&self.encode_text(text))
    }
}
