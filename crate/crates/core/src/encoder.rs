//! Miniature post-norm transformer encoder.
//!
//! Token embeddings plus learned positions feed `n_layers` blocks of
//! multi-head self-attention and a GELU feed-forward layer, each followed by
//! a residual connection and layer normalization. Only the non-pad prefix of
//! a [`TokenSequence`] is encoded, so pad positions never take part in
//! attention.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};
use crate::text::{tokenize, TokenSequence, Vocabulary, DEFAULT_MAX_LEN};

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 128,
            max_len: DEFAULT_MAX_LEN,
            dropout_rate: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = extents.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LayerIds {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

/// Inverted dropout applied in training mode.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

impl Dropout<'_> {
    fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        if self.rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.rate;
        let shape = tape.shape(x).to_vec();
        let n = shape.iter().product();
        let mask = (0..n)
            .map(|_| if self.rng.random_bool(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        let m = tape.constant(Tensor::new(shape, mask)?);
        Ok(tape.mul(x, m)?)
    }
}

/// Parameter handles of the encoder; the tensors live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    token_emb: ParamId,
    pos_emb: ParamId,
    layers: Vec<LayerIds>,
}

impl Encoder {
    /// Registers freshly initialized parameters in `store`: N(0, 0.02²) for
    /// embeddings and projections, zeros for biases, ones/zeros for layer
    /// norms.
    pub fn new(config: EncoderConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let token_emb = store.add_normal("encoder.token_emb", vec![config.vocab_size, d], INIT_STD, rng);
        let pos_emb = store.add_normal("encoder.pos_emb", vec![config.max_len, d], INIT_STD, rng);
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let p = |s: &str| format!("encoder.layer{l}.{s}");
            let mut mat = |store: &mut ParamStore, name: &str, r: usize, c: usize| {
                store.add_normal(p(name), vec![r, c], INIT_STD, rng)
            };
            let wq = mat(store, "wq", d, d);
            let wk = mat(store, "wk", d, d);
            let wv = mat(store, "wv", d, d);
            let wo = mat(store, "wo", d, d);
            let w1 = mat(store, "w1", d, config.d_ff);
            let w2 = mat(store, "w2", config.d_ff, d);
            let zeros = |n: usize| Tensor::zeros(vec![n]);
            let ones = |n: usize| Tensor::filled(vec![n], 1.0);
            layers.push(LayerIds {
                wq,
                bq: store.add(p("bq"), zeros(d)),
                wk,
                bk: store.add(p("bk"), zeros(d)),
                wv,
                bv: store.add(p("bv"), zeros(d)),
                wo,
                bo: store.add(p("bo"), zeros(d)),
                ln1_g: store.add(p("ln1_g"), ones(d)),
                ln1_b: store.add(p("ln1_b"), zeros(d)),
                w1,
                b1: store.add(p("b1"), zeros(config.d_ff)),
                w2,
                b2: store.add(p("b2"), zeros(d)),
                ln2_g: store.add(p("ln2_g"), ones(d)),
                ln2_b: store.add(p("ln2_b"), zeros(d)),
            });
        }
        Ok(Self {
            config,
            token_emb,
            pos_emb,
            layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn token_embedding(&self) -> ParamId {
        self.token_emb
    }

    pub fn position_embedding(&self) -> ParamId {
        self.pos_emb
    }

    /// Contextual representations `[n×d_model]` of the token ids `ids`
    /// (no padding). Pass `dropout` only in training mode.
    pub fn encode_ids(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        ids: &[usize],
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        if ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        if ids.len() > self.config.max_len {
            return Err(Error::Config(format!(
                "sequence length {} exceeds max_len {}",
                ids.len(),
                self.config.max_len
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(Error::TokenOutOfVocab {
                id: bad,
                size: self.config.vocab_size,
            });
        }
        let positions: Vec<usize> = (0..ids.len()).collect();
        let tok = tape.embedding_lookup(bound[self.token_emb], ids)?;
        let pos = tape.embedding_lookup(bound[self.pos_emb], &positions)?;
        let mut x = tape.add(tok, pos)?;
        if let Some(d) = dropout.as_deref_mut() {
            x = d.apply(tape, x)?;
        }
        for layer in &self.layers {
            x = self.block(tape, bound, layer, x, dropout.as_deref_mut())?;
        }
        Ok(x)
    }

    /// [`Encoder::encode_ids`] on the non-pad prefix of `seq`.
    pub fn encode(&self, tape: &mut Tape, bound: &Bound, seq: &TokenSequence) -> Result<Var> {
        self.encode_ids(tape, bound, seq.ids(), None)
    }

    fn block(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        p: &LayerIds,
        x: Var,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let proj = |tape: &mut Tape, w: ParamId, b: ParamId, x: Var| -> Result<Var> {
            let y = tape.matmul(x, bound[w])?;
            Ok(tape.add_row(y, bound[b])?)
        };
        let q = proj(tape, p.wq, p.bq, x)?;
        let k = proj(tape, p.wk, p.bk, x)?;
        let v = proj(tape, p.wv, p.bv, x)?;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = tape.narrow_cols(q, h * dh, dh)?;
            let kh = tape.narrow_cols(k, h * dh, dh)?;
            let vh = tape.narrow_cols(v, h * dh, dh)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale)?;
            let attn = tape.softmax(scores, 1)?;
            outs.push(tape.matmul(attn, vh)?);
        }
        let heads_out = if outs.len() == 1 {
            outs[0]
        } else {
            tape.concat_cols(&outs)?
        };
        let mut attn_out = proj(tape, p.wo, p.bo, heads_out)?;
        if let Some(dr) = dropout.as_deref_mut() {
            attn_out = dr.apply(tape, attn_out)?;
        }
        let res = tape.add(x, attn_out)?;
        let x = tape.layer_norm(res, bound[p.ln1_g], bound[p.ln1_b])?;

        let hidden = proj(tape, p.w1, p.b1, x)?;
        let hidden = tape.gelu(hidden)?;
        let mut ff = proj(tape, p.w2, p.b2, hidden)?;
        if let Some(dr) = dropout.as_deref_mut() {
            ff = dr.apply(tape, ff)?;
        }
        let res = tape.add(x, ff)?;
        Ok(tape.layer_norm(res, bound[p.ln2_g], bound[p.ln2_b])?)
    }

    /// Encodes each class name and mean-pools over its tokens, giving
    /// `[k×d_model]`. Recorded on the tape, so gradients reach the encoder
    /// through the class names.
    pub fn encode_class_names<S: AsRef<str>>(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        vocab: &Vocabulary,
        names: &[S],
    ) -> Result<Var> {
        let mut rows = Vec::with_capacity(names.len());
        for name in names {
            let ids: Vec<usize> = tokenize(name.as_ref())
                .iter()
                .map(|t| vocab.lookup(t))
                .take(self.config.max_len)
                .collect();
            if ids.is_empty() {
                return Err(Error::EmptyClassName(name.as_ref().to_string()));
            }
            let reps = self.encode_ids(tape, bound, &ids, None)?;
            rows.push(tape.mean_rows(reps)?);
        }
        Ok(tape.concat_rows(&rows)?)
    }
}
