//! Central finite-difference gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::objectives::{total_loss, LossWeights};
use crate::params::Bound;
use crate::sense::SenseModel;
use crate::tensor::{Tape, Tensor, Var};

pub const STEP: f64 = 1e-5;
/// Denominator floor of the relative error. Below it, round-off in the
/// difference quotient (about 1e-11 at this step) dominates.
pub const FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Worst {
    pub rel_err: f64,
    pub input: usize,
    pub entry: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Worst {
    fn none() -> Self {
        Self {
            rel_err: 0.0,
            input: 0,
            entry: 0,
            analytic: 0.0,
            numeric: 0.0,
        }
    }

    fn update(&mut self, input: usize, entry: usize, analytic: f64, numeric: f64) {
        let e = rel_err(analytic, numeric);
        if e > self.rel_err || e.is_nan() {
            *self = Self {
                rel_err: e,
                input,
                entry,
                analytic,
                numeric,
            };
        }
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(shape.to_vec(), data).expect("non-empty shape")
}

/// Entries at least 0.2 away from zero (all positive when `positive`).
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize], positive: bool) -> Tensor {
    let mut t = random_tensor(rng, shape);
    for x in t.data_mut() {
        let mag = 0.2 + x.abs();
        *x = if positive || *x > 0.0 { mag } else { -mag };
    }
    t
}

/// Compares tape gradients of `sum(f(inputs) ⊙ w)` with central
/// differences, `w` random but fixed by `seed`.
pub fn check_op<F>(seed: u64, inputs: &[Tensor], f: F) -> Result<Worst>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let run = |inputs: &[Tensor], weights: Option<&Tensor>| -> Result<(Tape, Vec<Var>, Var, Tensor)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let out = f(&mut tape, &vars)?;
        let w = match weights {
            Some(w) => w.clone(),
            None => random_tensor(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xabcd), tape.shape(out)),
        };
        let wv = tape.constant(w.clone());
        let prod = tape.mul(out, wv)?;
        let loss = tape.sum(prod)?;
        Ok((tape, vars, loss, w))
    };
    let (mut tape, vars, loss, weights) = run(inputs, None)?;
    tape.backward(loss)?;
    let mut worst = Worst::none();
    for (k, input) in inputs.iter().enumerate() {
        let zeros = Tensor::zeros(input.shape().to_vec());
        let analytic = tape.grad(vars[k]).unwrap_or(&zeros).clone();
        for j in 0..input.len() {
            let mut probe = inputs.to_vec();
            probe[k].data_mut()[j] = input.data()[j] + STEP;
            let (t, _, l, _) = run(&probe, Some(&weights))?;
            let up = t.value(l).item();
            probe[k].data_mut()[j] = input.data()[j] - STEP;
            let (t, _, l, _) = run(&probe, Some(&weights))?;
            let down = t.value(l).item();
            worst.update(k, j, analytic.data()[j], (up - down) / (2.0 * STEP));
        }
    }
    Ok(worst)
}

type OpCase = (&'static str, Vec<Tensor>, Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>);

/// One random instance of every differentiable primitive.
pub fn primitive_cases(rng: &mut ChaCha8Rng) -> Vec<OpCase> {
    let a = random_tensor(rng, &[3, 4]);
    let b = random_tensor(rng, &[3, 4]);
    let row = random_tensor(rng, &[4]);
    let m = random_tensor(rng, &[4, 2]);
    let c = random_tensor(rng, &[3, 2]);
    let cls = random_tensor(rng, &[2, 4]);
    let kinked = away_from_zero(rng, &[3, 4], false);
    let positive = away_from_zero(rng, &[5], true);
    let table = random_tensor(rng, &[5, 3]);
    let v5 = random_tensor(rng, &[5]);
    let u = random_tensor(rng, &[4]);
    let w = random_tensor(rng, &[4]);
    let gamma = random_tensor(rng, &[4]);
    let beta = random_tensor(rng, &[4]);
    let logits = random_tensor(rng, &[3]);
    let target = rng.random_range(0..3);
    vec![
        ("add", vec![a.clone(), b.clone()], Box::new(|t, v| Ok(t.add(v[0], v[1])?))),
        ("add_self", vec![a.clone()], Box::new(|t, v| Ok(t.add(v[0], v[0])?))),
        ("add_row", vec![a.clone(), row.clone()], Box::new(|t, v| Ok(t.add_row(v[0], v[1])?))),
        ("mul", vec![a.clone(), b.clone()], Box::new(|t, v| Ok(t.mul(v[0], v[1])?))),
        ("scale", vec![a.clone()], Box::new(|t, v| Ok(t.scale(v[0], -1.7)?))),
        ("matmul", vec![a.clone(), m], Box::new(|t, v| Ok(t.matmul(v[0], v[1])?))),
        ("transpose", vec![a.clone()], Box::new(|t, v| Ok(t.transpose(v[0])?))),
        ("reshape", vec![a.clone()], Box::new(|t, v| Ok(t.reshape(v[0], vec![2, 6])?))),
        ("softmax_rows", vec![a.clone()], Box::new(|t, v| Ok(t.softmax(v[0], 1)?))),
        ("softmax_cols", vec![a.clone()], Box::new(|t, v| Ok(t.softmax(v[0], 0)?))),
        (
            "layer_norm",
            vec![a.clone(), gamma, beta],
            Box::new(|t, v| Ok(t.layer_norm(v[0], v[1], v[2])?)),
        ),
        ("gelu", vec![a.clone()], Box::new(|t, v| Ok(t.gelu(v[0])?))),
        ("relu", vec![kinked.clone()], Box::new(|t, v| Ok(t.relu(v[0])?))),
        ("clamp_min", vec![kinked.clone()], Box::new(|t, v| Ok(t.clamp_min(v[0], 0.0)?))),
        ("l1_norm", vec![kinked], Box::new(|t, v| Ok(t.l1_norm(v[0])?))),
        ("ln", vec![positive], Box::new(|t, v| Ok(t.ln(v[0])?))),
        ("gather_rows", vec![table], Box::new(|t, v| Ok(t.gather_rows(v[0], &[4, 0, 4, 2])?))),
        ("max_pool_rows", vec![a.clone()], Box::new(|t, v| Ok(t.max_pool_rows(v[0])?.0))),
        ("mean_rows", vec![a.clone()], Box::new(|t, v| Ok(t.mean_rows(v[0])?))),
        ("sum", vec![a.clone()], Box::new(|t, v| Ok(t.sum(v[0])?))),
        ("mean", vec![a.clone()], Box::new(|t, v| Ok(t.mean(v[0])?))),
        ("narrow_cols", vec![a.clone()], Box::new(|t, v| Ok(t.narrow_cols(v[0], 1, 2)?))),
        ("concat_cols", vec![a.clone(), c], Box::new(|t, v| Ok(t.concat_cols(&[v[0], v[1]])?))),
        ("concat_rows", vec![a.clone(), row], Box::new(|t, v| Ok(t.concat_rows(&[v[0], v[1]])?))),
        ("normalize_rows", vec![a.clone()], Box::new(|t, v| Ok(t.normalize_rows(v[0])?))),
        ("cosine_matrix", vec![a, cls], Box::new(|t, v| Ok(t.cosine_matrix(v[0], v[1])?))),
        ("cosine_similarity", vec![u, w], Box::new(|t, v| Ok(t.cosine_similarity(v[0], v[1])?))),
        (
            "cross_entropy",
            vec![logits],
            Box::new(move |t, v| Ok(t.cross_entropy_with_logits(v[0], target)?)),
        ),
        ("select", vec![v5], Box::new(|t, v| Ok(t.select(v[0], 3)?))),
    ]
}

fn model_loss(model: &SenseModel, text: &str, label: usize, weights: &LossWeights) -> Result<(Tape, Var, Bound)> {
    let seq = model.encode_text(text);
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let trace = model.forward_on_tape(&mut tape, &bound, &seq, None)?;
    let mask = model.classes().hateful_mask().to_vec();
    let (loss, _) = total_loss(&mut tape, trace.logits, trace.distributions, label, &mask, weights)?;
    Ok((tape, loss, bound))
}

/// Checks the gradient of the full training loss of one example with respect
/// to every model parameter. `input` in the result indexes parameters.
pub fn check_model(model: &mut SenseModel, text: &str, label: usize, weights: &LossWeights) -> Result<Worst> {
    let (mut tape, loss, bound) = model_loss(model, text, label, weights)?;
    tape.backward(loss)?;
    let grads = model.params().grads(&tape, &bound);
    let mut worst = Worst::none();
    for p in 0..model.params().len() {
        for j in 0..model.params().tensors()[p].len() {
            let orig = model.params().tensors()[p].data()[j];
            model.params_mut().tensors_mut()[p].data_mut()[j] = orig + STEP;
            let (t, l, _) = model_loss(model, text, label, weights)?;
            let up = t.value(l).item();
            model.params_mut().tensors_mut()[p].data_mut()[j] = orig - STEP;
            let (t, l, _) = model_loss(model, text, label, weights)?;
            let down = t.value(l).item();
            model.params_mut().tensors_mut()[p].data_mut()[j] = orig;
            worst.update(p, j, grads[p].data()[j], (up - down) / (2.0 * STEP));
        }
    }
    Ok(worst)
}
