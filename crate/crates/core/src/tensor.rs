//! Dense row-major `f64` tensors and a reverse-mode computation tape.
//!
//! A [`Tape`] records every operation executed through it. Values live on the
//! tape and are addressed by [`Var`] handles; [`Tape::backward`] replays the
//! recorded adjoints in reverse order exactly once. Calling `backward` a
//! second time without [`Tape::zero_grad`] is an error, so accidental gradient
//! accumulation in training loops fails loudly.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Norm floor used by [`Tape::normalize_rows`] and cosine similarity.
///
/// Two (near-)zero vectors therefore have cosine similarity 0.
pub const NORM_EPS: f64 = 1e-12;

/// Variance floor inside layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} holds {expected} values but {actual} were supplied")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape {0:?} has a zero extent")]
    ZeroExtent(Vec<usize>),
    #[error("{op}: index {index} out of range for extent {extent}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        extent: usize,
    },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    BadAxis {
        op: &'static str,
        axis: usize,
        rank: usize,
    },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("ln of non-positive value {0}")]
    LogDomain(f64),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("variable belongs to a different tape")]
    DetachedVar,
    #[error("backward already ran on this tape; call zero_grad first")]
    AlreadyBackpropagated,
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroExtent(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// Rank-1 tensor; panics on empty input.
    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector must be nonempty");
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Rank-2 tensor from nested rows; panics on ragged or empty input.
    pub fn matrix(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty(), "matrix must be nonempty");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix rows");
        Self {
            shape: vec![rows.len(), cols],
            data: rows.concat(),
        }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Value of a scalar (or single-element) tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(TensorError::NonFinite(what))
        }
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MatMul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Softmax {
        x: usize,
        axis: usize,
    },
    LayerNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gelu(usize),
    Relu(usize),
    ClampMin(usize, f64),
    Gather {
        table: usize,
        ids: Vec<usize>,
    },
    MaxPoolRows {
        x: usize,
        argmax: Vec<usize>,
    },
    MeanRows(usize),
    Sum(usize),
    Mean(usize),
    NarrowCols {
        x: usize,
        start: usize,
    },
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    NormalizeRows {
        x: usize,
        norms: Vec<f64>,
    },
    CrossEntropy {
        logits: usize,
        target: usize,
        probs: Vec<f64>,
    },
    Ln(usize),
    Select {
        x: usize,
        index: usize,
    },
    L1(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(0);

/// Records operations for one forward pass and replays their adjoints.
///
/// A tape is confined to the thread that builds it; independent tapes may be
/// used concurrently.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn gelu_parts(x: f64) -> (f64, f64) {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    const A: f64 = 0.044_715;
    let u = C * (x + A * x * x * x);
    let t = u.tanh();
    let y = 0.5 * x * (1.0 + t);
    let dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * A * x * x);
    (y, dy)
}

fn softmax_layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let len = shape[axis];
    let inner = shape[axis + 1..].iter().product();
    (outer, len, inner)
}

fn accumulate(slot: &mut Option<Tensor>, shape: &[usize], f: impl FnOnce(&mut [f64])) {
    let t = slot.get_or_insert_with(|| Tensor::zeros(shape.to_vec()));
    f(t.data_mut());
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    /// Number of recorded operations, leaves included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(TensorError::DetachedVar);
        }
        Ok(v.index)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[usize]) -> Var {
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// Records an input tensor. Gradients are kept only when `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Value of a recorded variable. Panics on a handle from another tape.
    pub fn value(&self, v: Var) -> &Tensor {
        let i = self.idx(v).expect("variable from another tape");
        &self.nodes[i].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Gradient of the last backward pass. `None` for variables that do not
    /// require gradients or were unreachable from the loss.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        let i = self.idx(v).ok()?;
        self.grads.get(i).and_then(|g| g.as_ref())
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    fn same_shape(&self, op: &'static str, a: usize, b: usize) -> Result<()> {
        let (sa, sb) = (self.nodes[a].value.shape(), self.nodes[b].value.shape());
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    fn rank2(&self, op: &'static str, a: usize) -> Result<(usize, usize)> {
        let s = self.nodes[a].value.shape();
        if s.len() != 2 {
            return Err(TensorError::Rank {
                op,
                expected: 2,
                shape: s.to_vec(),
            });
        }
        Ok((s[0], s[1]))
    }

    fn rank1(&self, op: &'static str, a: usize) -> Result<usize> {
        let s = self.nodes[a].value.shape();
        if s.len() != 1 {
            return Err(TensorError::Rank {
                op,
                expected: 1,
                shape: s.to_vec(),
            });
        }
        Ok(s[0])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        self.same_shape("add", a, b)?;
        let va = &self.nodes[a].value;
        let vb = &self.nodes[b].value;
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x + y).collect();
        let value = Tensor {
            shape: va.shape.clone(),
            data,
        };
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// `a[m×n] + b[n]`, adding `b` to every row.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        let (m, n) = self.rank2("add_row", a)?;
        let nb = self.rank1("add_row", b)?;
        if nb != n {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: vec![m, n],
                right: vec![nb],
            });
        }
        let vb = &self.nodes[b].value.data;
        let mut data = self.nodes[a].value.data.clone();
        for row in data.chunks_mut(n) {
            for (x, y) in row.iter_mut().zip(vb) {
                *x += y;
            }
        }
        let value = Tensor {
            shape: vec![m, n],
            data,
        };
        Ok(self.push(value, Op::AddRow(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        self.same_shape("mul", a, b)?;
        let va = &self.nodes[a].value;
        let vb = &self.nodes[b].value;
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect();
        let value = Tensor {
            shape: va.shape.clone(),
            data,
        };
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let a = self.idx(a)?;
        let va = &self.nodes[a].value;
        let value = Tensor {
            shape: va.shape.clone(),
            data: va.data.iter().map(|x| x * c).collect(),
        };
        Ok(self.push(value, Op::Scale(a, c), &[a]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        let (m, k) = self.rank2("matmul", a)?;
        let (k2, n) = self.rank2("matmul", b)?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let data = matmul_raw(&self.nodes[a].value.data, &self.nodes[b].value.data, m, k, n);
        let value = Tensor {
            shape: vec![m, n],
            data,
        };
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let a = self.idx(a)?;
        let (m, n) = self.rank2("transpose", a)?;
        let data = transpose_raw(&self.nodes[a].value.data, m, n);
        let value = Tensor {
            shape: vec![n, m],
            data,
        };
        Ok(self.push(value, Op::Transpose(a), &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let a = self.idx(a)?;
        let old = &self.nodes[a].value;
        let value = Tensor::new(shape, old.data.clone()).map_err(|_| TensorError::ShapeMismatch {
            op: "reshape",
            left: old.shape.clone(),
            right: vec![],
        })?;
        Ok(self.push(value, Op::Reshape(a), &[a]))
    }

    /// Softmax along `axis`, computed with a max shift.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let x = self.idx(x)?;
        let v = &self.nodes[x].value;
        if axis >= v.rank() {
            return Err(TensorError::BadAxis {
                op: "softmax",
                axis,
                rank: v.rank(),
            });
        }
        let (outer, len, inner) = softmax_layout(&v.shape, axis);
        let mut data = v.data.clone();
        for o in 0..outer {
            for i in 0..inner {
                let at = |a: usize| (o * len + a) * inner + i;
                let max = (0..len).map(|a| data[at(a)]).fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for a in 0..len {
                    let e = (data[at(a)] - max).exp();
                    data[at(a)] = e;
                    sum += e;
                }
                for a in 0..len {
                    data[at(a)] /= sum;
                }
            }
        }
        let value = Tensor {
            shape: v.shape.clone(),
            data,
        };
        Ok(self.push(value, Op::Softmax { x, axis }, &[x]))
    }

    /// Row-wise layer normalization of `x[m×n]` with scale and offset `[n]`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (x, g, b) = (self.idx(x)?, self.idx(gamma)?, self.idx(beta)?);
        let (m, n) = self.rank2("layer_norm", x)?;
        for p in [g, b] {
            let len = self.rank1("layer_norm", p)?;
            if len != n {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    left: vec![m, n],
                    right: vec![len],
                });
            }
        }
        let xv = &self.nodes[x].value.data;
        let gv = &self.nodes[g].value.data;
        let bv = &self.nodes[b].value.data;
        let mut normalized = Vec::with_capacity(m * n);
        let mut inv_std = Vec::with_capacity(m);
        let mut data = Vec::with_capacity(m * n);
        for row in xv.chunks(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            for (j, v) in row.iter().enumerate() {
                let h = (v - mean) * is;
                normalized.push(h);
                data.push(h * gv[j] + bv[j]);
            }
        }
        let value = Tensor {
            shape: vec![m, n],
            data,
        };
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gamma: g,
                beta: b,
                normalized,
                inv_std,
            },
            &[x, g, b],
        ))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        let v = &self.nodes[x].value;
        let value = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&z| gelu_parts(z).0).collect(),
        };
        Ok(self.push(value, Op::Gelu(x), &[x]))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        let v = &self.nodes[x].value;
        let value = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&z| z.max(0.0)).collect(),
        };
        Ok(self.push(value, Op::Relu(x), &[x]))
    }

    /// `max(x, lo)` elementwise; the gradient passes only where `x > lo`.
    pub fn clamp_min(&mut self, x: Var, lo: f64) -> Result<Var> {
        let x = self.idx(x)?;
        let v = &self.nodes[x].value;
        let value = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|z| z.max(lo)).collect(),
        };
        Ok(self.push(value, Op::ClampMin(x, lo), &[x]))
    }

    /// Gathers rows of `table[v×d]` by index, giving `[ids.len()×d]`.
    /// Used for both embedding lookup and hard sense selection.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.idx(table)?;
        let (rows, d) = self.rank2("gather_rows", t)?;
        if ids.is_empty() {
            return Err(TensorError::Empty { op: "gather_rows" });
        }
        let tv = &self.nodes[t].value;
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= rows {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather_rows",
                    index: id,
                    extent: rows,
                });
            }
            data.extend_from_slice(tv.row(id));
        }
        let value = Tensor {
            shape: vec![ids.len(), d],
            data,
        };
        Ok(self.push(
            value,
            Op::Gather {
                table: t,
                ids: ids.to_vec(),
            },
            &[t],
        ))
    }

    /// Alias of [`Tape::gather_rows`] under its embedding name.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.gather_rows(table, ids)
    }

    /// Per-column maximum of `x[n×d]`, giving `[d]` and the winning row of
    /// each column (first occurrence on ties).
    pub fn max_pool_rows(&mut self, x: Var) -> Result<(Var, Vec<usize>)> {
        let x = self.idx(x)?;
        let (n, d) = self.rank2("max_pool_rows", x)?;
        let v = &self.nodes[x].value;
        let mut best = v.row(0).to_vec();
        let mut argmax = vec![0; d];
        for i in 1..n {
            for (j, &z) in v.row(i).iter().enumerate() {
                if z > best[j] {
                    best[j] = z;
                    argmax[j] = i;
                }
            }
        }
        let value = Tensor {
            shape: vec![d],
            data: best,
        };
        let out = self.push(
            value,
            Op::MaxPoolRows {
                x,
                argmax: argmax.clone(),
            },
            &[x],
        );
        Ok((out, argmax))
    }

    /// Mean of the rows of `x[n×d]`, giving `[d]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        let (n, d) = self.rank2("mean_rows", x)?;
        let v = &self.nodes[x].value;
        let mut out = vec![0.0; d];
        for row in v.data.chunks(d) {
            for (o, z) in out.iter_mut().zip(row) {
                *o += z;
            }
        }
        for o in &mut out {
            *o /= n as f64;
        }
        let value = Tensor {
            shape: vec![d],
            data: out,
        };
        Ok(self.push(value, Op::MeanRows(x), &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        let s = self.nodes[x].value.data.iter().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(x), &[x]))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        let v = &self.nodes[x].value;
        let s = v.data.iter().sum::<f64>() / v.len() as f64;
        Ok(self.push(Tensor::scalar(s), Op::Mean(x), &[x]))
    }

    pub fn l1_norm(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        let s = self.nodes[x].value.data.iter().map(|v| v.abs()).sum();
        Ok(self.push(Tensor::scalar(s), Op::L1(x), &[x]))
    }

    /// Columns `start..start + width` of `x[m×n]`.
    pub fn narrow_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let x = self.idx(x)?;
        let (m, n) = self.rank2("narrow_cols", x)?;
        if width == 0 || start + width > n {
            return Err(TensorError::IndexOutOfRange {
                op: "narrow_cols",
                index: start + width,
                extent: n,
            });
        }
        let v = &self.nodes[x].value;
        let mut data = Vec::with_capacity(m * width);
        for row in v.data.chunks(n) {
            data.extend_from_slice(&row[start..start + width]);
        }
        let value = Tensor {
            shape: vec![m, width],
            data,
        };
        Ok(self.push(value, Op::NarrowCols { x, start }, &[x]))
    }

    /// Concatenates rank-2 tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::Empty { op: "concat_cols" });
        }
        let ids = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let (m, _) = self.rank2("concat_cols", ids[0])?;
        let mut widths = Vec::with_capacity(ids.len());
        for &i in &ids {
            let (mi, ni) = self.rank2("concat_cols", i)?;
            if mi != m {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.nodes[ids[0]].value.shape.clone(),
                    right: vec![mi, ni],
                });
            }
            widths.push(ni);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&i, &w) in ids.iter().zip(&widths) {
                data.extend_from_slice(&self.nodes[i].value.data[r * w..(r + 1) * w]);
            }
        }
        let value = Tensor {
            shape: vec![m, total],
            data,
        };
        Ok(self.push(value, Op::ConcatCols(ids.clone()), &ids))
    }

    /// Stacks rank-2 tensors (or rank-1 rows) with equal widths.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::Empty { op: "concat_rows" });
        }
        let ids = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let width = |s: &[usize]| if s.len() == 1 { s[0] } else { s[1] };
        let first = self.nodes[ids[0]].value.shape.clone();
        let d = width(&first);
        let mut rows = 0;
        let mut data = Vec::new();
        for &i in &ids {
            let v = &self.nodes[i].value;
            if v.rank() == 0 || v.rank() > 2 || width(&v.shape) != d {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    left: first,
                    right: v.shape.clone(),
                });
            }
            rows += v.len() / d;
            data.extend_from_slice(&v.data);
        }
        let value = Tensor {
            shape: vec![rows, d],
            data,
        };
        Ok(self.push(value, Op::ConcatRows(ids.clone()), &ids))
    }

    /// Divides each row of a rank-2 (or the single rank-1) tensor by
    /// `max(‖row‖, NORM_EPS)`.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        let v = &self.nodes[x].value;
        let d = match v.rank() {
            1 => v.shape[0],
            2 => v.shape[1],
            _ => {
                return Err(TensorError::Rank {
                    op: "normalize_rows",
                    expected: 2,
                    shape: v.shape.clone(),
                })
            }
        };
        let mut norms = Vec::with_capacity(v.len() / d);
        let mut data = Vec::with_capacity(v.len());
        for row in v.data.chunks(d) {
            let norm = row.iter().map(|z| z * z).sum::<f64>().sqrt();
            norms.push(norm);
            let r = norm.max(NORM_EPS);
            data.extend(row.iter().map(|z| z / r));
        }
        let value = Tensor {
            shape: v.shape.clone(),
            data,
        };
        Ok(self.push(value, Op::NormalizeRows { x, norms }, &[x]))
    }

    /// Cosine similarity of two rank-1 tensors, as a scalar.
    pub fn cosine_similarity(&mut self, u: Var, v: Var) -> Result<Var> {
        let (iu, iv) = (self.idx(u)?, self.idx(v)?);
        self.rank1("cosine_similarity", iu)?;
        self.same_shape("cosine_similarity", iu, iv)?;
        let nu = self.normalize_rows(u)?;
        let nv = self.normalize_rows(v)?;
        let prod = self.mul(nu, nv)?;
        self.sum(prod)
    }

    /// Pairwise cosine similarities between the rows of `a[n×d]` and
    /// `b[k×d]`, giving `[n×k]`.
    pub fn cosine_matrix(&mut self, a: Var, b: Var) -> Result<Var> {
        let na = self.normalize_rows(a)?;
        let nb = self.normalize_rows(b)?;
        let nbt = self.transpose(nb)?;
        self.matmul(na, nbt)
    }

    /// Cross-entropy of a rank-1 logit vector against a class index.
    pub fn cross_entropy_with_logits(&mut self, logits: Var, target: usize) -> Result<Var> {
        let l = self.idx(logits)?;
        let k = self.rank1("cross_entropy_with_logits", l)?;
        if target >= k {
            return Err(TensorError::IndexOutOfRange {
                op: "cross_entropy_with_logits",
                index: target,
                extent: k,
            });
        }
        let z = &self.nodes[l].value.data;
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_sum = max + sum.ln();
        let probs: Vec<f64> = z.iter().map(|v| (v - log_sum).exp()).collect();
        let loss = log_sum - z[target];
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits: l,
                target,
                probs,
            },
            &[l],
        ))
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        let v = &self.nodes[x].value;
        if let Some(&bad) = v.data.iter().find(|z| **z <= 0.0) {
            return Err(TensorError::LogDomain(bad));
        }
        let value = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|z| z.ln()).collect(),
        };
        Ok(self.push(value, Op::Ln(x), &[x]))
    }

    /// Element `index` of a rank-1 tensor, as a scalar.
    pub fn select(&mut self, x: Var, index: usize) -> Result<Var> {
        let x = self.idx(x)?;
        let len = self.rank1("select", x)?;
        if index >= len {
            return Err(TensorError::IndexOutOfRange {
                op: "select",
                index,
                extent: len,
            });
        }
        let value = Tensor::scalar(self.nodes[x].value.data[index]);
        Ok(self.push(value, Op::Select { x, index }, &[x]))
    }

    /// Replays adjoints from a scalar `loss`, populating gradients of every
    /// reachable variable that requires them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = self.idx(loss)?;
        if self.backward_done {
            return Err(TensorError::AlreadyBackpropagated);
        }
        if self.nodes[root].value.len() != 1 || self.nodes[root].value.rank() > 1 {
            return Err(TensorError::NonScalarLoss(self.nodes[root].value.shape.clone()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Tensor {
            shape: self.nodes[root].value.shape.clone(),
            data: vec![1.0],
        });
        for i in (0..=root).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.requires_grad {
                grads[i] = None;
            }
        }
        self.grads = grads;
        self.backward_done = true;
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let need = |j: usize| nodes[j].requires_grad;
        let shape_of = |j: usize| nodes[j].value.shape.clone();
        let gd = &g.data;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for j in [*a, *b].into_iter().filter(|&j| need(j)) {
                    accumulate(&mut grads[j], &shape_of(j), |t| {
                        t.iter_mut().zip(gd).for_each(|(x, y)| *x += y)
                    });
                }
            }
            Op::AddRow(a, b) => {
                let n = nodes[*b].value.len();
                if need(*a) {
                    accumulate(&mut grads[*a], &shape_of(*a), |t| {
                        t.iter_mut().zip(gd).for_each(|(x, y)| *x += y)
                    });
                }
                if need(*b) {
                    accumulate(&mut grads[*b], &shape_of(*b), |t| {
                        for row in gd.chunks(n) {
                            t.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                        }
                    });
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&nodes[*a].value.data, &nodes[*b].value.data);
                if need(*a) {
                    accumulate(&mut grads[*a], &shape_of(*a), |t| {
                        for ((x, y), z) in t.iter_mut().zip(gd).zip(vb) {
                            *x += y * z;
                        }
                    });
                }
                if need(*b) {
                    accumulate(&mut grads[*b], &shape_of(*b), |t| {
                        for ((x, y), z) in t.iter_mut().zip(gd).zip(va) {
                            *x += y * z;
                        }
                    });
                }
            }
            Op::Scale(a, c) => {
                accumulate(&mut grads[*a], &shape_of(*a), |t| {
                    t.iter_mut().zip(gd).for_each(|(x, y)| *x += c * y)
                });
            }
            Op::MatMul(a, b) => {
                let (m, k) = (nodes[*a].value.shape[0], nodes[*a].value.shape[1]);
                let n = nodes[*b].value.shape[1];
                if need(*a) {
                    // dA = dC · Bᵀ
                    let bt = transpose_raw(&nodes[*b].value.data, k, n);
                    let da = matmul_raw(gd, &bt, m, n, k);
                    accumulate(&mut grads[*a], &shape_of(*a), |t| {
                        t.iter_mut().zip(&da).for_each(|(x, y)| *x += y)
                    });
                }
                if need(*b) {
                    // dB = Aᵀ · dC
                    let at = transpose_raw(&nodes[*a].value.data, m, k);
                    let db = matmul_raw(&at, gd, k, m, n);
                    accumulate(&mut grads[*b], &shape_of(*b), |t| {
                        t.iter_mut().zip(&db).for_each(|(x, y)| *x += y)
                    });
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (nodes[*a].value.shape[0], nodes[*a].value.shape[1]);
                let back = transpose_raw(gd, n, m);
                accumulate(&mut grads[*a], &shape_of(*a), |t| {
                    t.iter_mut().zip(&back).for_each(|(x, y)| *x += y)
                });
            }
            Op::Reshape(a) => {
                accumulate(&mut grads[*a], &shape_of(*a), |t| {
                    t.iter_mut().zip(gd).for_each(|(x, y)| *x += y)
                });
            }
            Op::Softmax { x, axis } => {
                let y = &nodes[i].value;
                let (outer, len, inner) = softmax_layout(&y.shape, *axis);
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for o in 0..outer {
                        for c in 0..inner {
                            let at = |a: usize| (o * len + a) * inner + c;
                            let dot: f64 = (0..len).map(|a| gd[at(a)] * y.data[at(a)]).sum();
                            for a in 0..len {
                                t[at(a)] += y.data[at(a)] * (gd[at(a)] - dot);
                            }
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let n = nodes[*gamma].value.len();
                let gv = &nodes[*gamma].value.data;
                if need(*gamma) {
                    accumulate(&mut grads[*gamma], &[n], |t| {
                        for (grow, hrow) in gd.chunks(n).zip(normalized.chunks(n)) {
                            for j in 0..n {
                                t[j] += grow[j] * hrow[j];
                            }
                        }
                    });
                }
                if need(*beta) {
                    accumulate(&mut grads[*beta], &[n], |t| {
                        for grow in gd.chunks(n) {
                            t.iter_mut().zip(grow).for_each(|(x, y)| *x += y);
                        }
                    });
                }
                if need(*x) {
                    accumulate(&mut grads[*x], &shape_of(*x), |t| {
                        let nf = n as f64;
                        for (r, (grow, hrow)) in gd.chunks(n).zip(normalized.chunks(n)).enumerate() {
                            let dh: Vec<f64> = grow.iter().zip(gv).map(|(a, b)| a * b).collect();
                            let sum_dh: f64 = dh.iter().sum();
                            let sum_dh_h: f64 = dh.iter().zip(hrow).map(|(a, b)| a * b).sum();
                            for j in 0..n {
                                t[r * n + j] +=
                                    inv_std[r] / nf * (nf * dh[j] - sum_dh - hrow[j] * sum_dh_h);
                            }
                        }
                    });
                }
            }
            Op::Gelu(x) => {
                let xv = &nodes[*x].value.data;
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for ((d, y), z) in t.iter_mut().zip(gd).zip(xv) {
                        *d += y * gelu_parts(*z).1;
                    }
                });
            }
            Op::ClampMin(x, lo) => {
                let xv = &nodes[*x].value.data;
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for ((d, y), z) in t.iter_mut().zip(gd).zip(xv) {
                        if z > lo {
                            *d += y;
                        }
                    }
                });
            }
            Op::Relu(x) => {
                let xv = &nodes[*x].value.data;
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for ((d, y), z) in t.iter_mut().zip(gd).zip(xv) {
                        if *z > 0.0 {
                            *d += y;
                        }
                    }
                });
            }
            Op::Gather { table, ids } => {
                let d = nodes[*table].value.shape[1];
                accumulate(&mut grads[*table], &shape_of(*table), |t| {
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..d {
                            t[id * d + j] += gd[r * d + j];
                        }
                    }
                });
            }
            Op::MaxPoolRows { x, argmax } => {
                let d = argmax.len();
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for (j, &r) in argmax.iter().enumerate() {
                        t[r * d + j] += gd[j];
                    }
                });
            }
            Op::MeanRows(x) => {
                let (n, d) = (nodes[*x].value.shape[0], nodes[*x].value.shape[1]);
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for row in t.chunks_mut(d) {
                        for (a, b) in row.iter_mut().zip(gd) {
                            *a += b / n as f64;
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let g0 = gd[0];
                accumulate(&mut grads[*x], &shape_of(*x), |t| t.iter_mut().for_each(|v| *v += g0));
            }
            Op::Mean(x) => {
                let g0 = gd[0] / nodes[*x].value.len() as f64;
                accumulate(&mut grads[*x], &shape_of(*x), |t| t.iter_mut().for_each(|v| *v += g0));
            }
            Op::L1(x) => {
                let g0 = gd[0];
                let xv = &nodes[*x].value.data;
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for (d, z) in t.iter_mut().zip(xv) {
                        if *z > 0.0 {
                            *d += g0;
                        } else if *z < 0.0 {
                            *d -= g0;
                        }
                    }
                });
            }
            Op::NarrowCols { x, start } => {
                let n = nodes[*x].value.shape[1];
                let w = nodes[i].value.shape[1];
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for (r, grow) in gd.chunks(w).enumerate() {
                        for (j, v) in grow.iter().enumerate() {
                            t[r * n + start + j] += v;
                        }
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let total = nodes[i].value.shape[1];
                let mut offset = 0;
                for &p in parts {
                    let w = nodes[p].value.shape[1];
                    if need(p) {
                        accumulate(&mut grads[p], &shape_of(p), |t| {
                            for (r, grow) in gd.chunks(total).enumerate() {
                                for j in 0..w {
                                    t[r * w + j] += grow[offset + j];
                                }
                            }
                        });
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = nodes[p].value.len();
                    if need(p) {
                        accumulate(&mut grads[p], &shape_of(p), |t| {
                            t.iter_mut()
                                .zip(&gd[offset..offset + len])
                                .for_each(|(x, y)| *x += y)
                        });
                    }
                    offset += len;
                }
            }
            Op::NormalizeRows { x, norms } => {
                let y = &nodes[i].value;
                let d = y.len() / norms.len();
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for (r, &norm) in norms.iter().enumerate() {
                        let yr = &y.data[r * d..(r + 1) * d];
                        let gr = &gd[r * d..(r + 1) * d];
                        if norm > NORM_EPS {
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for j in 0..d {
                                t[r * d + j] += (gr[j] - yr[j] * dot) / norm;
                            }
                        } else {
                            for j in 0..d {
                                t[r * d + j] += gr[j] / NORM_EPS;
                            }
                        }
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                target,
                probs,
            } => {
                let g0 = gd[0];
                accumulate(&mut grads[*logits], &shape_of(*logits), |t| {
                    for (j, p) in probs.iter().enumerate() {
                        let onehot = if j == *target { 1.0 } else { 0.0 };
                        t[j] += g0 * (p - onehot);
                    }
                });
            }
            Op::Ln(x) => {
                let xv = &nodes[*x].value.data;
                accumulate(&mut grads[*x], &shape_of(*x), |t| {
                    for ((d, y), z) in t.iter_mut().zip(gd).zip(xv) {
                        *d += y / z;
                    }
                });
            }
            Op::Select { x, index } => {
                let g0 = gd[0];
                accumulate(&mut grads[*x], &shape_of(*x), |t| t[*index] += g0);
            }
        }
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_rejects_bad_length() {
        assert!(matches!(
            Tensor::new(vec![2, 3], vec![0.0; 5]),
            Err(TensorError::DataLength { expected: 6, .. })
        ));
        assert!(matches!(Tensor::new(vec![0], vec![]), Err(TensorError::ZeroExtent(_))));
    }

    #[test]
    fn matmul_identity_and_zero() {
        let mut t = Tape::new();
        let i2 = t.constant(Tensor::matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let m = t.constant(Tensor::matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let out = t.matmul(i2, m).unwrap();
        assert_eq!(t.value(out).data(), &[1.0, 2.0, 3.0, 4.0]);

        let a = t.constant(Tensor::matrix(&[vec![1.0, 0.0], vec![0.0, 0.0]]));
        let b = t.constant(Tensor::matrix(&[vec![0.0], vec![5.0]]));
        let out = t.matmul(a, b).unwrap();
        assert_eq!(t.value(out).data(), &[0.0, 0.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(vec![2, 3]));
        let b = t.constant(Tensor::zeros(vec![2, 3]));
        let err = t.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            TensorError::ShapeMismatch {
                op: "matmul",
                left: vec![2, 3],
                right: vec![2, 3]
            }
        );
        assert!(err.to_string().contains("[2, 3]"));
    }

    #[test]
    fn softmax_symmetric_and_shift_stable() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![0.0, 0.0]));
        let y = t.softmax(x, 0).unwrap();
        assert_eq!(t.value(y).data(), &[0.5, 0.5]);
        let x = t.constant(Tensor::vector(vec![1000.0, 1000.0]));
        let y = t.softmax(x, 0).unwrap();
        assert_eq!(t.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_rejects_bad_axis() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![1.0]));
        assert!(matches!(t.softmax(x, 1), Err(TensorError::BadAxis { .. })));
    }

    #[test]
    fn softmax_along_first_axis() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::matrix(&[vec![0.0, 1.0], vec![0.0, 1.0]]));
        let y = t.softmax(x, 0).unwrap();
        assert_eq!(t.value(y).data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn cosine_identity_orthogonal_zero() {
        let mut t = Tape::new();
        let u = t.constant(Tensor::vector(vec![3.0, 4.0]));
        let c = t.cosine_similarity(u, u).unwrap();
        assert!((t.value(c).item() - 1.0).abs() < 1e-15);
        let a = t.constant(Tensor::vector(vec![1.0, 0.0]));
        let b = t.constant(Tensor::vector(vec![0.0, 1.0]));
        let c = t.cosine_similarity(a, b).unwrap();
        assert_eq!(t.value(c).item(), 0.0);
        let z = t.constant(Tensor::vector(vec![0.0, 0.0]));
        let c = t.cosine_similarity(z, z).unwrap();
        assert_eq!(t.value(c).item(), 0.0);
    }

    #[test]
    fn max_pool_routes_to_argmax() {
        let mut t = Tape::new();
        let x = t.param(Tensor::matrix(&[vec![1.0, 5.0], vec![3.0, 2.0]]));
        let (p, argmax) = t.max_pool_rows(x).unwrap();
        assert_eq!(t.value(p).data(), &[3.0, 5.0]);
        assert_eq!(argmax, vec![1, 0]);
        let s = t.sum(p).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn l1_norm_value() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![-1.0, 2.0, 0.0]));
        let n = t.l1_norm(x).unwrap();
        assert_eq!(t.value(n).item(), 3.0);
    }

    #[test]
    fn backward_linear_and_quadratic() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[1.0, 1.0, 1.0]);

        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn backward_twice_is_an_error_until_reset() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0]));
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.backward(s), Err(TensorError::AlreadyBackpropagated));
        t.zero_grad();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_foreign_vars() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0]));
        assert_eq!(t.backward(x), Err(TensorError::NonScalarLoss(vec![2])));
        let mut other = Tape::new();
        let y = other.param(Tensor::scalar(1.0));
        assert_eq!(t.backward(y), Err(TensorError::DetachedVar));
    }

    #[test]
    fn cross_entropy_target_out_of_range() {
        let mut t = Tape::new();
        let z = t.constant(Tensor::vector(vec![0.0, 1.0]));
        assert!(matches!(
            t.cross_entropy_with_logits(z, 2),
            Err(TensorError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn unreachable_leaf_has_no_grad() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0]));
        let y = t.param(Tensor::vector(vec![2.0]));
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        assert!(t.grad(x).is_some());
        assert!(t.grad(y).is_none());
    }

    #[test]
    fn ln_rejects_non_positive() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![1.0, 0.0]));
        assert_eq!(t.ln(x).unwrap_err(), TensorError::LogDomain(0.0));
    }
}
