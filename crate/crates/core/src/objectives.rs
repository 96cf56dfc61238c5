//! Training objectives.
//!
//! Besides the document-level cross-entropy, two regularizers act on the
//! token senses:
//!
//! * consensus: the most frequent hateful sense among the tokens should equal
//!   the label. [`consensus_hard`] is the exact selector; [`consensus_loss`]
//!   is the differentiable surrogate used for training, the cross-entropy
//!   between the token-averaged sense distribution and the label.
//! * uniqueness: the number of distinct hateful senses in one input should be
//!   small. [`unique_hard`] counts them; [`unique_loss`] sums, over hateful
//!   classes, the largest probability any token assigns to that class. On
//!   one-hot distributions the two agree exactly.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub cls: f64,
    pub consensus: f64,
    pub unique: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            cls: 1.0,
            consensus: 0.5,
            unique: 0.1,
        }
    }
}

impl LossWeights {
    /// Classification loss only.
    pub fn cls_only() -> Self {
        Self {
            cls: 1.0,
            consensus: 0.0,
            unique: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cls > 0.0) || !(self.consensus >= 0.0) || !(self.unique >= 0.0) {
            return Err(Error::Config(
                "loss weights must be non-negative with a positive classification weight".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub cls: f64,
    pub consensus: f64,
    pub unique: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.total, self.cls, self.consensus, self.unique]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Component-wise mean of a nonempty list.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut out = LossBreakdown::default();
        for b in items {
            out.total += b.total;
            out.cls += b.cls;
            out.consensus += b.consensus;
            out.unique += b.unique;
        }
        out.total /= n;
        out.cls /= n;
        out.consensus /= n;
        out.unique /= n;
        out
    }
}

/// Most frequent hateful sense (lowest class index on ties). Without any
/// hateful sense, the lowest-index non-hateful class.
pub fn consensus_hard(senses: &[usize], hateful_mask: &[bool]) -> Result<usize> {
    if senses.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut counts = vec![0usize; hateful_mask.len()];
    for &s in senses {
        counts[s] += 1;
    }
    let mut best: Option<usize> = None;
    for (j, &c) in counts.iter().enumerate() {
        if hateful_mask[j] && c > 0 && best.is_none_or(|b| c > counts[b]) {
            best = Some(j);
        }
    }
    Ok(best.unwrap_or_else(|| hateful_mask.iter().position(|h| !h).unwrap_or(0)))
}

/// Number of distinct hateful classes among `senses`.
pub fn unique_hard(senses: &[usize], hateful_mask: &[bool]) -> usize {
    senses
        .iter()
        .filter(|&&s| hateful_mask[s])
        .collect::<BTreeSet<_>>()
        .len()
}

/// Floor on the averaged label probability, so one-hot inputs that miss the
/// label give a large finite loss.
pub const CONSENSUS_FLOOR: f64 = 1e-12;

/// `−ln(mean_i dist[i][target])` over the rows of `dist[n×k]`.
pub fn consensus_loss(tape: &mut Tape, dist: Var, target: usize) -> Result<Var> {
    let mean = tape.mean_rows(dist)?;
    let p = tape.select(mean, target)?;
    let p = tape.clamp_min(p, CONSENSUS_FLOOR)?;
    let logp = tape.ln(p)?;
    Ok(tape.scale(logp, -1.0)?)
}

/// `Σ_{j hateful} max_i dist[i][j]`.
pub fn unique_loss(tape: &mut Tape, dist: Var, hateful_mask: &[bool]) -> Result<Var> {
    let (peak, _) = tape.max_pool_rows(dist)?;
    let mask = hateful_mask.iter().map(|&h| f64::from(u8::from(h))).collect();
    let mask = tape.constant(Tensor::vector(mask));
    let masked = tape.mul(peak, mask)?;
    Ok(tape.sum(masked)?)
}

/// Weighted sum of the classification loss and, when sense distributions
/// are available, the two regularizers. Returns the differentiable total and
/// the per-term values.
pub fn total_loss(
    tape: &mut Tape,
    logits: Var,
    distributions: Option<Var>,
    target: usize,
    hateful_mask: &[bool],
    weights: &LossWeights,
) -> Result<(Var, LossBreakdown)> {
    let cls = tape.cross_entropy_with_logits(logits, target)?;
    let mut breakdown = LossBreakdown {
        cls: tape.value(cls).item(),
        ..Default::default()
    };
    let mut total = tape.scale(cls, weights.cls)?;
    if let Some(dist) = distributions {
        let cons = consensus_loss(tape, dist, target)?;
        let uniq = unique_loss(tape, dist, hateful_mask)?;
        breakdown.consensus = tape.value(cons).item();
        breakdown.unique = tape.value(uniq).item();
        // A zero weight leaves the term out of the graph entirely.
        for (term, w) in [(cons, weights.consensus), (uniq, weights.unique)] {
            if w != 0.0 {
                let scaled = tape.scale(term, w)?;
                total = tape.add(total, scaled)?;
            }
        }
    }
    breakdown.total = tape.value(total).item();
    Ok((total, breakdown))
}
