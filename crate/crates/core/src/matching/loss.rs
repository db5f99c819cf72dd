use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingVector, PointScorerWeights};
use super::scores::ScoreVector;
use crate::error::{Error, Result};

/// How the true candidate's score is turned into a probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Elementwise logistic on the true candidate's score.
    #[default]
    Logistic,
    /// Softmax over all candidates.
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    /// d loss / d fused[k].
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxLossGrad {
    pub loss: f64,
    pub grad_image: Vec<f64>,
    pub grad_text: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    /// Matching gradient, then auxiliary image gradient, then auxiliary text gradient.
    pub gradient: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−ln σ(x)` without overflow for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn check_truth(len: usize, truth: usize) -> Result<()> {
    if truth >= len {
        return Err(Error::InvalidInput(format!(
            "truth index {truth} out of range for {len} candidates"
        )));
    }
    Ok(())
}

/// Loss and gradient for a raw score vector.
pub fn score_loss(scores: &[f64], truth: usize, mode: LossMode) -> Result<LossGrad> {
    check_truth(scores.len(), truth)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite matching score".into()));
    }
    Ok(match mode {
        LossMode::Logistic => {
            let s = scores[truth];
            let mut grad = vec![0.0; scores.len()];
            grad[truth] = sigmoid(s) - 1.0;
            LossGrad {
                loss: neg_log_sigmoid(s),
                grad,
            }
        }
        LossMode::Softmax => {
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
            grad[truth] -= 1.0;
            LossGrad {
                loss: max + z.ln() - scores[truth],
                grad,
            }
        }
    })
}

pub fn matching_loss(score: &ScoreVector, truth: usize, mode: LossMode) -> Result<LossGrad> {
    score_loss(&score.fused, truth, mode)
}

/// Loss on the image + text scores only; the point term is ignored.
pub fn auxiliary_loss(score: &ScoreVector, truth: usize, mode: LossMode) -> Result<AuxLossGrad> {
    let (Some(qi), Some(qt)) = (&score.q_image, &score.q_text) else {
        return Err(Error::Precondition(
            "auxiliary loss needs both image and text scores".into(),
        ));
    };
    if qi.len() != qt.len() {
        return Err(Error::DimensionMismatch {
            expected: qi.len(),
            got: qt.len(),
        });
    }
    let sum: Vec<f64> = qi.iter().zip(qt).map(|(a, b)| a + b).collect();
    let lg = score_loss(&sum, truth, mode)?;
    Ok(AuxLossGrad {
        loss: lg.loss,
        grad_image: lg.grad.clone(),
        grad_text: lg.grad,
    })
}

pub fn total_objective(matching: &LossGrad, aux: &AuxLossGrad) -> Objective {
    let mut gradient = matching.grad.clone();
    gradient.extend_from_slice(&aux.grad_image);
    gradient.extend_from_slice(&aux.grad_text);
    Objective {
        loss: matching.loss + aux.loss,
        gradient,
    }
}

/// One object's contribution to a batch: fused scores over its candidates,
/// the raw point embeddings the scorer saw, and optional auxiliary scores.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub scores: ScoreVector,
    pub point_embeddings: Vec<EmbeddingVector>,
    pub truth_index: usize,
    pub auxiliary: Option<(ScoreVector, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchObjective {
    /// Mean over items of matching + auxiliary loss.
    pub loss: f64,
    pub grad_weights: Vec<f64>,
    pub grad_bias: f64,
}

/// Batch-mean objective and its gradient with respect to the point scorer.
pub fn batch_objective(items: &[BatchItem], scorer: &PointScorerWeights, mode: LossMode) -> Result<BatchObjective> {
    if items.is_empty() {
        return Err(Error::Precondition("empty batch".into()));
    }
    let n = items.len() as f64;
    let mut loss = 0.0;
    let mut grad_weights = vec![0.0; scorer.dim()];
    let mut grad_bias = 0.0;
    for item in items {
        if item.point_embeddings.len() != item.scores.len() {
            return Err(Error::DimensionMismatch {
                expected: item.scores.len(),
                got: item.point_embeddings.len(),
            });
        }
        let m = matching_loss(&item.scores, item.truth_index, mode)?;
        loss += m.loss;
        for (g, h) in m.grad.iter().zip(&item.point_embeddings) {
            if h.dim() != scorer.dim() {
                return Err(Error::DimensionMismatch {
                    expected: scorer.dim(),
                    got: h.dim(),
                });
            }
            if *g == 0.0 {
                continue;
            }
            for (gw, hv) in grad_weights.iter_mut().zip(h.values()) {
                *gw += g * hv;
            }
            grad_bias += g;
        }
        if let Some((aux_scores, aux_truth)) = &item.auxiliary {
            loss += auxiliary_loss(aux_scores, *aux_truth, mode)?.loss;
        }
    }
    grad_weights.iter_mut().for_each(|g| *g /= n);
    Ok(BatchObjective {
        loss: loss / n,
        grad_weights,
        grad_bias: grad_bias / n,
    })
}
