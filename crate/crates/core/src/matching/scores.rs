use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingVector, PointScorerWeights};
use crate::error::{Error, Result};

/// One replacement asset proposed for a scanned object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub asset_id: String,
    /// Bundle-relative path of the asset's point cloud, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<String>,
    pub embedding: EmbeddingVector,
    #[serde(default)]
    pub provenance: String,
}

/// Image and text embeddings of the scanned object; either may be missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Query {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<EmbeddingVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub scene_id: String,
    pub object_id: String,
    pub candidates: Vec<Candidate>,
    pub truth_index: Option<usize>,
    pub query: Query,
}

impl CandidateSet {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.len() < 2 {
            return Err(Error::Precondition(format!(
                "object '{}' needs at least 2 candidates, has {}",
                self.object_id,
                self.candidates.len()
            )));
        }
        let dim = self.dim();
        for c in &self.candidates {
            if c.embedding.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.embedding.dim(),
                });
            }
        }
        for q in [&self.query.image, &self.query.text].into_iter().flatten() {
            if q.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: q.dim(),
                });
            }
        }
        if let Some(t) = self.truth_index {
            if t >= self.candidates.len() {
                return Err(Error::InvalidInput(format!(
                    "truth index {t} out of range for {} candidates",
                    self.candidates.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.candidates.first().map_or(0, |c| c.embedding.dim())
    }
}

/// Per-modality matching scores over the `L` candidates and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub q_image: Option<Vec<f64>>,
    pub q_text: Option<Vec<f64>>,
    pub q_point: Option<Vec<f64>>,
    pub fused: Vec<f64>,
}

impl ScoreVector {
    /// Fuses the present terms; absent terms count as zeros.
    pub fn new(q_image: Option<Vec<f64>>, q_text: Option<Vec<f64>>, q_point: Option<Vec<f64>>) -> Result<Self> {
        let len = [&q_image, &q_text, &q_point]
            .into_iter()
            .flatten()
            .map(Vec::len)
            .next()
            .ok_or_else(|| Error::Precondition("no scoring signal available".into()))?;
        let mut fused = vec![0.0; len];
        for part in [&q_image, &q_text, &q_point].into_iter().flatten() {
            if part.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    got: part.len(),
                });
            }
            for (f, v) in fused.iter_mut().zip(part) {
                *f += v;
            }
        }
        Ok(Self {
            q_image,
            q_text,
            q_point,
            fused,
        })
    }

    pub fn len(&self) -> usize {
        self.fused.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fused.is_empty()
    }
}

/// Dot product of every candidate with the query. All inputs must share one
/// dimension and be unit length; outputs lie in `[-1, 1]`.
pub fn modality_scores(query: &EmbeddingVector, candidates: &[EmbeddingVector]) -> Result<Vec<f64>> {
    if !query.is_normalized() {
        return Err(Error::InvalidInput("query embedding is not normalized".into()));
    }
    candidates
        .iter()
        .map(|c| {
            if c.dim() != query.dim() {
                return Err(Error::DimensionMismatch {
                    expected: query.dim(),
                    got: c.dim(),
                });
            }
            if !c.is_normalized() {
                return Err(Error::InvalidInput("candidate embedding is not normalized".into()));
            }
            Ok(c.dot(query).clamp(-1.0, 1.0))
        })
        .collect()
}

/// `w · h + b` for every candidate embedding.
pub fn point_score(candidates: &[EmbeddingVector], w: &PointScorerWeights) -> Result<Vec<f64>> {
    candidates
        .iter()
        .map(|c| {
            if c.dim() != w.dim() {
                return Err(Error::DimensionMismatch {
                    expected: w.dim(),
                    got: c.dim(),
                });
            }
            Ok(c.values().iter().zip(&w.weights).map(|(h, w)| h * w).sum::<f64>() + w.bias)
        })
        .collect()
}

/// Candidates ordered best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// Candidate indices, best first.
    pub order: Vec<usize>,
    pub asset_ids: Vec<String>,
    pub scores: ScoreVector,
}

impl Ranking {
    pub fn best(&self) -> usize {
        self.order[0]
    }
}

/// Orders indices by descending score; ties keep ascending index.
pub fn argsort_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Scores every candidate against the image and text queries (cosine
/// similarity on unit-normalized embeddings) plus the optional point scorer
/// (on raw embeddings), and ranks by the fused sum.
pub fn rank_candidates(set: &CandidateSet, scorer: Option<&PointScorerWeights>) -> Result<Ranking> {
    set.validate()?;
    let unit: Vec<EmbeddingVector> = set
        .candidates
        .iter()
        .map(|c| c.embedding.normalize())
        .collect::<Result<_>>()?;
    let modality = |q: &Option<EmbeddingVector>| -> Result<Option<Vec<f64>>> {
        q.as_ref().map(|q| modality_scores(&q.normalize()?, &unit)).transpose()
    };
    let q_image = modality(&set.query.image)?;
    let q_text = modality(&set.query.text)?;
    let raw: Vec<EmbeddingVector> = set.candidates.iter().map(|c| c.embedding.clone()).collect();
    let q_point = scorer.map(|w| point_score(&raw, w)).transpose()?;
    if q_image.is_none() && q_text.is_none() && q_point.is_none() {
        return Err(Error::Precondition(format!(
            "object '{}' has no image, text, or point-scorer signal",
            set.object_id
        )));
    }
    let scores = ScoreVector::new(q_image, q_text, q_point)?;
    let order = argsort_descending(&scores.fused);
    Ok(Ranking {
        asset_ids: order.iter().map(|&i| set.candidates[i].asset_id.clone()).collect(),
        order,
        scores,
    })
}
