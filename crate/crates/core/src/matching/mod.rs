//! Candidate scoring, ranking, and the matching objectives.

mod embedding;
mod loss;
mod negatives;
mod scores;

pub use embedding::{
    decode_embeddings, encode_embeddings, sidecar_path, EmbeddingMatrix, EmbeddingVector, PointScorerWeights,
    EMBEDDING_MAGIC, NORM_TOLERANCE,
};
pub use loss::{
    auxiliary_loss, batch_objective, matching_loss, score_loss, sigmoid, total_objective, AuxLossGrad, BatchItem,
    BatchObjective, LossGrad, LossMode, Objective,
};
pub use negatives::{build_negative_set, PoolCandidate};
pub use scores::{
    argsort_descending, modality_scores, point_score, rank_candidates, Candidate, CandidateSet, Query, Ranking,
    ScoreVector,
};
