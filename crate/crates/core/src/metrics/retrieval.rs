use std::fmt::Debug;

use crate::error::{Error, Result};

/// Fraction of objects whose true candidate appears among the first `k`
/// entries of its ranking.
pub fn topk_accuracy<T: PartialEq + Debug>(rankings: &[Vec<T>], truths: &[T], k: usize) -> Result<f64> {
    if rankings.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: rankings.len(),
            got: truths.len(),
        });
    }
    if rankings.is_empty() {
        return Err(Error::Precondition("top-k accuracy over zero objects".into()));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let mut hits = 0usize;
    for (ranking, truth) in rankings.iter().zip(truths) {
        let pos = ranking
            .iter()
            .position(|c| c == truth)
            .ok_or_else(|| Error::InvalidInput(format!("truth {truth:?} is not among the ranked candidates")))?;
        if pos < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / rankings.len() as f64)
}
