use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scores::{Candidate, CandidateSet};
use crate::error::{Error, Result};

/// A candidate available for negative sampling, tagged with its scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolCandidate {
    pub scene_id: String,
    pub candidate: Candidate,
}

/// The true candidate plus `n` candidates drawn from other scenes.
///
/// Sampling is a partial Fisher–Yates shuffle over pool indices driven by
/// `ChaCha8Rng::seed_from_u64(seed)`; one more draw from `0..=n` picks where
/// the truth is inserted.
pub fn build_negative_set(set: &CandidateSet, pool: &[PoolCandidate], n: usize, seed: u64) -> Result<CandidateSet> {
    if n == 0 {
        return Err(Error::Precondition("negative set needs n >= 1".into()));
    }
    let truth = set
        .truth_index
        .ok_or_else(|| Error::Precondition(format!("object '{}' has no truth index", set.object_id)))?;
    set.validate()?;
    if let Some(p) = pool.iter().find(|p| p.scene_id == set.scene_id) {
        return Err(Error::Precondition(format!(
            "pool candidate '{}' comes from the object's own scene '{}'",
            p.candidate.asset_id, set.scene_id
        )));
    }
    if pool.len() < n {
        return Err(Error::Precondition(format!(
            "pool has {} candidates, {n} requested",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    for i in 0..n {
        let j = rng.gen_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut candidates: Vec<Candidate> = idx[..n].iter().map(|&i| pool[i].candidate.clone()).collect();
    let pos = rng.gen_range(0..=n);
    candidates.insert(pos, set.candidates[truth].clone());
    Ok(CandidateSet {
        scene_id: set.scene_id.clone(),
        object_id: set.object_id.clone(),
        candidates,
        truth_index: Some(pos),
        query: set.query.clone(),
    })
}
