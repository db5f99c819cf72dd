//! Human annotation records, their append-only log, and QC sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::write_sorted_json;
use crate::error::{Error, IngestCode, Result};
use crate::geometry::PoseTransform;

pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const ANNOTATION_VERSION: u32 = 1;
pub const MIN_RANKED: usize = 2;
pub const MAX_RANKED: usize = 5;

fn version() -> u32 {
    ANNOTATION_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    #[serde(default = "version")]
    pub v: u32,
    pub object_id: String,
    pub best_asset_id: String,
    pub transform: PoseTransform,
    /// Runner-up assets, best first, excluding `best_asset_id`.
    pub ranking: Vec<String>,
    pub annotator_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl FieldError {
    pub fn new(field: &str, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Field-level problems with a record given the object's candidate ids.
pub fn validate_record(rec: &AnnotationRecord, candidates: &[&str]) -> Vec<FieldError> {
    let mut errs = Vec::new();
    if rec.v != ANNOTATION_VERSION {
        errs.push(FieldError::new("v", format!("unsupported version {}", rec.v)));
    }
    if rec.annotator_id.trim().is_empty() {
        errs.push(FieldError::new("annotator_id", "must not be empty"));
    }
    if !candidates.contains(&rec.best_asset_id.as_str()) {
        errs.push(FieldError::new(
            "best_asset_id",
            format!("'{}' is not a candidate of this object", rec.best_asset_id),
        ));
    }
    let n = rec.ranking.len();
    if !(MIN_RANKED..=MAX_RANKED).contains(&n) {
        errs.push(FieldError::new(
            "ranking",
            format!("must list {MIN_RANKED} to {MAX_RANKED} assets, got {n}"),
        ));
    }
    if rec.ranking.contains(&rec.best_asset_id) {
        errs.push(FieldError::new("ranking", "must not repeat the best asset"));
    }
    let unique: BTreeSet<&String> = rec.ranking.iter().collect();
    if unique.len() != n {
        errs.push(FieldError::new("ranking", "contains duplicate assets"));
    }
    for id in &rec.ranking {
        if !candidates.contains(&id.as_str()) {
            errs.push(FieldError::new(
                "ranking",
                format!("'{id}' is not a candidate of this object"),
            ));
        }
    }
    errs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredAnnotation {
    pub record_id: u64,
    #[serde(flatten)]
    pub record: AnnotationRecord,
}

/// Every record ever submitted for one scene, plus its QC reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationLog {
    pub v: u32,
    pub records: Vec<StoredAnnotation>,
    #[serde(default)]
    pub qc: BTreeMap<String, QcBatchReport>,
}

impl Default for AnnotationLog {
    fn default() -> Self {
        Self {
            v: ANNOTATION_VERSION,
            records: Vec::new(),
            qc: BTreeMap::new(),
        }
    }
}

impl AnnotationLog {
    /// Missing file means no annotations yet.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| Error::ingest(IngestCode::Annotations, format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_sorted_json(path, self)
    }

    /// Appends and returns the new record id (1-based, increasing).
    pub fn append(&mut self, record: AnnotationRecord) -> u64 {
        let id = self.records.last().map_or(1, |r| r.record_id + 1);
        self.records.push(StoredAnnotation { record_id: id, record });
        id
    }

    /// Most recent record for the object.
    pub fn latest(&self, object_id: &str) -> Option<&StoredAnnotation> {
        self.records.iter().rev().find(|r| r.record.object_id == object_id)
    }

    /// Latest record per object, ordered by object id.
    pub fn latest_records(&self) -> Vec<&StoredAnnotation> {
        let mut by_object: BTreeMap<&str, &StoredAnnotation> = BTreeMap::new();
        for r in &self.records {
            by_object.insert(&r.record.object_id, r);
        }
        by_object.into_values().collect()
    }

    pub fn get(&self, record_id: u64) -> Option<&StoredAnnotation> {
        self.records.iter().find(|r| r.record_id == record_id)
    }
}

/// Number of items inspected out of a batch: 10 %, rounded up.
pub fn qc_sample_size(batch_size: usize) -> usize {
    batch_size.div_ceil(10)
}

/// Strictly more than 98 % of inspected items passed.
pub fn qc_accepts(pass_count: usize, sampled: usize) -> bool {
    sampled > 0 && pass_count * 100 > sampled * 98
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcBatchReport {
    pub v: u32,
    pub batch_id: String,
    pub seed: u64,
    pub batch_size: usize,
    pub sampled: Vec<u64>,
    /// Reviewer verdict per sampled record id; `true` is a pass.
    #[serde(default)]
    pub verdicts: BTreeMap<u64, bool>,
    #[serde(default)]
    pub pass_count: Option<usize>,
    #[serde(default)]
    pub pass_rate: Option<f64>,
    #[serde(default)]
    pub accepted: Option<bool>,
}

/// Seeded draw of `ceil(10 %)` ids without replacement.
pub fn qc_sample(batch_id: &str, ids: &[u64], seed: u64) -> Result<QcBatchReport> {
    if ids.is_empty() {
        return Err(Error::Precondition(format!("QC batch '{batch_id}' is empty")));
    }
    let k = qc_sample_size(ids.len());
    let mut pool = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    Ok(QcBatchReport {
        v: ANNOTATION_VERSION,
        batch_id: batch_id.to_string(),
        seed,
        batch_size: ids.len(),
        sampled: pool,
        verdicts: BTreeMap::new(),
        pass_count: None,
        pass_rate: None,
        accepted: None,
    })
}

impl QcBatchReport {
    /// Completes the report. Every sampled id needs exactly one verdict.
    pub fn record_verdicts(&mut self, verdicts: BTreeMap<u64, bool>) -> Result<()> {
        let sampled: BTreeSet<u64> = self.sampled.iter().copied().collect();
        let given: BTreeSet<u64> = verdicts.keys().copied().collect();
        if sampled != given {
            let missing: Vec<_> = sampled.difference(&given).collect();
            let extra: Vec<_> = given.difference(&sampled).collect();
            return Err(Error::InvalidInput(format!(
                "verdicts must cover exactly the sampled ids (missing {missing:?}, unexpected {extra:?})"
            )));
        }
        let pass = verdicts.values().filter(|&&v| v).count();
        let n = self.sampled.len();
        self.pass_count = Some(pass);
        self.pass_rate = Some(pass as f64 / n as f64);
        self.accepted = Some(qc_accepts(pass, n));
        self.verdicts = verdicts;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn record(best: &str, ranking: &[&str]) -> AnnotationRecord {
        AnnotationRecord {
            v: 1,
            object_id: "o".into(),
            best_asset_id: best.into(),
            transform: PoseTransform::identity(),
            ranking: ranking.iter().map(|s| s.to_string()).collect(),
            annotator_id: "ann".into(),
            timestamp: None,
        }
    }

    const CANDS: [&str; 10] = ["a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9"];

    #[test]
    fn ranking_bounds() {
        assert!(validate_record(&record("a0", &["a1", "a2", "a3"]), &CANDS).is_empty());
        let six = validate_record(&record("a0", &["a1", "a2", "a3", "a4", "a5", "a6"]), &CANDS);
        assert_eq!(six[0].field, "ranking");
        assert!(!validate_record(&record("a0", &["a1"]), &CANDS).is_empty());
        let repeated = validate_record(&record("a0", &["a1", "a0"]), &CANDS);
        assert!(repeated.iter().any(|e| e.reason.contains("best")));
        assert!(!validate_record(&record("zz", &["a1", "a2"]), &CANDS).is_empty());
        assert!(!validate_record(&record("a0", &["a1", "a1"]), &CANDS).is_empty());
    }

    #[test]
    fn log_latest_wins_with_history() {
        let mut log = AnnotationLog::default();
        assert_eq!(log.append(record("a0", &["a1", "a2"])), 1);
        assert_eq!(log.append(record("a3", &["a1", "a2"])), 2);
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.latest("o").unwrap().record.best_asset_id, "a3");
        assert_eq!(log.latest_records().len(), 1);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(ANNOTATIONS_FILE);
        assert_eq!(AnnotationLog::load(&p).unwrap(), AnnotationLog::default());
        log.save(&p).unwrap();
        assert_eq!(AnnotationLog::load(&p).unwrap(), log);
        std::fs::write(&p, "{").unwrap();
        assert_eq!(
            AnnotationLog::load(&p).unwrap_err().ingest_code(),
            Some(IngestCode::Annotations)
        );
    }

    #[test]
    fn qc_sizes_and_threshold() {
        for (n, k) in [(5, 1), (100, 10), (101, 11), (10, 1), (11, 2)] {
            let ids: Vec<u64> = (1..=n).collect();
            let r = qc_sample("b", &ids, 7).unwrap();
            assert_eq!(r.sampled.len(), k as usize);
            let uniq: BTreeSet<_> = r.sampled.iter().collect();
            assert_eq!(uniq.len(), k as usize);
        }
        assert!(qc_sample("b", &[], 1).is_err());
        assert!(qc_accepts(10, 10));
        assert!(!qc_accepts(9, 10));
        assert!(qc_accepts(50, 51));
        assert!(!qc_accepts(49, 50));
    }

    #[test]
    fn verdicts_complete_the_report() {
        let ids: Vec<u64> = (1..=100).collect();
        let mut r = qc_sample("b", &ids, 3).unwrap();
        assert_eq!(r, qc_sample("b", &ids, 3).unwrap());
        let mut v: BTreeMap<u64, bool> = r.sampled.iter().map(|&i| (i, true)).collect();
        r.record_verdicts(v.clone()).unwrap();
        assert_eq!(r.accepted, Some(true));
        *v.values_mut().next().unwrap() = false;
        r.record_verdicts(v.clone()).unwrap();
        assert_eq!((r.pass_count, r.accepted), (Some(9), Some(false)));
        v.insert(1000, true);
        assert!(r.record_verdicts(v).is_err());
    }

    proptest! {
        #[test]
        fn sample_is_subset_with_ceiling_size(n in 1usize..400, seed in 0u64..1000) {
            let ids: Vec<u64> = (0..n as u64).map(|i| i * 3 + 1).collect();
            let r = qc_sample("b", &ids, seed).unwrap();
            prop_assert_eq!(r.sampled.len(), n.div_ceil(10));
            prop_assert!(r.sampled.iter().all(|s| ids.contains(s)));
        }
    }
}
