//! Per-video pipeline: pool train videos into an index, score test videos.

use serde::{Deserialize, Serialize};

use crate::embedding_io::{DatasetManifest, Label, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::knn::TrainIndex;
use crate::par;
use crate::pooling::{pool, subsample_frames, PoolingMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScoringConfig {
    pub pooling: PoolingMode,
    pub k: usize,
    pub normalize: bool,
    /// Evenly subsample each video to at most this many frames before
    /// pooling. `None` pools every stored frame.
    pub frames: Option<usize>,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { pooling: PoolingMode::Average, k: 2, normalize: false, frames: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub video_id: String,
    pub class_name: String,
    pub score: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub video_id: String,
    pub score: f64,
    pub threshold: f64,
    pub is_anomalous: bool,
}

/// Loads and pools the embedding behind one manifest entry.
pub fn pooled_embedding(manifest: &DatasetManifest, entry: &ManifestEntry, cfg: &ScoringConfig) -> Result<Vec<f64>> {
    let mut matrix = manifest.load_embedding(entry)?;
    if let Some(n) = cfg.frames {
        matrix = subsample_frames(&matrix, n).map_err(|e| e.in_video(&entry.video_id))?;
    }
    pool(&matrix, cfg.pooling).map_err(|e| e.in_video(&entry.video_id))
}

/// Train and test entries of one class; errors if either split is empty.
pub(crate) fn class_split<'a>(
    manifest: &'a DatasetManifest,
    class_name: &str,
) -> Result<(Vec<&'a ManifestEntry>, Vec<&'a ManifestEntry>)> {
    let pick = |split| -> Vec<&'a ManifestEntry> {
        manifest
            .entries()
            .iter()
            .filter(|e| e.class_name == class_name && e.split == split)
            .collect()
    };
    let (train, test) = (pick(Split::Train), pick(Split::Test));
    if train.is_empty() && test.is_empty() {
        return Err(Error::Lookup(format!("class {class_name:?} is not in the manifest")));
    }
    if train.is_empty() {
        return Err(Error::Lookup(format!("class {class_name:?} has no train entries")));
    }
    if test.is_empty() {
        return Err(Error::Lookup(format!("class {class_name:?} has no test entries")));
    }
    if let Some(bad) = train.iter().find(|e| e.label.is_anomalous()) {
        return Err(Error::Protocol(format!("anomalous video {:?} in the train split", bad.video_id)));
    }
    Ok((train, test))
}

/// Scores every test video of `class_name` against that class's train set.
/// Records follow manifest order.
pub fn run_class(manifest: &DatasetManifest, class_name: &str, cfg: &ScoringConfig) -> Result<Vec<ScoreRecord>> {
    let (train, test) = class_split(manifest, class_name)?;

    let train_vectors = par::try_map(&train, |e| {
        pooled_embedding(manifest, e, cfg).map(|v| (e.video_id.clone(), v))
    })?;
    let index = TrainIndex::build_with(train_vectors, cfg.normalize)?;

    let queries = par::try_map(&test, |e| pooled_embedding(manifest, e, cfg))?;
    let scores = index.score_batch(&queries, cfg.k).map_err(|e| match e {
        Error::Query { position, source } => source.in_video(&test[position].video_id),
        other => other,
    })?;

    Ok(test
        .iter()
        .zip(scores)
        .map(|(e, s)| ScoreRecord {
            video_id: e.video_id.clone(),
            class_name: class_name.to_owned(),
            score: s.score,
            label: e.label,
        })
        .collect())
}

/// Runs [`run_class`] for each class, concatenating results in the given
/// class order.
pub fn run_classes(manifest: &DatasetManifest, classes: &[String], cfg: &ScoringConfig) -> Result<Vec<ScoreRecord>> {
    let per_class = par::try_map(classes, |c| run_class(manifest, c, cfg))?;
    Ok(per_class.into_iter().flatten().collect())
}

/// Flags every record whose score is strictly greater than `threshold`.
pub fn decide(records: &[ScoreRecord], threshold: f64) -> Vec<Decision> {
    records
        .iter()
        .map(|r| Decision {
            video_id: r.video_id.clone(),
            score: r.score,
            threshold,
            is_anomalous: r.score > threshold,
        })
        .collect()
}
