//! Per-frame scoring through overlapping fixed-length windows.
//!
//! Every window of every train video is pooled into one train row. A test
//! video is cut the same way, each window gets a kNN score, and a frame's
//! score is the mean over the windows that contain it.

use std::ops::Range;

use serde::Serialize;

use crate::embedding_io::{DatasetManifest, EmbeddingMatrix, Label};
use crate::error::{Error, Result};
use crate::knn::TrainIndex;
use crate::par;
use crate::pooling::{pool_rows, PoolingMode};
use crate::video_scorer::{class_split, ScoringConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WindowConfig {
    len: usize,
    stride: usize,
}

impl WindowConfig {
    /// Requires `1 <= stride <= len`.
    pub fn new(len: usize, stride: usize) -> Result<Self> {
        if stride == 0 || stride > len {
            return Err(Error::Contract(format!(
                "window stride must satisfy 1 <= stride <= len, got len={len} stride={stride}"
            )));
        }
        Ok(Self { len, stride })
    }

    pub fn length(&self) -> usize {
        self.len
    }

    pub fn stride(&self) -> usize {
        self.stride
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { len: 16, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameScoreSeries {
    pub video_id: String,
    pub scores: Vec<f64>,
}

/// One line of a frame-score file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameScoreRecord {
    pub video_id: String,
    pub frame: usize,
    pub score: f64,
    pub class_name: String,
    pub label: Label,
}

/// Half-open windows `[i·S, i·S+L)` that fit in `frames`. A video shorter
/// than `L` gets one window `[0, frames)`. If the stride leaves a tail
/// uncovered, a final window `[frames−L, frames)` is appended.
#[allow(clippy::single_range_in_vec_init)]
pub fn enumerate_windows(frames: usize, cfg: WindowConfig) -> Vec<Range<usize>> {
    if frames == 0 {
        return Vec::new();
    }
    if frames < cfg.len {
        return vec![0..frames];
    }
    let count = (frames - cfg.len) / cfg.stride + 1;
    let mut out: Vec<Range<usize>> = (0..count).map(|i| i * cfg.stride..i * cfg.stride + cfg.len).collect();
    if out.last().is_some_and(|w| w.end < frames) {
        out.push(frames - cfg.len..frames);
    }
    out
}

/// Pools each window of `video` into one vector.
pub fn window_embeddings(video: &EmbeddingMatrix, cfg: WindowConfig, mode: PoolingMode) -> Result<Vec<Vec<f64>>> {
    let dims = video.dims();
    let data = video.as_slice();
    enumerate_windows(video.frames(), cfg)
        .into_iter()
        .map(|w| pool_rows(&data[w.start * dims..w.end * dims], dims, mode))
        .collect()
}

/// One index row per window per train video, ids `"<video_id>@<start>"`.
pub fn build_window_index(
    train_videos: &[EmbeddingMatrix],
    cfg: WindowConfig,
    mode: PoolingMode,
    normalize: bool,
) -> Result<TrainIndex> {
    if train_videos.is_empty() {
        return Err(Error::Validation("window index needs at least one train video".into()));
    }
    let per_video = par::try_map(train_videos, |v| {
        let starts = enumerate_windows(v.frames(), cfg).into_iter().map(|w| w.start);
        window_embeddings(v, cfg, mode)
            .map(|embs| starts.zip(embs).map(|(s, e)| (format!("{}@{s}", v.video_id()), e)).collect::<Vec<_>>())
            .map_err(|e| e.in_video(v.video_id()))
    })?;
    TrainIndex::build_with(per_video.into_iter().flatten().collect(), normalize)
}

/// Frame `t` gets the mean score of every window containing it. Windows are
/// summed in the order given.
pub fn aggregate_frame_scores(frames: usize, windows: &[Range<usize>], window_scores: &[f64]) -> Vec<f64> {
    assert_eq!(windows.len(), window_scores.len(), "one score per window");
    let mut sums = vec![0.0f64; frames];
    let mut counts = vec![0usize; frames];
    for (w, &s) in windows.iter().zip(window_scores) {
        for t in w.clone() {
            sums[t] += s;
            counts[t] += 1;
        }
    }
    sums.iter().zip(&counts).map(|(&s, &c)| s / c as f64).collect()
}

/// Scores every frame of `video` against a window index.
pub fn score_frames(
    index: &TrainIndex,
    video: &EmbeddingMatrix,
    cfg: WindowConfig,
    mode: PoolingMode,
    k: usize,
) -> Result<FrameScoreSeries> {
    if video.dims() != index.dims() {
        return Err(Error::Contract(format!(
            "video {} has dimension {}, index has {}",
            video.video_id(),
            video.dims(),
            index.dims()
        )));
    }
    let windows = enumerate_windows(video.frames(), cfg);
    let embeddings = window_embeddings(video, cfg, mode)?;
    let window_scores: Vec<f64> = index.score_batch(&embeddings, k)?.into_iter().map(|s| s.score).collect();
    Ok(FrameScoreSeries {
        video_id: video.video_id().to_owned(),
        scores: aggregate_frame_scores(video.frames(), &windows, &window_scores),
    })
}

/// Window-mode counterpart of [`crate::video_scorer::run_class`]. Frame
/// records inherit the video's label. `cfg.frames` is ignored.
pub fn run_class_windows(
    manifest: &DatasetManifest,
    class_name: &str,
    window: WindowConfig,
    cfg: &ScoringConfig,
) -> Result<Vec<FrameScoreRecord>> {
    let (train, test) = class_split(manifest, class_name)?;
    let train_videos = par::try_map(&train, |e| manifest.load_embedding(e))?;
    let index = build_window_index(&train_videos, window, cfg.pooling, cfg.normalize)?;

    let series = par::try_map(&test, |e| {
        let video = manifest.load_embedding(e)?;
        score_frames(&index, &video, window, cfg.pooling, cfg.k).map_err(|err| err.in_video(&e.video_id))
    })?;

    Ok(test
        .iter()
        .zip(series)
        .flat_map(|(e, s)| {
            s.scores.into_iter().enumerate().map(move |(frame, score)| FrameScoreRecord {
                video_id: e.video_id.clone(),
                frame,
                score,
                class_name: class_name.to_owned(),
                label: e.label,
            })
        })
        .collect())
}

pub fn run_classes_windows(
    manifest: &DatasetManifest,
    classes: &[String],
    window: WindowConfig,
    cfg: &ScoringConfig,
) -> Result<Vec<FrameScoreRecord>> {
    let per_class = par::try_map(classes, |c| run_class_windows(manifest, c, window, cfg))?;
    Ok(per_class.into_iter().flatten().collect())
}
