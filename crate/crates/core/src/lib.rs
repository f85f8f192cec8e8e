//! Video anomaly detection on pretrained embeddings.
//!
//! Videos arrive as embedding files listed in a JSON-lines manifest
//! ([`embedding_io`]). Frame features are pooled into one vector per video
//! ([`pooling`]), test videos are scored by their mean squared distance to
//! the `k` nearest normal train videos ([`knn`], [`video_scorer`]), or per
//! frame through overlapping windows ([`window`]). [`evaluator`] turns the
//! scores into per-class ROCAUC reports.
//!
//! With the default `parallel` feature, batch queries, windows and classes
//! are spread over the rayon thread pool. Results are bitwise identical to
//! a sequential build.

pub mod embedding_io;
pub mod error;
pub mod evaluator;
pub mod knn;
mod par;
pub mod pooling;
pub mod video_scorer;
pub mod window;

pub use embedding_io::{
    load_manifest, read_embedding, write_embedding, DatasetManifest, EmbeddingMatrix, Label, ManifestEntry, Split,
};
pub use error::{Error, Result};
pub use evaluator::{build_report, render_report, rocauc, ReportFormat, RocReport};
pub use knn::{KnnScore, TrainIndex};
pub use pooling::{even_sample_indices, pool, PoolingMode};
pub use video_scorer::{decide, run_class, Decision, ScoreRecord, ScoringConfig};
pub use window::{enumerate_windows, FrameScoreSeries, WindowConfig};
