//! Embedding files and dataset manifests.
//!
//! An embedding file holds one video's feature matrix: a 14-byte header
//! followed by a row-major payload of little-endian `f32` values.
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"PHNT"
//! 4       2     version (u16 LE) = 1
//! 6       4     dims D (u32 LE)
//! 10      4     frames F (u32 LE)
//! 14      4·F·D payload, frame-major
//! ```
//!
//! A manifest is a JSON-lines file, one [`ManifestEntry`] per line. Entry
//! paths are relative to the manifest's own directory.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PHNT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 14;

/// F×D feature matrix for one video. `F = 1` encodes a video-level feature.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    video_id: String,
    dims: usize,
    frames: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from a row-major buffer, checking shape and finiteness.
    pub fn new(video_id: impl Into<String>, frames: usize, dims: usize, data: Vec<f32>) -> Result<Self> {
        let video_id = video_id.into();
        if frames == 0 || dims == 0 {
            return Err(Error::Validation(format!(
                "{video_id}: shape {frames}x{dims} has an empty axis"
            )));
        }
        if frames.checked_mul(dims) != Some(data.len()) {
            return Err(Error::Validation(format!(
                "{video_id}: {} values do not fill a {frames}x{dims} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "{video_id}: non-finite value at frame {}, dim {}",
                pos / dims,
                pos % dims
            )));
        }
        Ok(Self { video_id, dims, frames, data })
    }

    pub fn from_rows(video_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let video_id = video_id.into();
        let dims = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::Validation(format!("{video_id}: ragged rows")));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(video_id, rows.len(), dims, data)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn with_video_id(mut self, video_id: impl Into<String>) -> Self {
        self.video_id = video_id.into();
        self
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.data[frame * self.dims..(frame + 1) * self.dims]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dims)
    }

    /// Serialized form, header included.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a serialized matrix. The video id is supplied by the caller
    /// since the format does not store one.
    pub fn from_bytes(video_id: impl Into<String>, bytes: &[u8]) -> Result<Self> {
        let video_id = video_id.into();
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 4 && bytes[..4] != MAGIC {
                return Err(Error::Format(format!("{video_id}: bad magic")));
            }
            return Err(Error::Corrupt(format!(
                "{video_id}: {} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::Format(format!("{video_id}: bad magic")));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("{video_id}: unsupported version {version}")));
        }
        let dims = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        let frames = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
        if dims == 0 || frames == 0 {
            return Err(Error::Validation(format!(
                "{video_id}: header declares shape {frames}x{dims}"
            )));
        }
        let payload = &bytes[HEADER_LEN..];
        let expected = u64::from(dims) * u64::from(frames) * 4;
        if payload.len() as u64 != expected {
            return Err(Error::Corrupt(format!(
                "{video_id}: header declares {expected} payload bytes, found {}",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(video_id, frames as usize, dims as usize, data)
    }
}

/// Writes `matrix` to `path`. Nothing is written if the matrix is invalid.
pub fn write_embedding(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    // Matrices are normally validated on construction, but re-check so a
    // file on disk is always readable.
    EmbeddingMatrix::new(matrix.video_id.clone(), matrix.frames, matrix.dims, matrix.data.clone())?;
    if matrix.dims > u32::MAX as usize || matrix.frames > u32::MAX as usize {
        return Err(Error::Validation(format!("{}: shape exceeds u32 header fields", matrix.video_id)));
    }
    let bytes = matrix.to_bytes();
    let storage = |source| Error::Storage { path: path.to_owned(), source };
    let mut file = fs::File::create(path).map_err(storage)?;
    file.write_all(&bytes).map_err(storage)?;
    file.flush().map_err(storage)
}

/// Reads an embedding file. The video id defaults to the file stem.
pub fn read_embedding(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|source| Error::Storage { path: path.to_owned(), source })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    EmbeddingMatrix::from_bytes(stem, &bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub class_name: String,
    pub split: Split,
    pub label: Label,
    /// Path as written in the manifest.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    base_dir: PathBuf,
}

impl DatasetManifest {
    /// Validates entries against the manifest invariants.
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.video_id.as_str()) {
                return Err(Error::Validation(format!("duplicate video_id {:?}", e.video_id)));
            }
            if e.split == Split::Train && e.label == Label::Anomalous {
                return Err(Error::Protocol(format!(
                    "train entry {:?} is labeled anomalous; the train split must be normal-only",
                    e.video_id
                )));
            }
        }
        Ok(Self { entries, base_dir: base_dir.into() })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    /// Class names in lexicographic order.
    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.entries.iter().map(|e| e.class_name.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn class_entries<'a>(
        &'a self,
        class_name: &'a str,
        split: Split,
    ) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.entries
            .iter()
            .filter(move |e| e.class_name == class_name && e.split == split)
    }

    /// Reads the embedding behind `entry`, tagging it with the entry's id.
    pub fn load_embedding(&self, entry: &ManifestEntry) -> Result<EmbeddingMatrix> {
        read_embedding(&self.resolve(entry))
            .map(|m| m.with_video_id(entry.video_id.clone()))
            .map_err(|e| e.in_video(&entry.video_id))
    }

    /// Reads every referenced embedding and checks that they share one
    /// dimension. Returns one diagnostic per failing entry.
    pub fn check_files(&self) -> Vec<Error> {
        let mut problems = Vec::new();
        let mut dims: Option<(usize, &str)> = None;
        for entry in &self.entries {
            match self.load_embedding(entry) {
                Ok(m) => match dims {
                    None => dims = Some((m.dims(), &entry.video_id)),
                    Some((d, first)) if d != m.dims() => problems.push(
                        Error::Validation(format!(
                            "dimension {} differs from {d} (first seen on {first})",
                            m.dims()
                        ))
                        .in_video(&entry.video_id),
                    ),
                    Some(_) => {}
                },
                Err(e) => problems.push(e),
            }
        }
        problems
    }
}

/// Parses manifest text. Blank lines are skipped; unknown fields ignored.
pub fn parse_manifest(text: &str, base_dir: impl Into<PathBuf>) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    DatasetManifest::new(entries, base_dir)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|source| Error::Storage { path: path.to_owned(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, split: Split, label: Label) -> String {
        serde_json::json!({
            "video_id": id, "class_name": "c", "split": split, "label": label, "path": format!("{id}.emb")
        })
        .to_string()
    }

    #[test]
    fn single_value_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.emb");
        let m = EmbeddingMatrix::new("one", 1, 1, vec![0.0]).unwrap();
        write_embedding(&m, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        assert_eq!(&bytes[..4], b"PHNT");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[1, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[1, 0, 0, 0]);
        assert_eq!(read_embedding(&path).unwrap(), m);
    }

    #[test]
    fn two_by_three_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.emb");
        let data = vec![1.5, -0.0, f32::MIN_POSITIVE, 3.25e-7, f32::MAX, -42.0];
        let m = EmbeddingMatrix::new("v", 2, 3, data.clone()).unwrap();
        write_embedding(&m, &path).unwrap();
        let back = read_embedding(&path).unwrap();
        let bits = |d: &[f32]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.as_slice()), bits(&data));
        assert_eq!((back.frames(), back.dims()), (2, 3));
        assert_eq!(back.row(1), &data[3..]);
    }

    #[test]
    fn nan_is_rejected_and_nothing_written() {
        assert!(matches!(
            EmbeddingMatrix::new("x", 1, 2, vec![1.0, f32::NAN]),
            Err(Error::Validation(_))
        ));
        // Bypass the constructor to exercise write-time validation.
        let bad = EmbeddingMatrix { video_id: "x".into(), dims: 2, frames: 1, data: vec![1.0, f32::INFINITY] };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.emb");
        assert!(matches!(write_embedding(&bad, &path), Err(Error::Validation(_))));
        assert!(!path.exists());
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let mut bytes = EmbeddingMatrix::new("v", 1, 2, vec![1.0, 2.0]).unwrap().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(EmbeddingMatrix::from_bytes("v", &bytes), Err(Error::Format(_))));
    }

    #[test]
    fn wrong_version_is_format_error() {
        let mut bytes = EmbeddingMatrix::new("v", 1, 2, vec![1.0, 2.0]).unwrap().to_bytes();
        bytes[4] = 2;
        assert!(matches!(EmbeddingMatrix::from_bytes("v", &bytes), Err(Error::Format(_))));
    }

    #[test]
    fn oversized_declared_shape_is_corruption() {
        let mut bytes = EmbeddingMatrix::new("v", 2, 2, vec![1.0; 4]).unwrap().to_bytes();
        bytes[10..14].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(EmbeddingMatrix::from_bytes("v", &bytes), Err(Error::Corrupt(_))));
        // trailing garbage is also a length mismatch
        let mut bytes = EmbeddingMatrix::new("v", 1, 1, vec![1.0]).unwrap().to_bytes();
        bytes.push(0);
        assert!(matches!(EmbeddingMatrix::from_bytes("v", &bytes), Err(Error::Corrupt(_))));
    }

    #[test]
    fn inf_in_payload_is_validation_error() {
        let mut bytes = EmbeddingMatrix::new("v", 1, 1, vec![1.0]).unwrap().to_bytes();
        bytes[14..18].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(EmbeddingMatrix::from_bytes("v", &bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn manifest_happy_path() {
        let text = [
            entry("a", Split::Train, Label::Normal),
            entry("b", Split::Train, Label::Normal),
            entry("c", Split::Train, Label::Normal),
            String::new(),
            entry("d", Split::Test, Label::Normal),
            entry("e", Split::Test, Label::Anomalous),
        ]
        .join("\n");
        let m = parse_manifest(&text, "/data").unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(m.resolve(&m.entries()[0]), PathBuf::from("/data/a.emb"));
        assert_eq!(m.class_entries("c", Split::Test).count(), 2);
    }

    #[test]
    fn manifest_ignores_unknown_fields() {
        let line = r#"{"video_id":"a","class_name":"c","split":"train","label":"normal","path":"a.emb","fps":30}"#;
        assert_eq!(parse_manifest(line, "").unwrap().len(), 1);
    }

    #[test]
    fn manifest_rejects_anomalous_train() {
        let text = entry("a", Split::Train, Label::Anomalous);
        assert!(matches!(parse_manifest(&text, ""), Err(Error::Protocol(_))));
    }

    #[test]
    fn manifest_rejects_duplicate_ids() {
        let text = [entry("a", Split::Train, Label::Normal), entry("a", Split::Test, Label::Normal)].join("\n");
        assert!(matches!(parse_manifest(&text, ""), Err(Error::Validation(_))));
    }

    #[test]
    fn manifest_parse_error_reports_line() {
        let text = [entry("a", Split::Train, Label::Normal), "{not json".to_string()].join("\n");
        match parse_manifest(&text, "") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_split = r#"{"video_id":"a","class_name":"c","split":"val","label":"normal","path":"a"}"#;
        assert!(matches!(parse_manifest(bad_split, ""), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn check_files_reports_missing_and_mismatched_dims() {
        let dir = tempfile::tempdir().unwrap();
        write_embedding(&EmbeddingMatrix::new("a", 1, 2, vec![0.0; 2]).unwrap(), &dir.path().join("a.emb")).unwrap();
        write_embedding(&EmbeddingMatrix::new("b", 1, 3, vec![0.0; 3]).unwrap(), &dir.path().join("b.emb")).unwrap();
        let text = [
            entry("a", Split::Train, Label::Normal),
            entry("b", Split::Test, Label::Normal),
            entry("c", Split::Test, Label::Anomalous),
        ]
        .join("\n");
        let m = parse_manifest(&text, dir.path()).unwrap();
        let problems = m.check_files();
        assert_eq!(problems.len(), 2);
        let ids: Vec<_> = problems
            .iter()
            .map(|e| match e {
                Error::Video { video_id, .. } => video_id.as_str(),
                _ => "",
            })
            .collect();
        assert_eq!(ids, ["b", "c"]);
        assert!(matches!(problems[1].root(), Error::Storage { .. }));
    }
}
