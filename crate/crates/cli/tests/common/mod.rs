#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vad_core::{write_embedding, EmbeddingMatrix};

/// Embedding files plus a manifest in a temporary directory.
pub struct Dataset {
    pub dir: tempfile::TempDir,
    lines: Vec<String>,
}

impl Dataset {
    pub fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap(), lines: Vec::new() }
    }

    pub fn add(&mut self, id: &str, class: &str, split: &str, label: &str, rows: &[Vec<f32>]) -> &mut Self {
        let path = format!("emb/{id}.emb");
        fs::create_dir_all(self.dir.path().join("emb")).unwrap();
        let m = EmbeddingMatrix::from_rows(id, rows).unwrap();
        write_embedding(&m, &self.dir.path().join(&path)).unwrap();
        self.add_entry(id, class, split, label, &path)
    }

    /// Adds a manifest line without writing any file.
    pub fn add_entry(&mut self, id: &str, class: &str, split: &str, label: &str, path: &str) -> &mut Self {
        self.lines.push(
            serde_json::json!({"video_id": id, "class_name": class, "split": split, "label": label, "path": path})
                .to_string(),
        );
        self
    }

    pub fn write_manifest(&self) -> PathBuf {
        let path = self.dir.path().join("manifest.jsonl");
        fs::write(&path, self.lines.join("\n") + "\n").unwrap();
        path
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

pub fn vad<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_vad"))
        .args(args)
        .env_remove("VAD_THREADS")
        .output()
        .expect("run vad")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
