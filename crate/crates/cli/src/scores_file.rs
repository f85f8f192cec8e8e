//! JSON-lines score files.
//!
//! The first line is a header object `{"vad_header": {...}}` that records
//! the configuration which produced the file. Every following line is one
//! record: a per-video `ScoreRecord`, or a per-frame record that adds a
//! `frame` field. Readers accept both since the extra field is ignored.

use std::io::{BufRead, Write};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use vad_core::ScoreRecord;

pub const HEADER_KEY: &str = "vad_header";

#[derive(Debug, Serialize)]
pub struct Header<'a> {
    pub tool_version: &'a str,
    pub mode: &'a str,
    pub manifest: String,
    pub classes: &'a [String],
    pub pooling: String,
    pub k: usize,
    pub normalize: bool,
    pub frames: Option<usize>,
    pub window_len: Option<usize>,
    pub window_stride: Option<usize>,
}

pub fn write_scores<W: Write, R: Serialize>(mut out: W, header: &Header<'_>, records: &[R]) -> Result<()> {
    serde_json::to_writer(&mut out, &serde_json::json!({ HEADER_KEY: header }))?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads score records, skipping the header and blank lines. Errors carry
/// the 1-based line number.
pub fn read_scores<R: BufRead>(input: R) -> Result<Vec<ScoreRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.with_context(|| format!("line {lineno}: read failed"))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("line {lineno}: malformed JSON"))?;
        if value.get(HEADER_KEY).is_some() {
            if lineno != 1 {
                bail!("line {lineno}: header allowed only on the first line");
            }
            continue;
        }
        let record: ScoreRecord =
            serde_json::from_value(value).with_context(|| format!("line {lineno}: not a score record"))?;
        if !record.score.is_finite() || record.score < 0.0 {
            bail!("line {lineno}: score {} is not a finite non-negative number", record.score);
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vad_core::Label;

    #[test]
    fn write_then_read() {
        let recs = vec![
            ScoreRecord { video_id: "a".into(), class_name: "c".into(), score: 0.25, label: Label::Normal },
            ScoreRecord { video_id: "b".into(), class_name: "c".into(), score: 3.0, label: Label::Anomalous },
        ];
        let header = Header {
            tool_version: "0",
            mode: "video",
            manifest: "m.jsonl".into(),
            classes: &[],
            pooling: "avg".into(),
            k: 2,
            normalize: false,
            frames: None,
            window_len: None,
            window_stride: None,
        };
        let mut buf = Vec::new();
        write_scores(&mut buf, &header, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("{\"vad_header\":"));
        assert_eq!(read_scores(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn frame_lines_are_accepted() {
        let text = r#"{"video_id":"a","frame":3,"score":1.5,"class_name":"c","label":"normal"}"#;
        assert_eq!(read_scores(text.as_bytes()).unwrap()[0].score, 1.5);
    }

    #[test]
    fn bad_line_is_reported_with_number() {
        let text = "{\"vad_header\":{}}\n{\"video_id\":\"a\",\"class_name\":\"c\",\"score\":1,\"label\":\"normal\"}\nnope\n";
        let err = read_scores(text.as_bytes()).unwrap_err();
        assert!(format!("{err:#}").contains("line 3"), "{err:#}");
        let missing = "{\"video_id\":\"a\",\"score\":1,\"label\":\"normal\"}";
        assert!(format!("{:#}", read_scores(missing.as_bytes()).unwrap_err()).contains("line 1"));
        let late_header = "{\"video_id\":\"a\",\"class_name\":\"c\",\"score\":1,\"label\":\"normal\"}\n{\"vad_header\":{}}";
        assert!(read_scores(late_header.as_bytes()).is_err());
    }
}
