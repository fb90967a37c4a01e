//! CSV and JSON artifacts plus the hashed run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::solver::SolveResult;
use crate::transform::v_to_u_derivatives;

/// SHA-256 of `"blob <len>\0" ++ bytes`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub const SNAPSHOT_HEADER: &str = "t,y,x,v,u,du_dx,d2u_dx2";

/// Snapshot rows over each snapshot's trusted nodes.
pub fn snapshots_csv(res: &SolveResult) -> Result<String> {
    let mut s = String::from(SNAPSHOT_HEADER);
    s.push('\n');
    for (f, &(lo, hi)) in res.trajectory.iter().zip(&res.trust) {
        let p = v_to_u_derivatives(f, &res.geometry)?;
        for i in lo..=hi {
            let _ = writeln!(s, "{},{},{},{},{},{},{}", f.t, f.grid.y(i), p.x[i], f.v[i], p.u[i], p.du[i], p.d2u[i]);
        }
    }
    Ok(s)
}

pub fn diagnostics_csv(reports: &[DiagnosticsReport]) -> String {
    let mut s = String::from(DiagnosticsReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Generic CSV from a header and rows of numbers.
pub fn table_csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    // round-trip through Value so map keys come out sorted
    let value = serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Collects output files in memory and writes them with a manifest.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Write every file into `dir` and then `manifest.json`, which lists each
    /// file with its hash. `extra` is merged into the manifest; the timestamp
    /// lives only there.
    pub fn write(self, dir: &Path, extra: serde_json::Value, timestamp: u64) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
            entries.push(FileEntry { name: name.clone(), bytes: bytes.len(), sha256: content_hash(bytes) });
        }
        let mut manifest = serde_json::json!({
            "spec": 1,
            "generated_unix_time": timestamp,
            "files": entries,
        });
        if let (Some(m), serde_json::Value::Object(x)) = (manifest.as_object_mut(), extra) {
            for (k, v) in x {
                m.insert(k, v);
            }
        }
        let path = dir.join("manifest.json");
        fs::write(&path, to_json(&manifest)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_git_blob_convention() {
        // `printf 'hello\n' | git hash-object --stdin` uses SHA-1; the same
        // header with SHA-256 gives this value
        let h = content_hash(b"hello\n");
        assert_eq!(h.len(), 64);
        let mut raw = Sha256::new();
        raw.update(b"blob 6\0hello\n");
        assert_eq!(h, hex::encode(raw.finalize()));
        assert_ne!(content_hash(b""), content_hash(b"a"));
    }

    #[test]
    fn manifest_lists_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::default();
        a.add("x.csv", "a,b\n1,2\n");
        let m = a.write(dir.path(), serde_json::json!({"scenario": "solve"}), 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(v["files"][0]["name"], "x.csv");
        assert_eq!(v["files"][0]["sha256"], content_hash(b"a,b\n1,2\n"));
        assert_eq!(v["scenario"], "solve");
    }

    #[test]
    fn table_rows() {
        let s = table_csv("a,b", vec![vec![1.0, 2.5]]);
        assert_eq!(s, "a,b\n1,2.5\n");
    }
}
