//! Self-describing dataset directories.
//!
//! Every stage directory holds a `manifest.json` naming the config hash it
//! was produced from, the raw arrays it contains (little-endian `f64`, row
//! major) and a SHA-256 digest of every file. A directory is reused only
//! when the hash and all digests match; anything else is recomputed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub stage: String,
    pub config_hash: String,
    pub arrays: Vec<ArrayEntry>,
    pub files: Vec<FileDigest>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
    /// Always `"<f8"`.
    pub dtype: String,
    /// Byte offset inside `file`.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
    pub created_unix: u64,
}

/// SHA-256 of the canonical JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialize");
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Writes text or bytes, creating the parent directory.
pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
    text.push('\n');
    write_file(path, text)
}

/// Builds one stage directory. Files are recorded as they are written and
/// the manifest goes last, so an interrupted stage never looks complete.
pub struct DatasetWriter {
    dir: PathBuf,
    stage: String,
    config_hash: String,
    arrays: Vec<ArrayEntry>,
    files: Vec<String>,
    raw: Vec<(String, Vec<u8>)>,
}

impl DatasetWriter {
    pub fn new(dir: &Path, stage: &str, config_hash: String) -> Result<Self, CliError> {
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(CliError::io(dir))?;
        }
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stage: stage.into(),
            config_hash,
            arrays: Vec::new(),
            files: Vec::new(),
            raw: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends `data` to the raw file `file` and records its shape.
    pub fn array(&mut self, file: &str, name: &str, shape: &[usize], data: &[f64]) {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "array {name} does not match its shape");
        let slot = match self.raw.iter().position(|(f, _)| f == file) {
            Some(i) => i,
            None => {
                self.raw.push((file.into(), Vec::new()));
                self.raw.len() - 1
            }
        };
        let buf = &mut self.raw[slot].1;
        self.arrays.push(ArrayEntry {
            name: name.into(),
            file: file.into(),
            shape: shape.to_vec(),
            dtype: "<f8".into(),
            offset: buf.len() as u64,
        });
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn text(&mut self, name: &str, text: impl AsRef<[u8]>) -> Result<(), CliError> {
        write_file(&self.dir.join(name), text)?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(name.into());
        Ok(())
    }

    /// Registers a file written by other means, relative to the directory.
    pub fn record(&mut self, name: &str) {
        self.files.push(name.into());
    }

    pub fn finish(mut self) -> Result<DatasetManifest, CliError> {
        for (file, bytes) in std::mem::take(&mut self.raw) {
            write_file(&self.dir.join(&file), bytes)?;
            self.files.push(file);
        }
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            files.push(FileDigest {
                name: name.clone(),
                sha256: file_digest(&self.dir.join(name))?,
            });
        }
        let manifest = DatasetManifest {
            format_version: FORMAT_VERSION,
            stage: self.stage,
            config_hash: self.config_hash,
            arrays: self.arrays,
            files,
            provenance: Provenance {
                code_version: env!("CARGO_PKG_VERSION").into(),
                created_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            },
        };
        write_json(&self.dir.join(MANIFEST), &manifest)?;
        Ok(manifest)
    }
}

/// A stage directory that passed validation.
#[derive(Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    /// Opens `dir` if its manifest was produced from `config_hash` and every
    /// listed file still matches its digest. The error explains the miss.
    pub fn open(dir: &Path, config_hash: &str) -> Result<Self, String> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|_| "no manifest".to_string())?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| format!("unreadable manifest: {e}"))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(format!("format version {}", manifest.format_version));
        }
        if manifest.config_hash != config_hash {
            return Err("config hash mismatch".into());
        }
        for f in &manifest.files {
            let digest = file_digest(&dir.join(&f.name)).map_err(|_| format!("missing {}", f.name))?;
            if digest != f.sha256 {
                return Err(format!("{} was modified", f.name));
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn array(&self, name: &str) -> Result<(Vec<usize>, Vec<f64>), String> {
        let entry = self
            .manifest
            .arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| format!("no array {name}"))?;
        if entry.dtype != "<f8" {
            return Err(format!("array {name} has dtype {}", entry.dtype));
        }
        let bytes = fs::read(self.dir.join(&entry.file)).map_err(|e| e.to_string())?;
        let len = entry.shape.iter().product::<usize>();
        let start = entry.offset as usize;
        let end = start + 8 * len;
        let slice = bytes.get(start..end).ok_or_else(|| format!("array {name} runs past the end of {}", entry.file))?;
        let data = slice
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok((entry.shape.clone(), data))
    }

    pub fn json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T, String> {
        let text = fs::read_to_string(self.dir.join(name)).map_err(|e| e.to_string())?;
        serde_json::from_str(&text).map_err(|e| format!("{name}: {e}"))
    }
}

/// Plain CSV with a header; floats at 17 significant digits.
pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<Cell>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrays_round_trip_and_tampering_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("stage");
        let mut w = DatasetWriter::new(&dir, "demo", "abc".into()).unwrap();
        w.array("data.bin", "a", &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        w.array("data.bin", "b", &[2], &[-0.5, 1e300]);
        w.text("table.csv", csv("x,y", [vec![Cell::F(0.1), Cell::I(3)]])).unwrap();
        let m = w.finish().unwrap();
        assert_eq!(m.arrays[1].offset, 48);
        assert_eq!(m.files.len(), 2);

        let d = Dataset::open(&dir, "abc").unwrap();
        assert_eq!(d.array("b").unwrap(), (vec![2], vec![-0.5, 1e300]));
        assert_eq!(d.array("a").unwrap().1[5], 6.0);
        assert!(d.array("c").is_err());
        assert_eq!(fs::read_to_string(dir.join("table.csv")).unwrap(), "x,y\n1.0000000000000001e-1,3\n");

        assert_eq!(Dataset::open(&dir, "abd").unwrap_err(), "config hash mismatch");
        fs::write(dir.join("table.csv"), "x,y\n").unwrap();
        assert_eq!(Dataset::open(&dir, "abc").unwrap_err(), "table.csv was modified");
        fs::remove_file(dir.join(MANIFEST)).unwrap();
        assert_eq!(Dataset::open(&dir, "abc").unwrap_err(), "no manifest");
    }

    #[test]
    fn hashes_are_stable() {
        let h = config_hash(&serde_json::json!({"a": 1.5, "b": [32, 37]}));
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&serde_json::json!({"a": 1.5, "b": [32, 37]})));
        assert_ne!(h, config_hash(&serde_json::json!({"a": 1.5000000000000002, "b": [32, 37]})));
    }
}
