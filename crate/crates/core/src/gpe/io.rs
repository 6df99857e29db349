//! Field snapshots on disk: `run-<tag>/snap-<index>.bin` holds little-endian
//! `f64` pairs `(Re, Im)`, and `snap-<index>.json` the header.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub grid: Grid,
    pub t: f64,
    pub index: usize,
    pub g: f64,
    /// Free-form run parameters.
    pub parameters: serde_json::Value,
}

/// `(binary, header)` paths of snapshot `index` of run `tag` under `root`.
pub fn snapshot_paths(root: &Path, tag: &str, index: usize) -> (PathBuf, PathBuf) {
    let dir = root.join(format!("run-{tag}"));
    (dir.join(format!("snap-{index:05}.bin")), dir.join(format!("snap-{index:05}.json")))
}

pub fn write_snapshot(root: &Path, tag: &str, header: &SnapshotHeader, psi: &[Complex64]) -> Result<PathBuf> {
    header.grid.check(psi.len())?;
    let (bin, json) = snapshot_paths(root, tag, header.index);
    if let Some(dir) = bin.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = Vec::with_capacity(16 * psi.len());
    for v in psi {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(&bin, bytes)?;
    let text = serde_json::to_string_pretty(header).map_err(|e| Error::Snapshot(e.to_string()))?;
    fs::write(json, text)?;
    Ok(bin)
}

pub fn read_snapshot(root: &Path, tag: &str, index: usize) -> Result<(SnapshotHeader, Vec<Complex64>)> {
    let (bin, json) = snapshot_paths(root, tag, index);
    let header: SnapshotHeader =
        serde_json::from_str(&fs::read_to_string(json)?).map_err(|e| Error::Snapshot(e.to_string()))?;
    let bytes = fs::read(bin)?;
    if bytes.len() != 16 * header.grid.points {
        return Err(Error::Snapshot(format!(
            "expected {} bytes for {} points, found {}",
            16 * header.grid.points,
            header.grid.points,
            bytes.len()
        )));
    }
    let word = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let psi = bytes.chunks_exact(16).map(|c| Complex64::new(word(&c[..8]), word(&c[8..]))).collect();
    Ok((header, psi))
}
