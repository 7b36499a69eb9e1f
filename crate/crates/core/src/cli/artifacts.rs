//! Files on disk: dataset directories, JSON/CSV writers and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{hex, RunConfig};
use crate::dataprep::{CellSeries, Normalizer};
use crate::error::{Error, Result};

pub const SERIES_DIR: &str = "series";
pub const FLEET_FILE: &str = "fleet.json";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Wall-clock measurements; the only output allowed to differ between runs.
pub const TIMING_FILE: &str = "timing.json";

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

/// Renders with `render` into memory, then writes the file.
pub fn write_with(
    path: &Path,
    render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    render(&mut buf).map_err(|e| Error::io(path, e))?;
    write_bytes(path, &buf)
}

/// Fleet-level statistics written next to the per-cell series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetInfo {
    pub cells: Vec<String>,
    /// Nominal capacity and mean cycle-0 resistance over all cells.
    pub normalizer: Normalizer,
}

/// Writes `series/<cell>.csv` for every cell plus the fleet summary.
pub fn save_dataset(dir: &Path, cells: &[CellSeries]) -> Result<FleetInfo> {
    let series_dir = dir.join(SERIES_DIR);
    create_dir(&series_dir)?;
    for c in cells {
        c.save(series_dir.join(format!("{}.csv", c.cell_id)))?;
    }
    let initial: Vec<f64> = cells.iter().map(|c| c.resistance[0]).collect();
    let info = FleetInfo {
        cells: cells.iter().map(|c| c.cell_id.clone()).collect(),
        normalizer: Normalizer::from_initial_resistances(&initial)?,
    };
    write_json(&dir.join(FLEET_FILE), &info)?;
    Ok(info)
}

/// Loads every `*.csv` under `dir/series` (or `dir` itself when it has no
/// `series` subdirectory), sorted by cell id.
pub fn load_dataset(dir: &Path) -> Result<Vec<CellSeries>> {
    let series_dir = if dir.join(SERIES_DIR).is_dir() {
        dir.join(SERIES_DIR)
    } else {
        dir.to_path_buf()
    };
    let entries = fs::read_dir(&series_dir).map_err(|e| Error::io(&series_dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(&series_dir, e))?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no series CSV files in {}",
            series_dir.display()
        )));
    }
    paths.iter().map(|p| load_series_file(p)).collect()
}

/// One series file; the cell id is the file stem.
pub fn load_series_file(path: &Path) -> Result<CellSeries> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("bad series file name {}", path.display())))?;
    CellSeries::load(id, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

/// Provenance of an output directory. Holds no timestamps, so a re-run with
/// the same config and seed reproduces it byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub crate_version: String,
    pub config: RunConfig,
    /// Every output file except the manifest and timing files.
    pub files: Vec<ManifestEntry>,
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            out.push(p.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

pub fn write_manifest(dir: &Path, command: &str, config: &RunConfig) -> Result<Manifest> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let files = files
        .into_iter()
        .filter(|f| f != Path::new(MANIFEST_FILE) && f != Path::new(TIMING_FILE))
        .map(|f| {
            let bytes = read_bytes(&dir.join(&f))?;
            Ok(ManifestEntry {
                file: f.to_string_lossy().replace('\\', "/"),
                sha256: hex(&Sha256::digest(&bytes)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let canonical = RunConfig {
        paths: Default::default(),
        ..config.clone()
    };
    let manifest = Manifest {
        command: command.to_string(),
        config_sha256: config.hash(),
        seed: config.seed,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config: canonical,
        files,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
