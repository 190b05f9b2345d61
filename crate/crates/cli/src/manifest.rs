//! Run manifests and atomic output writes.
//!
//! Every command leaves three files next to its `--out` stem: the CSV,
//! a JSON mirror with the resolved settings embedded, and a manifest
//! that records enough to replay the run bit-identically.

use antihom::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const ARTIFACT_VERSION: &str = "1";
pub const RNG_ALGORITHM: &str = "philox4x64-10";

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub rng_algorithm: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = crate::config::read_text(path)?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("manifest {} does not parse: {e}", path.display())))?;
    if manifest.artifact_version != ARTIFACT_VERSION {
        return Err(Error::Config(format!(
            "manifest artifact version {:?} is not supported (want {ARTIFACT_VERSION:?})",
            manifest.artifact_version
        )));
    }
    if manifest.rng_algorithm != RNG_ALGORITHM {
        return Err(Error::Config(format!(
            "manifest rng algorithm {:?} is not supported (want {RNG_ALGORITHM:?})",
            manifest.rng_algorithm
        )));
    }
    Ok(manifest)
}

/// Output paths derived from one stem: `<stem>.csv`, `<stem>.json`,
/// `<stem>.manifest.json`.
pub struct OutPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub manifest: PathBuf,
}

impl OutPaths {
    pub fn new(out: Option<&Path>, default_stem: &str) -> OutPaths {
        let base = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(default_stem));
        let stem = base.with_extension("");
        OutPaths {
            csv: stem.with_extension("csv"),
            json: stem.with_extension("json"),
            manifest: stem.with_extension("manifest.json"),
        }
    }
}

/// Write via a temporary file in the same directory so readers never
/// observe a half-written output.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut file = tempfile::NamedTempFile::new_in(&parent).map_err(|e| {
        Error::Config(format!(
            "cannot create temporary file in {}: {e}",
            parent.display()
        ))
    })?;
    file.write_all(contents.as_bytes())
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    file.persist(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Write the manifest for a finished run.
pub fn write_manifest<T: Serialize>(
    paths: &OutPaths,
    command: &str,
    seed: u64,
    settings: &T,
) -> Result<()> {
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.into(),
        command: command.into(),
        rng_algorithm: RNG_ALGORITHM.into(),
        seed,
        config: serde_json::to_value(settings)
            .map_err(|e| Error::Config(format!("cannot serialize settings: {e}")))?,
        outputs: vec![
            paths.csv.display().to_string(),
            paths.json.display().to_string(),
        ],
    };
    write_atomic(&paths.manifest, &to_json_pretty(&manifest)?)
}
