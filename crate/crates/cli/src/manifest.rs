use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: u32 = 1;

/// Written next to every command's outputs. Field meanings are stable within
/// a `format` version; see `docs/manifest.md`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration of the command.
    pub config: serde_json::Value,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) to SHA-256.
    pub outputs: BTreeMap<String, String>,
    /// Quantities computed during the run, e.g. the chosen architecture.
    pub derived: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Collects the files of one run. Names are plain file names, so nothing
/// lands outside the output directory.
pub struct OutputDir {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("creating output directory {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), hashes: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        debug_assert!(!name.contains(['/', '\\']));
        let bytes = bytes.as_ref();
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        self.hashes.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        config: &impl Serialize,
        inputs: BTreeMap<String, String>,
        derived: serde_json::Value,
    ) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            format: MANIFEST_FORMAT,
            tool: "eflab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?,
            inputs,
            outputs: self.hashes,
            derived,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("--manifest {}: {e}", path.display())))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("--manifest {}: {e}", path.display())))?;
    if m.format != MANIFEST_FORMAT {
        return Err(CliError::Config(format!("manifest format {} is not supported (expected {MANIFEST_FORMAT})", m.format)));
    }
    Ok(m)
}
