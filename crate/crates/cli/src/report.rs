use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Describes every other file in the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
}

/// Collects outputs and writes the manifest last.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    /// Creates `dir`, clearing files listed by a previous manifest.
    ///
    /// Anything else already present is left alone and reported as an error,
    /// so the finished manifest always covers the whole directory.
    pub fn prepare(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let old = dir.join(MANIFEST);
        if old.exists() {
            let text = fs::read_to_string(&old).map_err(|e| CliError::io(&old, e))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Io {
                path: old.display().to_string(),
                message: format!("unreadable previous manifest: {e}"),
            })?;
            for f in &m.files {
                let p = dir.join(&f.path);
                if p.is_file() {
                    fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
                }
            }
            fs::remove_file(&old).map_err(|e| CliError::io(&old, e))?;
        }
        let mut leftovers = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        if leftovers.next().is_some() {
            return Err(CliError::DirtyOutput(dir.display().to_string()));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.dir.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
            path: name.to_string(),
            message: e.to_string(),
        })?;
        self.write(name, (text + "\n").as_bytes())
    }

    pub fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<Manifest, CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            files: self.files.clone(),
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
        let p = self.dir.join(MANIFEST);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        Ok(m)
    }
}
