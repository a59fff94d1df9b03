//! Run manifests: the resolved configuration, the seeds and content hashes
//! of every dataset and output a command touched.

use std::path::Path;

use serde::Serialize;
use sha1::{Digest, Sha1};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// SHA-1 of `bytes` framed as a git blob, i.e. what `git hash-object` prints.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(git_blob_sha1(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub git_sha1: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Manifest {
        Manifest {
            manifest_version: MANIFEST_VERSION,
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: config.seeds.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let git_sha1 = hash_file(path)?;
        self.inputs.push(FileDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            git_sha1,
        });
        Ok(())
    }

    pub fn add_output(&mut self, role: &str, path: &Path) -> Result<()> {
        let git_sha1 = hash_file(path)?;
        self.outputs.push(FileDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            git_sha1,
        });
        Ok(())
    }

    /// TOML text; the config appears as a trailing `[config]` table.
    pub fn render(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot render manifest: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::export::write_text(path, &self.render()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn git_blob_hashes_match_git() {
        // `printf '' | git hash-object --stdin` and `echo hello | git hash-object --stdin`.
        assert_eq!(git_blob_sha1(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
        assert_eq!(git_blob_sha1(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    }

    #[test]
    fn manifest_records_config_seeds_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        std::fs::write(&data, "hello\n").unwrap();
        let mut m = Manifest::new("train", &RunConfig::default());
        m.add_input("dataset", &data).unwrap();
        let text = m.render().unwrap();
        assert!(text.contains("command = \"train\""));
        assert!(text.contains("ce013625030ba8dba906f756967f9e9ca394464a"));
        assert!(text.contains("seeds = [0, 1, 2, 3, 4]"));
        assert!(text.contains("[config]"));
        assert!(m.add_input("missing", &dir.path().join("nope")).is_err());
    }
}
