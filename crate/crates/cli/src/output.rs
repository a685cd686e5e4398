//! Output directory handling and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub molecule: Option<MoleculeRef>,
    /// Schedule, grid and diffusion parameters of the run.
    pub parameters: BTreeMap<String, serde_json::Value>,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    /// SHA-256 over the sorted `name:hash` lines of `outputs`.
    pub output_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MoleculeRef {
    pub source: String,
    pub sha256: String,
}

/// Collects the files of one run.
pub struct OutDir {
    dir: PathBuf,
    command: String,
    files: BTreeMap<String, String>,
    params: BTreeMap<String, serde_json::Value>,
    molecule: Option<MoleculeRef>,
}

impl OutDir {
    pub fn create(dir: &Path, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            files: BTreeMap::new(),
            params: BTreeMap::new(),
            molecule: None,
        })
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(key.into(), serde_json::to_value(value).expect("serializable parameter"));
    }

    pub fn molecule(&mut self, source: &str, text: &str) {
        self.molecule = Some(MoleculeRef { source: source.into(), sha256: sha256_hex(text.as_bytes()) });
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.insert(name.into(), sha256_hex(contents));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable report");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<RunManifest, CliError> {
        let joined: String = self.files.iter().map(|(k, v)| format!("{k}:{v}\n")).collect();
        let manifest = RunManifest {
            command: self.command,
            molecule: self.molecule,
            parameters: self.params,
            output_hash: sha256_hex(joined.as_bytes()),
            outputs: self.files,
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
