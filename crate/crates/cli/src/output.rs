//! CSV writers and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Lossless float text: 17 significant digits.
pub fn real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

/// CSV text with a header row.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(c.as_ref());
        }
        self.text.push('\n');
    }

    pub fn reals(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| real(v)).collect();
        self.row(&cells);
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub config: serde_json::Map<String, serde_json::Value>,
    pub outputs: Vec<OutputFile>,
}

/// Files written into one output directory, tracked for the manifest.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.retain(|f| f.name != name);
        self.files.push(OutputFile {
            name: name.to_string(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Io(e.to_string()))?;
        let path = self.root.join("manifest.json");
        fs::write(&path, json + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `key = value` lines, keys padded to a common width.
pub fn key_values(pairs: &[(&str, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k:<width$} = {v}");
    }
    out
}
