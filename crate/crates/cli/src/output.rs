//! Output files. Every CSV starts with `#` metadata lines and every JSON
//! document wraps its payload as `{"metadata": ..., "result": ...}`.

use std::fs;
use std::path::{Path, PathBuf};

use adiacz::device::HilbertLabel;
use adiacz::io::Table;
use adiacz::presets::DevicePreset;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub preset: String,
    /// SHA-256 of the preset's canonical JSON.
    pub preset_sha256: String,
    pub seed: u64,
}

impl Metadata {
    pub fn new(command: &str, preset: &DevicePreset, seed: u64) -> Self {
        Metadata {
            tool: "adiacz".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            preset: preset.name.clone(),
            preset_sha256: preset_hash(preset),
            seed,
        }
    }

    fn comments(&self) -> Vec<String> {
        vec![
            format!("{} {}", self.tool, self.version),
            format!("command {}", self.command),
            format!("preset {}", self.preset),
            format!("preset_sha256 {}", self.preset_sha256),
            format!("seed {}", self.seed),
        ]
    }
}

pub fn preset_hash(preset: &DevicePreset) -> String {
    Sha256::digest(preset.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Column-name form of a state label, e.g. `11_0`.
pub fn column(label: HilbertLabel) -> String {
    format!("{}{}_{}", label.n1, label.n2, label.nc)
}

pub struct Writer {
    dir: PathBuf,
    meta: Metadata,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, meta: Metadata) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
        Ok(Writer { dir: dir.to_path_buf(), meta, written: Vec::new() })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Config(format!("writing {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, mut table: Table) -> Result<(), CliError> {
        let mut comments = self.meta.comments();
        comments.append(&mut table.comments);
        table.comments = comments;
        self.write(name, &table.to_csv())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            metadata: &'a Metadata,
            result: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Doc { metadata: &self.meta, result })
            .map_err(|e| CliError::Config(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes a file without the metadata wrapper, for documents that must
    /// stay loadable as inputs (e.g. a fitted preset).
    pub fn raw(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, text)
    }
}
