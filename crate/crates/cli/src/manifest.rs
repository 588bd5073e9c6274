//! Output tracking: every artifact a command writes is hashed and listed in
//! `manifest.json` under the output directory. No timestamps, so identical
//! runs produce bit-identical manifests.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    outputs: Vec<ManifestEntry>,
}

/// Writes artifacts under a root directory and records them for the
/// manifest.
pub struct OutputWriter {
    root: PathBuf,
    command: String,
    entries: Vec<ManifestEntry>,
}

impl OutputWriter {
    pub fn new(root: impl Into<PathBuf>, command: &str) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root,
            command: command.to_string(),
            entries: Vec::new(),
        })
    }

    /// Write one artifact at a path relative to the output root.
    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let bytes = contents.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            sha256: hex_digest(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    /// Serialize a value as pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Write `manifest.json` listing everything written so far, sorted by
    /// path.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            command: &self.command,
            outputs: self.entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
