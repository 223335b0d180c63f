//! Output directory handling: CSV with a metadata header line, JSON with a
//! schema-version field, and a manifest of content hashes for every file
//! written during a run.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects every artifact of a run and finalizes the manifest.
pub struct OutDir {
    root: PathBuf,
    config_hash: String,
    seed: u64,
    threads: usize,
    files: Vec<(String, String, usize)>,
}

impl OutDir {
    pub fn create(root: &Path, config_toml: &str, seed: u64, threads: usize) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            config_hash: sha256_hex(config_toml.as_bytes())[..12].to_string(),
            seed,
            threads,
            files: Vec::new(),
        })
    }


    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn record(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path(name), bytes)
            .with_context(|| format!("writing {}", self.path(name).display()))?;
        self.files.push((name.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(())
    }

    /// CSV with a single `#` metadata line: units plus the config hash.
    pub fn write_csv(
        &mut self,
        name: &str,
        units: &str,
        columns: &[&str],
        rows: &[Vec<f64>],
    ) -> Result<()> {
        let mut text = String::new();
        text.push_str(&format!(
            "# cavann v{}; units: {units}; config sha256:{}\n",
            crate::config::SCHEMA_VERSION,
            self.config_hash
        ));
        text.push_str(&columns.join(","));
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.record(name, text.as_bytes())
    }

    /// JSON with the top-level schema_version injected.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut doc = serde_json::to_value(value)?;
        if let Some(map) = doc.as_object_mut() {
            map.insert("schema_version".into(), json!(crate::config::SCHEMA_VERSION));
        }
        let text = serde_json::to_string_pretty(&doc)? + "\n";
        self.record(name, text.as_bytes())
    }

    /// Write the manifest listing every file emitted so far.
    pub fn finalize(&mut self) -> Result<()> {
        let manifest = json!({
            "schema_version": crate::config::SCHEMA_VERSION,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "threads": self.threads,
            "files": self.files.iter().map(|(name, hash, bytes)| json!({
                "name": name,
                "sha256": hash,
                "bytes": bytes,
            })).collect::<Vec<_>>(),
        });
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(self.path("manifest.json"), text)?;
        Ok(())
    }
}

/// Matrix rows for JSON serialization.
pub fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    nalgebra::DMatrix::from_fn(n, m, |i, j| rows[i][j])
}
