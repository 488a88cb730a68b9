//! Deterministic output writers: CSV / JSON-lines tables plus provenance
//! sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use twistbeam::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

/// FNV-1a 64-bit over the canonical config text.
pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in data {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub struct OutputDir {
    dir: PathBuf,
    config_hash: String,
    command: String,
    format: Format,
    tolerances: serde_json::Value,
}

impl OutputDir {
    pub fn new(
        dir: &Path,
        canonical_config: &str,
        command: &str,
        format: Format,
        tolerances: serde_json::Value,
    ) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: format!("fnv1a64:{:016x}", fnv1a64(canonical_config.as_bytes())),
            command: command.to_string(),
            format,
            tolerances,
        })
    }

    fn sidecar(&self, file: &str) -> Result<()> {
        let meta = serde_json::json!({
            "tool": "twistbeam",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config_hash": self.config_hash,
            "file": file,
            "tolerances": self.tolerances,
        });
        let path = self.dir.join(format!("{file}.meta.json"));
        fs::write(path, format!("{meta:#}\n"))?;
        Ok(())
    }

    /// Write a numeric table as CSV or JSON-lines, 17 significant digits.
    pub fn write_table(&self, stem: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let (name, body) = match self.format {
            Format::Csv => {
                let mut body = String::with_capacity(rows.len() * header.len() * 25);
                body.push_str(&header.join(","));
                body.push('\n');
                for row in rows {
                    if row.len() != header.len() {
                        return Err(Error::Config("row/header length mismatch".into()));
                    }
                    let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                    body.push_str(&cells.join(","));
                    body.push('\n');
                }
                (format!("{stem}.csv"), body)
            }
            Format::Jsonl => {
                let mut body = String::new();
                for row in rows {
                    let mut obj = serde_json::Map::new();
                    for (key, v) in header.iter().zip(row) {
                        obj.insert(key.to_string(), serde_json::json!(v));
                    }
                    body.push_str(&serde_json::Value::Object(obj).to_string());
                    body.push('\n');
                }
                (format!("{stem}.jsonl"), body)
            }
        };
        fs::write(self.dir.join(&name), body)?;
        self.sidecar(&name)?;
        Ok(self.dir.join(name))
    }

    /// Write pre-rendered text (already deterministic) with a sidecar.
    pub fn write_text(&self, name: &str, body: &str) -> Result<PathBuf> {
        fs::write(self.dir.join(name), body)?;
        self.sidecar(name)?;
        Ok(self.dir.join(name))
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        self.write_text(name, &format!("{value:#}\n"))
    }
}
