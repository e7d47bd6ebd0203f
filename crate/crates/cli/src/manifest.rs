//! `manifest.json`: one flat object with sorted keys. Nested values are
//! flattened to dotted keys; every artifact gets `artifact.<file>` (sha256)
//! and `artifact_bytes.<file>` entries.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub struct Manifest {
    dir: PathBuf,
    entries: BTreeMap<String, Value>,
}

fn flatten(prefix: &str, value: Value, out: &mut BTreeMap<String, Value>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&format!("{prefix}.{k}"), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.into_iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other);
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(dir: &Path, command: &str) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("command".into(), Value::from(command));
        entries.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        Self {
            dir: dir.to_path_buf(),
            entries,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.entries.insert(key.to_string(), value.into());
    }

    /// Stores `value` under `prefix`, flattened to dotted keys.
    pub fn set_flat(&mut self, prefix: &str, value: &impl Serialize) -> Result<()> {
        flatten(prefix, serde_json::to_value(value)?, &mut self.entries);
        Ok(())
    }

    /// Writes `bytes` to `name` in the output directory and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.entries.insert(format!("artifact.{name}"), Value::from(sha256_hex(bytes)));
        self.entries.insert(format!("artifact_bytes.{name}"), Value::from(bytes.len()));
        Ok(())
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(self) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(&self.entries)?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }
}
