//! Result files stamped with the config hash and seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct OutputDir {
    path: PathBuf,
    hash: String,
    seed: u64,
}

impl OutputDir {
    /// Creates the directory and echoes the effective config into it.
    pub fn create(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let out = Self {
            path: cfg.output_dir.clone(),
            hash: cfg.hash(),
            seed: cfg.seed,
        };
        fs::create_dir_all(&out.path).map_err(|e| CliError::io(&out.path, e))?;
        out.write_raw("effective_config.toml", &format!("{}{}", out.header(), cfg.to_toml()))?;
        Ok(out)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn header(&self) -> String {
        format!("# config_sha256={} seed={}\n", self.hash, self.seed)
    }

    fn write_raw(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let file = self.path.join(name);
        fs::write(&file, body).map_err(|e| CliError::io(&file, e))?;
        Ok(file)
    }

    pub fn write_csv(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        self.write_raw(name, &format!("{}{body}", self.header()))
    }

    /// Serializes `value` as an object and adds a `_meta` member.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut v = serde_json::to_value(value)?;
        let meta = json!({
            "config_sha256": self.hash,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
        });
        match &mut v {
            Value::Object(map) => {
                map.insert("_meta".into(), meta);
            }
            other => v = json!({ "_meta": meta, "data": other.take() }),
        }
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write_raw(name, &text)
    }
}

/// Drops `#` comment lines.
pub fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}
