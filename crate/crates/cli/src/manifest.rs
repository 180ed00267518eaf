//! Run manifests and atomic output files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use toml::{Table, Value};
use vlp_core::sim::SimConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `contents` to `path` through a sibling temporary file and a rename, so
/// readers never observe a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

/// Everything needed to repeat a run: the command, the seed, the effective
/// configuration and a digest of every input and output file.
pub struct Manifest {
    command: String,
    seed: u64,
    config: SimConfig,
    config_source: Option<PathBuf>,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &SimConfig, config_source: Option<&Path>) -> Self {
        Self {
            command: command.to_owned(),
            seed,
            config: config.clone(),
            config_source: config_source.map(Path::to_path_buf),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push((path.display().to_string(), sha256_hex(bytes)));
    }

    /// Writes `bytes` atomically into `dir/name` and records its digest.
    pub fn output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&dir.join(name), bytes)?;
        self.outputs.push((name.to_owned(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        let config_text = self.config.to_toml_string()?;
        let mut prov = Table::new();
        prov.insert("tool".into(), Value::from(env!("CARGO_PKG_NAME")));
        prov.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        prov.insert("core_version".into(), Value::from(vlp_core::VERSION));
        prov.insert("command".into(), Value::from(self.command.as_str()));
        prov.insert("seed".into(), Value::Integer(i64::try_from(self.seed).context("seed must fit in a signed 64-bit integer")?));
        prov.insert("config_sha256".into(), Value::from(sha256_hex(config_text.as_bytes())));
        if let Some(src) = &self.config_source {
            prov.insert("config_source".into(), Value::from(src.display().to_string()));
        }
        let digests = |files: &[(String, String)]| {
            Value::Table(files.iter().map(|(k, v)| (k.clone(), Value::from(v.as_str()))).collect())
        };
        prov.insert("inputs".into(), digests(&self.inputs));
        prov.insert("outputs".into(), digests(&self.outputs));

        let mut doc = Table::new();
        doc.insert("provenance".into(), Value::Table(prov));
        doc.insert("config".into(), Value::try_from(&self.config)?);
        Ok(toml::to_string_pretty(&doc)?)
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<()> {
        write_atomic(&dir.join(name), self.to_toml()?.as_bytes())
    }
}

/// Reads the `[config]` table of a manifest back as a run configuration.
pub fn config_from_manifest(text: &str) -> Result<SimConfig> {
    let doc: Table = toml::from_str(text).context("manifest is not valid TOML")?;
    let cfg = doc.get("config").context("manifest has no [config] table")?;
    Ok(SimConfig::from_toml_str(&toml::to_string(cfg)?)?)
}
