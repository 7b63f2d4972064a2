//! Artifact writer: every file goes through `Output`, which lists it in the
//! command's manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use normwave::report::to_json;
use normwave::RealField;
use serde::{Deserialize, Serialize};

use crate::config::Resolved;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub version: String,
    pub config_hash: String,
    pub wall_time_s: f64,
    /// File names relative to the output directory, the manifest included.
    pub artifacts: Vec<String>,
}

pub struct Output {
    dir: PathBuf,
    command: String,
    arguments: Vec<String>,
    hash: String,
    config_text: String,
    artifacts: Vec<String>,
    started: Instant,
}

impl Output {
    pub fn new(
        resolved: &Resolved,
        command: &str,
        arguments: Vec<String>,
    ) -> Result<Self, CliError> {
        let dir = resolved.config.output_dir.clone();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command: command.to_string(),
            arguments,
            hash: resolved.hash.clone(),
            config_text: resolved.text.clone(),
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Name of an artifact of this command, `<command>.<suffix>`.
    pub fn name(&self, suffix: &str) -> String {
        format!("{}.{suffix}", self.command)
    }

    pub fn write(&mut self, suffix: &str, contents: &str) -> Result<String, CliError> {
        let name = self.name(suffix);
        std::fs::write(self.dir.join(&name), contents)?;
        if !self.artifacts.contains(&name) {
            self.artifacts.push(name.clone());
        }
        Ok(name)
    }

    pub fn write_json<T: Serialize>(
        &mut self,
        suffix: &str,
        value: &T,
    ) -> Result<String, CliError> {
        let text = to_json(value)?;
        self.write(suffix, &text)
    }

    pub fn write_field(&mut self, suffix: &str, field: &RealField) -> Result<String, CliError> {
        self.write(suffix, &normwave::radial::field_to_csv(field))
    }

    /// Writes the resolved configuration and the manifest.
    pub fn finish(mut self) -> Result<ExperimentManifest, CliError> {
        let text = self.config_text.clone();
        self.write("config.toml", &text)?;
        let manifest_name = self.name("manifest.json");
        self.artifacts.push(manifest_name);
        let manifest = ExperimentManifest {
            command: self.command.clone(),
            arguments: self.arguments.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.hash.clone(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            artifacts: self.artifacts.clone(),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}

/// Resolves a path stored in a JSON document relative to that document.
pub fn relative_to(doc: &Path, stored: &str) -> PathBuf {
    let p = Path::new(stored);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        doc.parent().unwrap_or(Path::new(".")).join(p)
    }
}
