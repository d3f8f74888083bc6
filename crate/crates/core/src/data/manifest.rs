//! Dataset manifest: maps scene names to annotation files.
//!
//! ```toml
//! [[scene]]
//! name = "ETH-Uni"
//! files = ["eth/biwi_eth.txt"]
//! format = "tsv"          # optional preset, default "canonical"
//! columns = "frame,id,x,y" # optional, overrides the preset column order
//! frame_step = 6          # optional, inferred when absent
//! ```
//!
//! Relative file paths are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scene::{load_scene_files, FormatSpec, Scene};
use crate::CoreError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub name: String,
    pub files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_step: Option<i64>,
}

impl SceneEntry {
    pub fn format_spec(&self) -> Result<FormatSpec, CoreError> {
        let mut spec = FormatSpec::preset(self.format.as_deref().unwrap_or("canonical"))?;
        if let Some(cols) = &self.columns {
            spec.columns = FormatSpec::parse_columns(cols)?;
        }
        spec.frame_step = self.frame_step;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "scene", default)]
    pub scenes: Vec<SceneEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CoreError> {
        let mut manifest: Manifest = toml::from_str(text).map_err(|e| CoreError::Config(format!("manifest: {e}")))?;
        manifest.base_dir = base_dir.to_path_buf();
        let mut seen = std::collections::BTreeSet::new();
        for entry in &manifest.scenes {
            if !seen.insert(entry.name.as_str()) {
                return Err(CoreError::Config(format!(
                    "manifest lists scene {:?} twice",
                    entry.name
                )));
            }
            if entry.files.is_empty() {
                return Err(CoreError::Config(format!("scene {:?} has no files", entry.name)));
            }
            entry.format_spec()?;
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base_dir.join(file)
        }
    }

    /// Loads every scene in manifest order.
    pub fn load_scenes(&self) -> Result<Vec<Scene>, CoreError> {
        self.scenes
            .iter()
            .map(|entry| {
                let paths: Vec<PathBuf> = entry.files.iter().map(|f| self.resolve(f)).collect();
                load_scene_files(&entry.name, &paths, &entry.format_spec()?)
            })
            .collect()
    }

    /// Adds or replaces the entry with the same name.
    pub fn upsert(&mut self, entry: SceneEntry) {
        match self.scenes.iter_mut().find(|e| e.name == entry.name) {
            Some(existing) => *existing = entry,
            None => self.scenes.push(entry),
        }
    }
}
