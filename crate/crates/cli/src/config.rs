//! Run configuration.
//!
//! ```toml
//! manifest = "data/manifest.toml"   # relative to this file
//! seeds = [0, 1, 2]
//! output_dir = "results"
//!
//! [protocol]
//! observed = 8
//! horizon = 12
//! test_scenes = []                 # empty runs every fold
//! workers = 0                      # 0 uses every core
//!
//! [[model]]
//! kind = "cvm"
//!
//! [[model]]
//! kind = "cvm_sampled"
//! k = 20
//! sigma_deg = 25.0
//!
//! [[model]]
//! kind = "ff"
//! representation = "relative"
//! rotations = true
//!
//! [experiment]
//! families = ["ff", "red"]
//! focus_scene = "Hotel"
//! history_lengths = [7, 6, 5, 4, 3, 2, 1]
//! train = { learning_rate = 0.0004, batch_size = 64, epochs = 35 }
//! ```

use std::path::{Path, PathBuf};

use cvbench_core::analysis::{ExperimentGrid, Family};
use cvbench_core::data::Manifest;
use cvbench_core::evaluation::Protocol;
use cvbench_core::models::ModelSpec;
use cvbench_core::{CoreError, HORIZON, OBSERVED_STEPS};
use cvbench_neural::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default, rename = "model")]
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "default_observed")]
    pub observed: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub test_scenes: Vec<String>,
    #[serde(default)]
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    #[serde(default = "default_focus")]
    pub focus_scene: String,
    #[serde(default = "default_lengths")]
    pub history_lengths: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_observed() -> usize {
    OBSERVED_STEPS
}

fn default_horizon() -> usize {
    HORIZON
}

fn default_families() -> Vec<Family> {
    vec![Family::Ff, Family::Red]
}

fn default_focus() -> String {
    "Hotel".into()
}

fn default_lengths() -> Vec<usize> {
    (1..OBSERVED_STEPS).rev().collect()
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            observed: OBSERVED_STEPS,
            horizon: HORIZON,
            test_scenes: Vec::new(),
            workers: 0,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            families: default_families(),
            focus_scene: default_focus(),
            history_lengths: default_lengths(),
            train: TrainConfig::default(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            models: Vec::new(),
            seeds: default_seeds(),
            output_dir: default_output(),
            protocol: ProtocolConfig::default(),
            experiment: ExperimentConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub workers: Option<usize>,
    pub models: Vec<String>,
    pub test_scenes: Vec<String>,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CoreError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CoreError::Config(format!("run config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Loads `path` if given, otherwise starts from defaults, then applies
    /// the overrides and validates.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CoreError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CoreError> {
        // Paths given on the command line are relative to the working
        // directory, not to the config file.
        if let Some(m) = &o.manifest {
            self.manifest = Some(std::path::absolute(m).map_err(|e| CoreError::io(m, e))?);
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = std::path::absolute(d).map_err(|e| CoreError::io(d, e))?;
        }
        if !o.seeds.is_empty() {
            self.seeds = o.seeds.clone();
        }
        if let Some(w) = o.workers {
            self.protocol.workers = w;
        }
        if !o.models.is_empty() {
            self.models = o.models.iter().map(|m| model_from_kind(m)).collect::<Result<_, _>>()?;
        }
        if !o.test_scenes.is_empty() {
            self.protocol.test_scenes = o.test_scenes.clone();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.protocol.observed != OBSERVED_STEPS || self.protocol.horizon != HORIZON {
            return Err(CoreError::Config(format!(
                "protocol is fixed at {OBSERVED_STEPS} observed and {HORIZON} predicted positions, got {} and {}",
                self.protocol.observed, self.protocol.horizon
            )));
        }
        if self.seeds.is_empty() {
            return Err(CoreError::Config("no seeds".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        if self.experiment.families.is_empty() {
            return Err(CoreError::Config("experiment has no model families".into()));
        }
        self.experiment.train.validate()?;
        Ok(())
    }

    pub fn manifest_path(&self) -> Result<PathBuf, CoreError> {
        let m = self.manifest.as_ref().ok_or_else(|| {
            CoreError::Config("no dataset manifest given (config key `manifest` or --manifest)".into())
        })?;
        Ok(self.base_dir.join(m))
    }

    pub fn load_manifest(&self) -> Result<Manifest, CoreError> {
        let path = self.manifest_path()?;
        if !path.is_file() {
            return Err(CoreError::Config(format!("manifest {} does not exist", path.display())));
        }
        Manifest::load(&path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    pub fn protocol(&self, seed: u64) -> Protocol {
        Protocol {
            seed,
            test_scenes: self.protocol.test_scenes.clone(),
            workers: self.protocol.workers,
        }
    }

    pub fn grid(&self) -> ExperimentGrid {
        ExperimentGrid {
            families: self.experiment.families.clone(),
            seeds: self.seeds.clone(),
            train: self.experiment.train,
            focus_scene: self.experiment.focus_scene.clone(),
            test_scenes: self.protocol.test_scenes.clone(),
            workers: self.protocol.workers,
        }
    }

    /// The settings that determine results: everything except where outputs
    /// go and how many threads compute them.
    pub fn hashed_view(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is a table");
        obj.remove("output_dir");
        if let Some(p) = obj.get_mut("protocol").and_then(|p| p.as_object_mut()) {
            p.remove("workers");
        }
        v
    }

    /// SHA-256 of the hashed view, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.hashed_view()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Model with default options from its kind name, e.g. `cvm_sampled`.
pub fn model_from_kind(kind: &str) -> Result<ModelSpec, CoreError> {
    let mut table = toml::Table::new();
    table.insert("kind".into(), toml::Value::String(kind.into()));
    table.try_into().map_err(|_| {
        CoreError::Config(format!(
            "unknown model {kind:?} (cvm, cvm_sampled, const_acc, lin, ff, red)"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let text = include_str!("config.rs")
            .lines()
            .filter_map(|l| l.strip_prefix("//! "))
            .skip_while(|l| !l.starts_with("```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("```"))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = RunConfig::parse(&text, Path::new("/cfg")).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.models.len(), 3);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.manifest_path().unwrap(), Path::new("/cfg/data/manifest.toml"));
        assert_eq!(cfg.experiment.history_lengths, vec![7, 6, 5, 4, 3, 2, 1]);
    }

    #[test]
    fn flags_take_precedence() {
        let mut cfg = RunConfig::parse("seeds = [1, 2]\n[[model]]\nkind = \"lin\"\n", Path::new(".")).unwrap();
        cfg.apply(&Overrides {
            seeds: vec![9],
            workers: Some(3),
            models: vec!["cvm".into(), "const_acc".into()],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.protocol.workers, 3);
        assert_eq!(cfg.models, vec![ModelSpec::Cvm, ModelSpec::ConstAcc]);
    }

    #[test]
    fn hash_ignores_output_location_and_workers() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        b.protocol.workers = 7;
        assert_eq!(a.hash(), b.hash());
        b.seeds = vec![1];
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        for text in [
            "unknown_key = 1",
            "[protocol]\nhorizon = 10",
            "seeds = []",
            "[[model]]\nkind = \"cvm_sampled\"\nk = 0",
            "[[model]]\nkind = \"teleport\"",
        ] {
            let err = RunConfig::parse(text, Path::new("."))
                .and_then(|c| c.validate())
                .unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
        assert!(model_from_kind("nope").unwrap_err().is_config());
    }
}
