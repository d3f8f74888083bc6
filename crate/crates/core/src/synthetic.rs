//! Seeded generator of non-interacting pedestrian scenes for tests and
//! smoke runs.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{format_canonical, Manifest, Scene, SceneEntry, Track};
use crate::types::Position;
use crate::CoreError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Heading {
    /// Uniform over the circle.
    Isotropic,
    /// Every pedestrian starts in this direction (radians).
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub scenes: Vec<String>,
    pub pedestrians_per_scene: usize,
    /// Inclusive range of track lengths in positions.
    pub track_len: (usize, usize),
    /// Mean and standard deviation of the per-step displacement length.
    pub step_length: (f64, f64),
    pub heading: Heading,
    /// Standard deviation of the per-step heading change (radians).
    pub turn_std: f64,
    /// Standard deviation of the additive position noise.
    pub noise_std: f64,
    /// Side of the square area start positions are drawn from.
    pub area: f64,
    /// Frames between consecutive positions.
    pub frame_step: i64,
    /// Frames over which track starts are spread.
    pub frame_span: i64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            scenes: ["ETH-Uni", "Hotel", "Zara1", "Zara2", "UCY-Uni"]
                .map(String::from)
                .to_vec(),
            pedestrians_per_scene: 60,
            track_len: (10, 40),
            step_length: (0.5, 0.1),
            heading: Heading::Isotropic,
            turn_std: 0.05,
            noise_std: 0.01,
            area: 20.0,
            frame_step: 10,
            frame_span: 2000,
            seed: 0,
        }
    }
}

pub fn generate_scenes(cfg: &SyntheticConfig) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let turn = Normal::new(0.0, cfg.turn_std).expect("turn_std must be finite and >= 0");
    let noise = Normal::new(0.0, cfg.noise_std).expect("noise_std must be finite and >= 0");
    let step = Normal::new(cfg.step_length.0, cfg.step_length.1).expect("step std must be finite and >= 0");
    cfg.scenes
        .iter()
        .map(|name| {
            let tracks = (0..cfg.pedestrians_per_scene)
                .map(|id| {
                    let len = rng.random_range(cfg.track_len.0..=cfg.track_len.1);
                    let start = rng.random_range(0..=cfg.frame_span / cfg.frame_step) * cfg.frame_step;
                    let mut heading = match cfg.heading {
                        Heading::Isotropic => rng.random_range(0.0..std::f64::consts::TAU),
                        Heading::Fixed(a) => a,
                    };
                    let speed: f64 = step.sample(&mut rng).max(0.05);
                    let mut p = Position::new(rng.random_range(0.0..cfg.area), rng.random_range(0.0..cfg.area));
                    let mut positions = Vec::with_capacity(len);
                    for _ in 0..len {
                        positions.push(Position::new(
                            p.x + noise.sample(&mut rng),
                            p.y + noise.sample(&mut rng),
                        ));
                        heading += turn.sample(&mut rng);
                        p = Position::new(p.x + speed * heading.cos(), p.y + speed * heading.sin());
                    }
                    Track {
                        recording: 0,
                        pedestrian_id: id as u64,
                        start_frame: start,
                        frame_step: cfg.frame_step,
                        positions,
                    }
                })
                .collect();
            Scene {
                name: name.clone(),
                recordings: vec![name.clone()],
                tracks,
            }
        })
        .collect()
}

/// Writes each scene's recordings as canonical files under `dir` together
/// with a `manifest.toml` listing them.
pub fn write_dataset(dir: &Path, scenes: &[Scene]) -> Result<Manifest, CoreError> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut manifest = Manifest {
        scenes: Vec::new(),
        base_dir: dir.to_path_buf(),
    };
    for scene in scenes {
        let mut files = Vec::new();
        for rec in 0..scene.recordings.len() {
            let file = PathBuf::from(format!("{}_{rec}.txt", scene.name));
            let path = dir.join(&file);
            std::fs::write(&path, format_canonical(&scene.records(rec))).map_err(|e| CoreError::io(&path, e))?;
            files.push(file);
        }
        manifest.upsert(SceneEntry {
            name: scene.name.clone(),
            files,
            format: None,
            columns: None,
            frame_step: None,
        });
    }
    let path = dir.join("manifest.toml");
    std::fs::write(&path, manifest.to_toml()).map_err(|e| CoreError::io(&path, e))?;
    Ok(manifest)
}
