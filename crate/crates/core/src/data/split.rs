//! Leave-one-scene-out splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use super::windows::{slice_windows, TrajectoryWindow};
use crate::CoreError;

pub const VALIDATION_FRACTION: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_scene: String,
    pub train_scenes: Vec<String>,
    pub validation_fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Split {
    pub plan: SplitPlan,
    pub train: Vec<TrajectoryWindow>,
    pub validation: Vec<TrajectoryWindow>,
    pub test: Vec<TrajectoryWindow>,
}

/// Number of validation windows drawn from a training pool of `n`.
pub fn validation_count(n: usize) -> usize {
    (n as f64 * VALIDATION_FRACTION).round() as usize
}

/// Test set: every window of `test_scene`, in slicing order. The windows of
/// all other scenes are shuffled with a ChaCha8 generator seeded by `seed`;
/// the first 10% become validation, the rest training.
pub fn make_split(scenes: &[Scene], test_scene: &str, seed: u64) -> Result<Split, CoreError> {
    let Some(test) = scenes.iter().find(|s| s.name == test_scene) else {
        let known: Vec<&str> = scenes.iter().map(|s| s.name.as_str()).collect();
        return Err(CoreError::Config(format!(
            "unknown test scene {test_scene:?}; available: {known:?}"
        )));
    };
    if scenes.len() < 2 {
        return Err(CoreError::Config("leave-one-out needs at least two scenes".into()));
    }
    let train_scenes: Vec<String> = scenes
        .iter()
        .filter(|s| s.name != test_scene)
        .map(|s| s.name.clone())
        .collect();
    let mut pool: Vec<TrajectoryWindow> = scenes
        .iter()
        .filter(|s| s.name != test_scene)
        .flat_map(slice_windows)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let n_val = validation_count(pool.len());
    let train = pool.split_off(n_val);
    Ok(Split {
        plan: SplitPlan {
            test_scene: test_scene.to_string(),
            train_scenes,
            validation_fraction: VALIDATION_FRACTION,
            seed,
        },
        train,
        validation: pool,
        test: slice_windows(test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_percent_rule() {
        assert_eq!(validation_count(1000), 100);
        assert_eq!(validation_count(0), 0);
        assert_eq!(validation_count(7), 1);
    }
}
