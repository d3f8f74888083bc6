//! Model inputs: turning windows into feature and target rows, and the
//! rotation augmentation.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{extract_neighbors, to_relative, NeighborIndex, NeighborVariant, Scene, TrajectoryWindow};
use crate::types::{Displacement, NeighborContext, Position, HORIZON, NEIGHBOR_SLOTS, OBSERVED_STEPS};
use crate::CoreError;

/// How the motion history is presented to a learned model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// World coordinates of the observed positions.
    Absolute,
    /// Displacements between consecutive observed positions.
    #[default]
    Relative,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Absolute => "absolute",
            Representation::Relative => "relative",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CoreError> {
        match s {
            "absolute" => Ok(Representation::Absolute),
            "relative" => Ok(Representation::Relative),
            other => Err(CoreError::Config(format!("unknown representation {other:?}"))),
        }
    }

    /// Longest history available: 8 positions or 7 displacements.
    pub fn max_history(self) -> usize {
        match self {
            Representation::Absolute => OBSERVED_STEPS,
            Representation::Relative => OBSERVED_STEPS - 1,
        }
    }
}

/// Feature layout: the most recent `history` steps of the chosen
/// representation, then the flattened neighbor context if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub representation: Representation,
    pub history: usize,
    pub variant: NeighborVariant,
}

impl FeatureSpec {
    /// Full history for the representation.
    pub fn new(representation: Representation, variant: NeighborVariant) -> Self {
        Self {
            representation,
            history: representation.max_history(),
            variant,
        }
    }

    pub fn with_history(mut self, history: usize) -> Self {
        self.history = history;
        self
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let max = self.representation.max_history();
        if self.history == 0 || self.history > max {
            return Err(CoreError::Config(format!(
                "history length {} outside 1..={max} for {} inputs",
                self.history,
                self.representation.name()
            )));
        }
        Ok(())
    }

    pub fn history_dim(&self) -> usize {
        2 * self.history
    }

    pub fn neighbor_dim(&self) -> usize {
        self.variant.steps().map_or(0, |s| NEIGHBOR_SLOTS * s * 2)
    }

    pub fn input_dim(&self) -> usize {
        self.history_dim() + self.neighbor_dim()
    }
}

/// Neighbor indices for every scene, keyed by scene name.
#[derive(Clone, Debug, Default)]
pub struct SceneIndex {
    by_scene: HashMap<String, NeighborIndex>,
}

impl SceneIndex {
    pub fn new(scenes: &[Scene]) -> Self {
        Self {
            by_scene: scenes.iter().map(|s| (s.name.clone(), NeighborIndex::new(s))).collect(),
        }
    }

    pub fn get(&self, scene: &str) -> Option<&NeighborIndex> {
        self.by_scene.get(scene)
    }
}

/// A window prepared for a learned model, in a frame centered on its anchor
/// so it can be rotated.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub anchor: Position,
    /// Eight observed positions.
    pub observed: Vec<Position>,
    /// Seven observed displacements.
    pub history: Vec<Displacement>,
    /// Displacements from the anchor through the future (2..=12).
    pub target: Vec<Displacement>,
    pub neighbors: Option<NeighborContext>,
}

impl Sample {
    pub fn from_window(
        window: &TrajectoryWindow,
        variant: NeighborVariant,
        index: Option<&SceneIndex>,
    ) -> Result<Self, CoreError> {
        let rel = to_relative(window);
        let neighbors = match variant {
            NeighborVariant::Basic => None,
            _ => {
                let scene_index = index
                    .and_then(|i| i.get(&window.id.scene))
                    .ok_or_else(|| CoreError::Config(format!("no neighbor index for scene {:?}", window.id.scene)))?;
                extract_neighbors(window, scene_index, variant)
            }
        };
        Ok(Self {
            anchor: rel.anchor,
            observed: window.observed.positions().to_vec(),
            history: rel.history.into_vec(),
            target: rel.target.into_vec(),
            neighbors,
        })
    }

    pub fn is_full(&self) -> bool {
        self.target.len() == HORIZON
    }

    /// Rotation about the anchor, applied to every position, displacement
    /// and neighbor offset.
    pub fn rotated(&self, angle: f64) -> Self {
        Self {
            anchor: self.anchor,
            observed: self
                .observed
                .iter()
                .map(|p| p.rotated_about(self.anchor, angle))
                .collect(),
            history: self.history.iter().map(|d| d.rotated(angle)).collect(),
            target: self.target.iter().map(|d| d.rotated(angle)).collect(),
            neighbors: self.neighbors.as_ref().map(|n| n.rotated(angle)),
        }
    }

    pub fn features(&self, spec: &FeatureSpec) -> Result<Vec<f64>, CoreError> {
        spec.validate()?;
        let mut out = Vec::with_capacity(spec.input_dim());
        match spec.representation {
            Representation::Absolute => {
                let start = self.observed.len() - spec.history;
                out.extend(self.observed[start..].iter().flat_map(|p| [p.x, p.y]));
            }
            Representation::Relative => {
                let start = self.history.len() - spec.history;
                out.extend(self.history[start..].iter().flat_map(|d| [d.dx, d.dy]));
            }
        }
        match (&self.neighbors, spec.variant.steps()) {
            (None, None) => {}
            (Some(ctx), Some(steps)) if ctx.steps() == steps => out.extend(ctx.flatten()),
            _ => {
                return Err(CoreError::Config(format!(
                    "sample neighbor context does not match variant {}",
                    spec.variant.name()
                )))
            }
        }
        Ok(out)
    }

    /// 24 target values, or `None` for a shortened window.
    pub fn target_row(&self) -> Option<Vec<f64>> {
        self.is_full()
            .then(|| self.target.iter().flat_map(|d| [d.dx, d.dy]).collect())
    }
}

/// Rotates every sample once by an angle drawn from `N(0, sigma_deg^2)`
/// degrees. Angles are used as drawn, without wrapping. Returns the same
/// number of samples, in order.
pub fn augment_rotations<R: Rng + ?Sized>(
    samples: Vec<Sample>,
    sigma_deg: f64,
    rng: &mut R,
) -> Result<Vec<Sample>, CoreError> {
    if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
        return Err(CoreError::Config(format!("invalid rotation sigma {sigma_deg}")));
    }
    let normal = Normal::new(0.0, sigma_deg.to_radians()).expect("sigma checked above");
    Ok(samples.into_iter().map(|s| s.rotated(normal.sample(rng))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{slice_track, Track};

    fn window() -> TrajectoryWindow {
        let track = Track {
            recording: 0,
            pedestrian_id: 4,
            start_frame: 0,
            frame_step: 1,
            positions: (0..20)
                .map(|i| Position::new(i as f64 * 0.5, (i * i) as f64 * 0.01))
                .collect(),
        };
        slice_track("s", &track).remove(0)
    }

    #[test]
    fn feature_lengths_per_variant() {
        let rel = FeatureSpec::new(Representation::Relative, NeighborVariant::Basic);
        assert_eq!(rel.input_dim(), 14);
        assert_eq!(
            FeatureSpec::new(Representation::Relative, NeighborVariant::History).input_dim(),
            206
        );
        assert_eq!(
            FeatureSpec::new(Representation::Relative, NeighborVariant::Future).input_dim(),
            302
        );
        assert_eq!(
            FeatureSpec::new(Representation::Absolute, NeighborVariant::Basic).input_dim(),
            16
        );
        assert_eq!(rel.with_history(1).input_dim(), 2);
        assert!(rel.with_history(8).validate().is_err());
        assert!(rel.with_history(0).validate().is_err());
    }

    #[test]
    fn shortened_history_keeps_most_recent_steps() {
        let w = window();
        let s = Sample::from_window(&w, NeighborVariant::Basic, None).unwrap();
        let spec = FeatureSpec::new(Representation::Relative, NeighborVariant::Basic).with_history(1);
        let last = s.history[6];
        assert_eq!(s.features(&spec).unwrap(), vec![last.dx, last.dy]);
        let abs = FeatureSpec::new(Representation::Absolute, NeighborVariant::Basic);
        let f = s.features(&abs).unwrap();
        assert_eq!(f.len(), 16);
        assert_eq!(&f[14..], &[w.anchor().x, w.anchor().y]);
    }

    #[test]
    fn neighbor_variant_requires_index() {
        let w = window();
        assert!(Sample::from_window(&w, NeighborVariant::History, None).is_err());
        let s = Sample::from_window(&w, NeighborVariant::Basic, None).unwrap();
        let hist = FeatureSpec::new(Representation::Relative, NeighborVariant::History);
        assert!(s.features(&hist).is_err());
    }

    #[test]
    fn rotation_by_zero_is_identity_and_quarter_turn_maps_axes() {
        let s = Sample::from_window(&window(), NeighborVariant::Basic, None).unwrap();
        let same = s.rotated(0.0);
        assert_eq!(same.history, s.history);
        for (a, b) in same.observed.iter().zip(&s.observed) {
            assert!(a.distance(b) < 1e-12);
        }
        let mut unit = s.clone();
        unit.history = vec![Displacement::new(1.0, 0.0); 7];
        let r = unit.rotated(std::f64::consts::FRAC_PI_2);
        assert!(r
            .history
            .iter()
            .all(|d| d.dx.abs() < 1e-12 && (d.dy - 1.0).abs() < 1e-12));
    }

    #[test]
    fn augmentation_keeps_count_and_norms() {
        let s = Sample::from_window(&window(), NeighborVariant::Basic, None).unwrap();
        let samples = vec![s.clone(); 50];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let out = augment_rotations(samples, 180.0, &mut rng).unwrap();
        assert_eq!(out.len(), 50);
        for r in &out {
            for (a, b) in r.history.iter().zip(&s.history) {
                assert!((a.norm() - b.norm()).abs() < 1e-12);
            }
        }
        assert!(out.windows(2).any(|w| w[0] != w[1]));
    }

    use rand::SeedableRng;
}
