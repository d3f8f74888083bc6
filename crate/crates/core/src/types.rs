//! Domain vocabulary: positions, displacements and the sequences built from
//! them.
//!
//! All coordinates are world-frame meters in `f64`. The sampling interval is
//! carried as metadata only; every model works per timestep.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::CoreError;

/// Sampling interval of the benchmark data in seconds.
pub const TIMESTEP_SECONDS: f64 = 0.4;
/// Observed positions per window.
pub const OBSERVED_STEPS: usize = 8;
/// Predicted timesteps.
pub const HORIZON: usize = 12;
/// Shortest window kept by the slicer (8 observed + 2 future).
pub const MIN_WINDOW_LEN: usize = OBSERVED_STEPS + 2;
/// Full window length (8 observed + 12 future).
pub const FULL_WINDOW_LEN: usize = OBSERVED_STEPS + HORIZON;
/// Neighbor slots in a [`NeighborContext`].
pub const NEIGHBOR_SLOTS: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (*self - *other).norm()
    }

    /// Rotates about `center` by `angle` radians (counter-clockwise).
    pub fn rotated_about(&self, center: Position, angle: f64) -> Position {
        center + (*self - center).rotated(angle)
    }
}

/// Motion over one timestep, in meters per step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }

    pub fn rotated(&self, angle: f64) -> Displacement {
        let (s, c) = angle.sin_cos();
        Displacement {
            dx: c * self.dx - s * self.dy,
            dy: s * self.dx + c * self.dy,
        }
    }

    pub fn scaled(&self, k: f64) -> Displacement {
        Displacement {
            dx: k * self.dx,
            dy: k * self.dy,
        }
    }
}

impl Sub for Position {
    type Output = Displacement;
    fn sub(self, rhs: Position) -> Displacement {
        Displacement {
            dx: self.x - rhs.x,
            dy: self.y - rhs.y,
        }
    }
}

impl Add<Displacement> for Position {
    type Output = Position;
    fn add(self, rhs: Displacement) -> Position {
        Position {
            x: self.x + rhs.dx,
            y: self.y + rhs.dy,
        }
    }
}

impl Add for Displacement {
    type Output = Displacement;
    fn add(self, rhs: Displacement) -> Displacement {
        Displacement {
            dx: self.dx + rhs.dx,
            dy: self.dy + rhs.dy,
        }
    }
}

impl Sub for Displacement {
    type Output = Displacement;
    fn sub(self, rhs: Displacement) -> Displacement {
        Displacement {
            dx: self.dx - rhs.dx,
            dy: self.dy - rhs.dy,
        }
    }
}

/// Observed positions of one pedestrian, oldest first, consecutive steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionHistory {
    positions: Vec<Position>,
}

impl MotionHistory {
    pub fn new(positions: Vec<Position>) -> Result<Self, CoreError> {
        if positions.is_empty() || positions.len() > OBSERVED_STEPS {
            return Err(CoreError::Validation(format!(
                "motion history must hold 1..={OBSERVED_STEPS} positions, got {}",
                positions.len()
            )));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// The current position, from which predictions are anchored.
    pub fn last(&self) -> Position {
        *self.positions.last().expect("non-empty by construction")
    }

    pub fn timestep(&self) -> f64 {
        TIMESTEP_SECONDS
    }
}

/// Ground-truth positions following the last observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FutureTrajectory {
    positions: Vec<Position>,
}

impl FutureTrajectory {
    pub fn new(positions: Vec<Position>) -> Result<Self, CoreError> {
        if positions.len() < 2 || positions.len() > HORIZON {
            return Err(CoreError::Validation(format!(
                "future trajectory must hold 2..={HORIZON} positions, got {}",
                positions.len()
            )));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.positions.len() == HORIZON
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSequence {
    displacements: Vec<Displacement>,
}

impl DisplacementSequence {
    pub fn new(displacements: Vec<Displacement>) -> Self {
        Self { displacements }
    }

    /// `n` copies of `d`.
    pub fn repeated(d: Displacement, n: usize) -> Self {
        Self {
            displacements: vec![d; n],
        }
    }

    pub fn as_slice(&self) -> &[Displacement] {
        &self.displacements
    }

    pub fn into_vec(self) -> Vec<Displacement> {
        self.displacements
    }

    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacements.is_empty()
    }

    pub fn rotated(&self, angle: f64) -> Self {
        Self {
            displacements: self.displacements.iter().map(|d| d.rotated(angle)).collect(),
        }
    }

    /// Interleaved `[dx0, dy0, dx1, dy1, ...]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.displacements.iter().flat_map(|d| [d.dx, d.dy]).collect()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self, CoreError> {
        if !values.len().is_multiple_of(2) {
            return Err(CoreError::Shape(format!(
                "odd number of displacement components: {}",
                values.len()
            )));
        }
        Ok(Self {
            displacements: values.chunks_exact(2).map(|c| Displacement::new(c[0], c[1])).collect(),
        })
    }
}

/// Differences of consecutive positions: `out[k] = p[k+1] - p[k]`.
pub fn positions_to_displacements(positions: &[Position]) -> Result<DisplacementSequence, CoreError> {
    if positions.len() < 2 {
        return Err(CoreError::InsufficientLength {
            needed: 2,
            got: positions.len(),
        });
    }
    Ok(DisplacementSequence::new(
        positions.windows(2).map(|w| w[1] - w[0]).collect(),
    ))
}

/// Accumulates displacements starting from `anchor`; the anchor itself is
/// not part of the output.
pub fn displacements_to_positions(anchor: Position, seq: &DisplacementSequence) -> Vec<Position> {
    seq.as_slice()
        .iter()
        .scan(anchor, |p, d| {
            *p = *p + *d;
            Some(*p)
        })
        .collect()
}

/// One of the twelve neighbor slots around a target pedestrian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NeighborSlot {
    Absent,
    Present {
        pedestrian_id: u64,
        /// Positions relative to the target's current position.
        positions: Vec<Position>,
    },
}

/// Up to twelve neighbors ordered by distance at the current timestep,
/// present slots first, absent slots zero-filled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborContext {
    steps: usize,
    slots: Vec<NeighborSlot>,
}

impl NeighborContext {
    /// Builds a context from `(id, distance at t, relative positions)`
    /// candidates; keeps the twelve closest (ties broken by id).
    pub fn from_candidates(steps: usize, mut candidates: Vec<(u64, f64, Vec<Position>)>) -> Self {
        candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut slots: Vec<NeighborSlot> = candidates
            .into_iter()
            .take(NEIGHBOR_SLOTS)
            .map(|(pedestrian_id, _, positions)| {
                debug_assert_eq!(positions.len(), steps);
                NeighborSlot::Present {
                    pedestrian_id,
                    positions,
                }
            })
            .collect();
        slots.resize(NEIGHBOR_SLOTS, NeighborSlot::Absent);
        Self { steps, slots }
    }

    pub fn empty(steps: usize) -> Self {
        Self::from_candidates(steps, Vec::new())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn slots(&self) -> &[NeighborSlot] {
        &self.slots
    }

    pub fn present(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| matches!(s, NeighborSlot::Present { .. }))
            .count()
    }

    pub fn feature_len(&self) -> usize {
        NEIGHBOR_SLOTS * self.steps * 2
    }

    /// `12 * steps * 2` values, slot by slot, zeros for absent slots.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_len());
        for slot in &self.slots {
            match slot {
                NeighborSlot::Absent => out.extend(std::iter::repeat_n(0.0, self.steps * 2)),
                NeighborSlot::Present { positions, .. } => out.extend(positions.iter().flat_map(|p| [p.x, p.y])),
            }
        }
        out
    }

    /// Rotates every present position about the target (the origin).
    pub fn rotated(&self, angle: f64) -> Self {
        let slots = self
            .slots
            .iter()
            .map(|s| match s {
                NeighborSlot::Absent => NeighborSlot::Absent,
                NeighborSlot::Present {
                    pedestrian_id,
                    positions,
                } => NeighborSlot::Present {
                    pedestrian_id: *pedestrian_id,
                    positions: positions
                        .iter()
                        .map(|p| p.rotated_about(Position::ORIGIN, angle))
                        .collect(),
                },
            })
            .collect();
        Self {
            steps: self.steps,
            slots,
        }
    }
}

/// Normalized per-timestep influence shares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionDistribution {
    weights: Vec<f64>,
}

impl AttributionDistribution {
    /// Normalizes non-negative sums so they add up to one.
    pub fn from_sums(sums: Vec<f64>) -> Result<Self, CoreError> {
        if sums.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::Validation(
                "attribution sums must be finite and non-negative".into(),
            ));
        }
        let total: f64 = sums.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::Degenerate("all attribution gradients are zero".into()));
        }
        Ok(Self {
            weights: sums.into_iter().map(|v| v / total).collect(),
        })
    }

    /// Share per history timestep, oldest first.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Position> {
        v.iter().map(|&(x, y)| Position::new(x, y)).collect()
    }

    #[test]
    fn differencing_examples() {
        let d = positions_to_displacements(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])).unwrap();
        assert_eq!(
            d.as_slice(),
            &[Displacement::new(1.0, 0.0), Displacement::new(0.0, 1.0)]
        );
        let d = positions_to_displacements(&pts(&[(5.0, 5.0), (5.0, 5.0)])).unwrap();
        assert_eq!(d.as_slice(), &[Displacement::ZERO]);
        assert!(matches!(
            positions_to_displacements(&pts(&[(1.0, 1.0)])),
            Err(CoreError::InsufficientLength { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn accumulation_examples() {
        let seq = DisplacementSequence::repeated(Displacement::new(1.0, 0.0), 2);
        assert_eq!(
            displacements_to_positions(Position::ORIGIN, &seq),
            pts(&[(1.0, 0.0), (2.0, 0.0)])
        );
        assert!(displacements_to_positions(Position::new(3.0, -2.0), &DisplacementSequence::default()).is_empty());
    }

    #[test]
    fn rotation_by_quarter_turn() {
        let r = Displacement::new(1.0, 0.0).rotated(std::f64::consts::FRAC_PI_2);
        assert!((r.dx).abs() < 1e-12 && (r.dy - 1.0).abs() < 1e-12);
        assert_eq!(Displacement::new(0.3, -0.2).rotated(0.0), Displacement::new(0.3, -0.2));
    }

    #[test]
    fn neighbor_context_orders_and_pads() {
        let ctx = NeighborContext::from_candidates(
            2,
            vec![
                (7, 1.0, pts(&[(1.0, 0.0), (1.0, 0.0)])),
                (3, 3.0, pts(&[(3.0, 0.0), (3.0, 0.0)])),
                (5, 2.0, pts(&[(2.0, 0.0), (2.0, 0.0)])),
            ],
        );
        assert_eq!(ctx.slots().len(), NEIGHBOR_SLOTS);
        let ids: Vec<u64> = ctx
            .slots()
            .iter()
            .filter_map(|s| match s {
                NeighborSlot::Present { pedestrian_id, .. } => Some(*pedestrian_id),
                NeighborSlot::Absent => None,
            })
            .collect();
        assert_eq!(ids, vec![7, 5, 3]);
        let flat = ctx.flatten();
        assert_eq!(flat.len(), 48);
        assert_eq!(&flat[..6], &[1.0, 0.0, 1.0, 0.0, 2.0, 0.0]);
        assert!(flat[12..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn neighbor_context_keeps_twelve_closest() {
        let candidates = (0..20)
            .map(|i| (i as u64, 20.0 - i as f64, pts(&[(0.0, 20.0 - i as f64)])))
            .collect();
        let ctx = NeighborContext::from_candidates(1, candidates);
        assert_eq!(ctx.present(), NEIGHBOR_SLOTS);
        match &ctx.slots()[0] {
            NeighborSlot::Present { pedestrian_id, .. } => assert_eq!(*pedestrian_id, 19),
            NeighborSlot::Absent => panic!("slot 0 empty"),
        }
    }

    #[test]
    fn attribution_normalizes_and_rejects_zero() {
        let a = AttributionDistribution::from_sums(vec![1.0, 3.0]).unwrap();
        assert_eq!(a.weights(), &[0.25, 0.75]);
        assert!(AttributionDistribution::from_sums(vec![0.0, 0.0]).is_err());
        assert!(AttributionDistribution::from_sums(vec![-1.0, 2.0]).is_err());
    }

    #[test]
    fn length_constraints() {
        assert!(MotionHistory::new(vec![]).is_err());
        assert!(MotionHistory::new(vec![Position::ORIGIN; 9]).is_err());
        assert!(FutureTrajectory::new(vec![Position::ORIGIN; 1]).is_err());
        assert!(FutureTrajectory::new(vec![Position::ORIGIN; 13]).is_err());
        assert!(FutureTrajectory::new(vec![Position::ORIGIN; 12]).unwrap().is_full());
    }
}
