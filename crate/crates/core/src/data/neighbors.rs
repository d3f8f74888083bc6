//! Neighbor context extraction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::scene::Scene;
use super::windows::TrajectoryWindow;
use crate::types::{NeighborContext, Position, HORIZON, OBSERVED_STEPS};

/// Which neighbor information a model receives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborVariant {
    /// No neighbor features.
    #[default]
    Basic,
    /// The neighbors' eight observed positions, ending at the current frame.
    History,
    /// The neighbors' twelve true future positions.
    Future,
}

impl NeighborVariant {
    /// Positions per neighbor slot, or `None` for [`NeighborVariant::Basic`].
    pub fn steps(self) -> Option<usize> {
        match self {
            NeighborVariant::Basic => None,
            NeighborVariant::History => Some(OBSERVED_STEPS),
            NeighborVariant::Future => Some(HORIZON),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NeighborVariant::Basic => "basic",
            NeighborVariant::History => "history",
            NeighborVariant::Future => "future",
        }
    }
}

/// Position lookup by `(recording, frame, pedestrian)` with a per-frame
/// roster, built once per scene.
#[derive(Clone, Debug, Default)]
pub struct NeighborIndex {
    positions: HashMap<(usize, i64, u64), Position>,
    roster: HashMap<(usize, i64), Vec<u64>>,
}

impl NeighborIndex {
    pub fn new(scene: &Scene) -> Self {
        let mut index = NeighborIndex::default();
        for track in &scene.tracks {
            for (k, p) in track.positions.iter().enumerate() {
                let frame = track.frame_at(k);
                index
                    .positions
                    .insert((track.recording, frame, track.pedestrian_id), *p);
                index
                    .roster
                    .entry((track.recording, frame))
                    .or_default()
                    .push(track.pedestrian_id);
            }
        }
        for ids in index.roster.values_mut() {
            ids.sort_unstable();
        }
        index
    }

    pub fn position(&self, recording: usize, frame: i64, pedestrian: u64) -> Option<Position> {
        self.positions.get(&(recording, frame, pedestrian)).copied()
    }

    pub fn present_at(&self, recording: usize, frame: i64) -> &[u64] {
        self.roster.get(&(recording, frame)).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Twelve closest neighbors of the window's pedestrian that are present for
/// the whole variant span (partial neighbors are dropped), ordered by
/// distance at the anchor frame, coordinates relative to the anchor.
pub fn extract_neighbors(
    window: &TrajectoryWindow,
    index: &NeighborIndex,
    variant: NeighborVariant,
) -> Option<NeighborContext> {
    let steps = variant.steps()?;
    let t = window.anchor_frame();
    let step = window.frame_step;
    let frames: Vec<i64> = match variant {
        NeighborVariant::History => (0..OBSERVED_STEPS as i64)
            .map(|k| t - (OBSERVED_STEPS as i64 - 1 - k) * step)
            .collect(),
        NeighborVariant::Future => (1..=HORIZON as i64).map(|k| t + k * step).collect(),
        NeighborVariant::Basic => unreachable!(),
    };
    let anchor = window.anchor();
    let rec = window.id.recording;

    let candidates = index
        .present_at(rec, t)
        .iter()
        .filter(|&&id| id != window.id.pedestrian_id)
        .filter_map(|&id| {
            let at_t = index.position(rec, t, id)?;
            let rel: Option<Vec<Position>> = frames
                .iter()
                .map(|&f| {
                    index
                        .position(rec, f, id)
                        .map(|p| Position::new(p.x - anchor.x, p.y - anchor.y))
                })
                .collect();
            Some((id, at_t.distance(&anchor), rel?))
        })
        .collect();
    Some(NeighborContext::from_candidates(steps, candidates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::scene::Track;
    use crate::data::windows::slice_track;
    use crate::types::NeighborSlot;

    fn track(id: u64, start: i64, pts: Vec<Position>) -> Track {
        Track {
            recording: 0,
            pedestrian_id: id,
            start_frame: start,
            frame_step: 1,
            positions: pts,
        }
    }

    fn walker(id: u64, start: i64, len: usize, offset: Position) -> Track {
        track(
            id,
            start,
            (0..len)
                .map(|i| Position::new(offset.x + 0.5 * (start as f64 + i as f64), offset.y))
                .collect(),
        )
    }

    fn scene(tracks: Vec<Track>) -> Scene {
        Scene {
            name: "s".into(),
            recordings: vec!["s".into()],
            tracks,
        }
    }

    #[test]
    fn lone_pedestrian_gets_twelve_empty_slots() {
        let s = scene(vec![walker(1, 0, 20, Position::ORIGIN)]);
        let idx = NeighborIndex::new(&s);
        let w = &slice_track("s", &s.tracks[0])[0];
        for variant in [NeighborVariant::History, NeighborVariant::Future] {
            let ctx = extract_neighbors(w, &idx, variant).unwrap();
            assert_eq!(ctx.slots().len(), 12);
            assert_eq!(ctx.present(), 0);
            assert!(ctx.flatten().iter().all(|&v| v == 0.0));
        }
        assert!(extract_neighbors(w, &idx, NeighborVariant::Basic).is_none());
    }

    #[test]
    fn companion_at_fixed_offset() {
        let s = scene(vec![
            walker(1, 0, 20, Position::ORIGIN),
            walker(2, 0, 20, Position::new(2.0, 0.0)),
        ]);
        let idx = NeighborIndex::new(&s);
        let w = &slice_track("s", &s.tracks[0])[0];
        for variant in [NeighborVariant::History, NeighborVariant::Future] {
            let ctx = extract_neighbors(w, &idx, variant).unwrap();
            let steps = variant.steps().unwrap();
            match &ctx.slots()[0] {
                NeighborSlot::Present { positions, .. } => {
                    assert_eq!(positions.len(), steps);
                    if variant == NeighborVariant::History {
                        for (k, p) in positions.iter().enumerate() {
                            assert_eq!(*p, Position::new(2.0 - 0.5 * (7 - k) as f64, 0.0));
                        }
                    }
                }
                NeighborSlot::Absent => panic!("slot 0 should be occupied"),
            }
            assert!(ctx.slots()[1..].iter().all(|s| *s == NeighborSlot::Absent));
        }
    }

    #[test]
    fn slots_are_sorted_by_distance_at_anchor() {
        let s = scene(vec![
            walker(1, 0, 20, Position::ORIGIN),
            walker(10, 0, 20, Position::new(0.0, 1.0)),
            walker(11, 0, 20, Position::new(0.0, 3.0)),
            walker(12, 0, 20, Position::new(0.0, 2.0)),
        ]);
        let idx = NeighborIndex::new(&s);
        let w = &slice_track("s", &s.tracks[0])[0];
        let ctx = extract_neighbors(w, &idx, NeighborVariant::History).unwrap();
        let ids: Vec<u64> = ctx
            .slots()
            .iter()
            .filter_map(|s| match s {
                NeighborSlot::Present { pedestrian_id, .. } => Some(*pedestrian_id),
                NeighborSlot::Absent => None,
            })
            .collect();
        assert_eq!(ids, vec![10, 12, 11]);
    }

    #[test]
    fn partial_neighbors_are_excluded() {
        // Neighbor 2 arrives at frame 3, so it misses part of the observed span
        // but covers the whole future; neighbor 3 leaves before the future ends.
        let s = scene(vec![
            walker(1, 0, 20, Position::ORIGIN),
            walker(2, 3, 17, Position::new(1.0, 0.0)),
            walker(3, 0, 12, Position::new(-1.0, 0.0)),
        ]);
        let idx = NeighborIndex::new(&s);
        let w = &slice_track("s", &s.tracks[0])[0];
        let hist = extract_neighbors(w, &idx, NeighborVariant::History).unwrap();
        let fut = extract_neighbors(w, &idx, NeighborVariant::Future).unwrap();
        let only = |ctx: &NeighborContext| match &ctx.slots()[0] {
            NeighborSlot::Present { pedestrian_id, .. } => (*pedestrian_id, ctx.present()),
            NeighborSlot::Absent => (0, 0),
        };
        assert_eq!(only(&hist), (3, 1));
        assert_eq!(only(&fut), (2, 1));
    }
}
