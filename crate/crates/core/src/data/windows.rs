//! Sliding-window slicing into benchmark samples.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scene::{Scene, Track};
use crate::types::{
    positions_to_displacements, DisplacementSequence, FutureTrajectory, MotionHistory, Position, FULL_WINDOW_LEN,
    MIN_WINDOW_LEN, OBSERVED_STEPS,
};
use crate::CoreError;

/// Identity of a window within the whole benchmark.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowId {
    pub scene: String,
    pub recording: usize,
    pub pedestrian_id: u64,
    /// Frame of the first observed position.
    pub start_frame: i64,
}

/// Eight observed positions followed by 2..=12 future positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryWindow {
    pub id: WindowId,
    pub frame_step: i64,
    pub observed: MotionHistory,
    pub future: FutureTrajectory,
}

impl TrajectoryWindow {
    pub fn from_positions(id: WindowId, frame_step: i64, positions: &[Position]) -> Result<Self, CoreError> {
        if positions.len() < MIN_WINDOW_LEN || positions.len() > FULL_WINDOW_LEN {
            return Err(CoreError::Validation(format!(
                "window length must be in {MIN_WINDOW_LEN}..={FULL_WINDOW_LEN}, got {}",
                positions.len()
            )));
        }
        let observed = MotionHistory::new(positions[..OBSERVED_STEPS].to_vec())?;
        let future = FutureTrajectory::new(positions[OBSERVED_STEPS..].to_vec())?;
        Ok(Self {
            id,
            frame_step,
            observed,
            future,
        })
    }

    /// Current position `p^t`, the last observation.
    pub fn anchor(&self) -> Position {
        self.observed.last()
    }

    /// Frame of the anchor position.
    pub fn anchor_frame(&self) -> i64 {
        self.id.start_frame + (OBSERVED_STEPS as i64 - 1) * self.frame_step
    }

    pub fn len(&self) -> usize {
        self.observed.len() + self.future.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_full(&self) -> bool {
        self.future.is_full()
    }

    pub fn all_positions(&self) -> Vec<Position> {
        let mut v = self.observed.positions().to_vec();
        v.extend_from_slice(self.future.positions());
        v
    }
}

/// Relative encoding of a window.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeWindow {
    /// Seven observed displacements.
    pub history: DisplacementSequence,
    /// Displacements from the anchor through every future position.
    pub target: DisplacementSequence,
    pub anchor: Position,
}

pub fn to_relative(window: &TrajectoryWindow) -> RelativeWindow {
    let history =
        positions_to_displacements(window.observed.positions()).expect("observed history has eight positions");
    let mut tail = Vec::with_capacity(window.future.len() + 1);
    tail.push(window.anchor());
    tail.extend_from_slice(window.future.positions());
    let target = positions_to_displacements(&tail).expect("future has at least two positions");
    RelativeWindow {
        history,
        target,
        anchor: window.anchor(),
    }
}

/// Start offsets and lengths of every window cut from a track of length
/// `len`: one per start index while at least ten positions remain, capped
/// at twenty.
pub fn window_spans(len: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len)
        .take_while(move |&k| len - k >= MIN_WINDOW_LEN)
        .map(move |k| (k, (len - k).min(FULL_WINDOW_LEN)))
}

pub fn slice_track(scene_name: &str, track: &Track) -> Vec<TrajectoryWindow> {
    window_spans(track.len())
        .map(|(start, len)| {
            let id = WindowId {
                scene: scene_name.to_string(),
                recording: track.recording,
                pedestrian_id: track.pedestrian_id,
                start_frame: track.frame_at(start),
            };
            TrajectoryWindow::from_positions(id, track.frame_step, &track.positions[start..start + len])
                .expect("span lengths are within bounds")
        })
        .collect()
}

/// Every window of every track, in track order.
pub fn slice_windows(scene: &Scene) -> Vec<TrajectoryWindow> {
    scene.tracks.iter().flat_map(|t| slice_track(&scene.name, t)).collect()
}

/// Line-oriented interchange format, one window per line, tab separated:
/// `scene recording pedestrian_id anchor_frame frame_step coords`, where
/// `coords` is the space-separated flattened `x y` list of all positions.
pub fn format_windows(windows: &[TrajectoryWindow]) -> String {
    let mut out = String::new();
    for w in windows {
        let coords: Vec<String> = w
            .all_positions()
            .iter()
            .flat_map(|p| [p.x.to_string(), p.y.to_string()])
            .collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            w.id.scene,
            w.id.recording,
            w.id.pedestrian_id,
            w.anchor_frame(),
            w.frame_step,
            coords.join(" ")
        );
    }
    out
}

pub fn parse_windows(text: &str) -> Result<Vec<TrajectoryWindow>, CoreError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CoreError::Parse {
            source_name: "windows".into(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let num =
            |s: &str, what: &str| -> Result<i64, CoreError> { s.parse().map_err(|_| err(format!("bad {what} {s:?}"))) };
        let recording = num(fields[1], "recording")? as usize;
        let pedestrian_id = num(fields[2], "pedestrian id")? as u64;
        let anchor_frame = num(fields[3], "anchor frame")?;
        let frame_step = num(fields[4], "frame step")?;
        let values: Vec<f64> = fields[5]
            .split(' ')
            .map(|v| v.parse().map_err(|_| err(format!("bad coordinate {v:?}"))))
            .collect::<Result<_, _>>()?;
        if !values.len().is_multiple_of(2) {
            return Err(err("odd coordinate count".into()));
        }
        let positions: Vec<Position> = values.chunks_exact(2).map(|c| Position::new(c[0], c[1])).collect();
        let id = WindowId {
            scene: fields[0].to_string(),
            recording,
            pedestrian_id,
            start_frame: anchor_frame - (OBSERVED_STEPS as i64 - 1) * frame_step,
        };
        out.push(TrajectoryWindow::from_positions(id, frame_step, &positions)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{displacements_to_positions, Displacement};

    fn straight_track(len: usize) -> Track {
        Track {
            recording: 0,
            pedestrian_id: 1,
            start_frame: 0,
            frame_step: 10,
            positions: (0..len).map(|i| Position::new(i as f64, 0.0)).collect(),
        }
    }

    fn lengths(len: usize) -> Vec<usize> {
        slice_track("s", &straight_track(len)).iter().map(|w| w.len()).collect()
    }

    #[test]
    fn short_track_yields_nothing() {
        assert!(lengths(9).is_empty());
        assert_eq!(lengths(10), vec![10]);
    }

    #[test]
    fn track_of_twenty() {
        let l = lengths(20);
        assert_eq!(l.len(), 11);
        assert_eq!(l, vec![20, 19, 18, 17, 16, 15, 14, 13, 12, 11, 10]);
    }

    #[test]
    fn track_of_twenty_five_matches_enumeration() {
        // Enumerate all start indices and keep those with >= 10 remaining.
        let expected: Vec<usize> = (0..25usize)
            .filter(|k| 25 - k >= 10)
            .map(|k| (25 - k).min(20))
            .collect();
        assert_eq!(expected.len(), 16);
        assert_eq!(lengths(25), expected);
    }

    #[test]
    fn window_frames_and_anchor() {
        let w = &slice_track("s", &straight_track(12))[1];
        assert_eq!(w.id.start_frame, 10);
        assert_eq!(w.anchor_frame(), 80);
        assert_eq!(w.anchor(), Position::new(8.0, 0.0));
        assert_eq!(w.future.len(), 3);
    }

    #[test]
    fn relative_encoding_of_straight_walk() {
        let w = &slice_track("s", &straight_track(20))[0];
        let rel = to_relative(w);
        assert_eq!(rel.history.as_slice(), &[Displacement::new(1.0, 0.0); 7]);
        assert_eq!(rel.target.len(), 12);
        assert_eq!(
            displacements_to_positions(rel.anchor, &rel.target),
            w.future.positions()
        );
    }

    #[test]
    fn stationary_window_is_all_zero() {
        let t = Track {
            positions: vec![Position::new(2.0, 3.0); 15],
            ..straight_track(15)
        };
        for w in slice_track("s", &t) {
            let rel = to_relative(&w);
            assert!(rel
                .history
                .as_slice()
                .iter()
                .chain(rel.target.as_slice())
                .all(|d| *d == Displacement::ZERO));
        }
    }

    #[test]
    fn interchange_round_trip() {
        let windows = slice_track("Hotel", &straight_track(14));
        let text = format_windows(&windows);
        assert_eq!(parse_windows(&text).unwrap(), windows);
        assert!(parse_windows("Hotel\t0\t1\n").is_err());
    }
}
