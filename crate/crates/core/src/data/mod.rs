//! Ingestion, windowing, splits and neighbor contexts.

pub mod manifest;
pub mod neighbors;
pub mod scene;
pub mod split;
pub mod windows;

pub use manifest::{Manifest, SceneEntry};
pub use neighbors::{extract_neighbors, NeighborIndex, NeighborVariant};
pub use scene::{
    format_canonical, load_scene, load_scene_files, parse_records, read_records, Column, Delimiter, FormatSpec, Record,
    Scene, Track,
};
pub use split::{make_split, validation_count, Split, SplitPlan, VALIDATION_FRACTION};
pub use windows::{
    format_windows, parse_windows, slice_track, slice_windows, to_relative, window_spans, RelativeWindow,
    TrajectoryWindow, WindowId,
};
