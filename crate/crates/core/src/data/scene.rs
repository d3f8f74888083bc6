//! Annotation file ingestion.
//!
//! The canonical format is plain text with one observation per line:
//! `frame pedestrian_id x y`, whitespace separated, world coordinates in
//! meters. Other column layouts and delimiters are described by a
//! [`FormatSpec`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::Position;
use crate::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Frame,
    Id,
    X,
    Y,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    Whitespace,
    Comma,
    Tab,
    Semicolon,
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::Semicolon => line.split(';').map(str::trim).collect(),
        }
    }

    pub fn parse(name: &str) -> Result<Self, CoreError> {
        match name {
            "whitespace" | "space" => Ok(Delimiter::Whitespace),
            "comma" | "," => Ok(Delimiter::Comma),
            "tab" | "\\t" => Ok(Delimiter::Tab),
            "semicolon" | ";" => Ok(Delimiter::Semicolon),
            other => Err(CoreError::Config(format!("unknown delimiter {other:?}"))),
        }
    }
}

/// Column layout of an annotation file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub columns: Vec<Column>,
    pub delimiter: Delimiter,
    /// Frame-index increment between consecutive observations. `None`
    /// infers it per file as the gcd of all per-pedestrian frame gaps.
    #[serde(default)]
    pub frame_step: Option<i64>,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self::canonical()
    }
}

impl FormatSpec {
    pub fn canonical() -> Self {
        Self {
            columns: vec![Column::Frame, Column::Id, Column::X, Column::Y],
            delimiter: Delimiter::Whitespace,
            frame_step: None,
        }
    }

    /// Named presets: `canonical`, `tsv` (tab separated, canonical column
    /// order), `csv` (comma separated, canonical order) and `eth-obsmat`
    /// (frame, id, pos_x, pos_z, pos_y, vel_x, vel_z, vel_y).
    pub fn preset(name: &str) -> Result<Self, CoreError> {
        use Column::*;
        let (columns, delimiter) = match name {
            "canonical" => (vec![Frame, Id, X, Y], Delimiter::Whitespace),
            "tsv" => (vec![Frame, Id, X, Y], Delimiter::Tab),
            "csv" => (vec![Frame, Id, X, Y], Delimiter::Comma),
            "eth-obsmat" => (vec![Frame, Id, X, Skip, Y, Skip, Skip, Skip], Delimiter::Whitespace),
            other => return Err(CoreError::Config(format!("unknown input format {other:?}"))),
        };
        Ok(Self {
            columns,
            delimiter,
            frame_step: None,
        })
    }

    /// Parses a column order such as `frame,id,y,x`; `_` or `skip` ignores a
    /// column.
    pub fn parse_columns(order: &str) -> Result<Vec<Column>, CoreError> {
        let columns: Vec<Column> = order
            .split(',')
            .map(|c| match c.trim() {
                "frame" => Ok(Column::Frame),
                "id" => Ok(Column::Id),
                "x" => Ok(Column::X),
                "y" => Ok(Column::Y),
                "_" | "skip" => Ok(Column::Skip),
                other => Err(CoreError::Config(format!("unknown column {other:?}"))),
            })
            .collect::<Result<_, _>>()?;
        for required in [Column::Frame, Column::Id, Column::X, Column::Y] {
            if columns.iter().filter(|&&c| c == required).count() != 1 {
                return Err(CoreError::Config(format!(
                    "column order {order:?} must name {required:?} exactly once"
                )));
            }
        }
        Ok(columns)
    }
}

/// One annotated observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub frame: i64,
    pub pedestrian_id: u64,
    pub position: Position,
}

fn parse_integral(field: &str, what: &str) -> Result<f64, String> {
    let v: f64 = field.parse().map_err(|_| format!("{what} {field:?} is not a number"))?;
    if !v.is_finite() || v.fract() != 0.0 {
        return Err(format!("{what} {field:?} is not an integer"));
    }
    Ok(v)
}

/// Parses annotation text. Blank lines and lines starting with `#` are
/// skipped; line numbers in errors are 1-based.
pub fn parse_records(text: &str, spec: &FormatSpec, source: &str) -> Result<Vec<Record>, CoreError> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| CoreError::Parse {
            source_name: source.to_string(),
            line: line_no,
            message,
        };
        let fields = spec.delimiter.split(line);
        if fields.len() != spec.columns.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                spec.columns.len(),
                fields.len()
            )));
        }
        let (mut frame, mut id, mut x, mut y) = (0.0, 0.0, 0.0, 0.0);
        for (col, field) in spec.columns.iter().zip(&fields) {
            match col {
                Column::Frame => frame = parse_integral(field, "frame").map_err(parse_err)?,
                Column::Id => id = parse_integral(field, "pedestrian id").map_err(parse_err)?,
                Column::X => {
                    x = field
                        .parse()
                        .map_err(|_| parse_err(format!("x {field:?} is not a number")))?
                }
                Column::Y => {
                    y = field
                        .parse()
                        .map_err(|_| parse_err(format!("y {field:?} is not a number")))?
                }
                Column::Skip => {}
            }
        }
        if id < 0.0 {
            return Err(parse_err(format!("negative pedestrian id {id}")));
        }
        let position = Position::new(x, y);
        if !position.is_finite() {
            return Err(CoreError::Validation(format!(
                "{source}:{line_no}: non-finite coordinate ({x}, {y})"
            )));
        }
        records.push(Record {
            frame: frame as i64,
            pedestrian_id: id as u64,
            position,
        });
    }
    Ok(records)
}

pub fn read_records(path: &Path, spec: &FormatSpec) -> Result<Vec<Record>, CoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    parse_records(&text, spec, &path.display().to_string())
}

/// Canonical text: `frame id x y`, one record per line, in input order.
/// Floats use the shortest representation that parses back to the same
/// value, so re-reading and re-writing is byte-identical.
pub fn format_canonical(records: &[Record]) -> String {
    let mut out = String::with_capacity(records.len() * 24);
    for r in records {
        let _ = writeln!(out, "{} {} {} {}", r.frame, r.pedestrian_id, r.position.x, r.position.y);
    }
    out
}

/// A contiguous trajectory of one pedestrian: consecutive frames with a
/// constant step, no gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    /// Index into [`Scene::recordings`].
    pub recording: usize,
    pub pedestrian_id: u64,
    pub start_frame: i64,
    pub frame_step: i64,
    pub positions: Vec<Position>,
}

impl Track {
    pub fn frame_at(&self, index: usize) -> i64 {
        self.start_frame + index as i64 * self.frame_step
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// All tracks of one benchmark scene. A scene may combine several
/// recordings; pedestrian ids are only unique within a recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub recordings: Vec<String>,
    pub tracks: Vec<Track>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Scene {
    /// Groups records by pedestrian, sorts by frame and splits at every frame
    /// gap. Duplicate `(frame, id)` records are rejected.
    pub fn add_recording(
        &mut self,
        source: &str,
        records: &[Record],
        frame_step: Option<i64>,
    ) -> Result<(), CoreError> {
        let recording = self.recordings.len();
        let mut by_id: BTreeMap<u64, Vec<(i64, Position)>> = BTreeMap::new();
        for r in records {
            by_id.entry(r.pedestrian_id).or_default().push((r.frame, r.position));
        }
        for (id, obs) in by_id.iter_mut() {
            obs.sort_by_key(|o| o.0);
            if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(CoreError::Validation(format!(
                    "{source}: pedestrian {id} has two records at frame {}",
                    w[0].0
                )));
            }
        }
        let step = match frame_step {
            Some(s) if s > 0 => s,
            Some(s) => return Err(CoreError::Config(format!("frame step must be positive, got {s}"))),
            None => {
                let g = by_id
                    .values()
                    .flat_map(|obs| obs.windows(2).map(|w| w[1].0 - w[0].0))
                    .fold(0, gcd);
                if g == 0 {
                    1
                } else {
                    g
                }
            }
        };

        for (&pedestrian_id, obs) in &by_id {
            let mut start = 0;
            for k in 1..=obs.len() {
                if k == obs.len() || obs[k].0 - obs[k - 1].0 != step {
                    self.tracks.push(Track {
                        recording,
                        pedestrian_id,
                        start_frame: obs[start].0,
                        frame_step: step,
                        positions: obs[start..k].iter().map(|o| o.1).collect(),
                    });
                    start = k;
                }
            }
        }
        self.recordings.push(source.to_string());
        Ok(())
    }

    /// Records of one recording, ordered by frame then pedestrian.
    pub fn records(&self, recording: usize) -> Vec<Record> {
        let mut out: Vec<Record> = self
            .tracks
            .iter()
            .filter(|t| t.recording == recording)
            .flat_map(|t| {
                t.positions.iter().enumerate().map(move |(k, &position)| Record {
                    frame: t.frame_at(k),
                    pedestrian_id: t.pedestrian_id,
                    position,
                })
            })
            .collect();
        out.sort_by_key(|r| (r.frame, r.pedestrian_id));
        out
    }

    pub fn from_records(name: &str, records: &[Record], frame_step: Option<i64>) -> Result<Self, CoreError> {
        let mut scene = Scene {
            name: name.to_string(),
            recordings: Vec::new(),
            tracks: Vec::new(),
        };
        scene.add_recording(name, records, frame_step)?;
        Ok(scene)
    }
}

/// Loads one annotation file as a scene named after the file stem.
pub fn load_scene(path: &Path, spec: &FormatSpec) -> Result<Scene, CoreError> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    load_scene_files(&name, &[path], spec)
}

/// Loads several recordings into one named scene.
pub fn load_scene_files<P: AsRef<Path>>(name: &str, paths: &[P], spec: &FormatSpec) -> Result<Scene, CoreError> {
    let mut scene = Scene {
        name: name.to_string(),
        recordings: Vec::new(),
        tracks: Vec::new(),
    };
    for path in paths {
        let path = path.as_ref();
        let records = read_records(path, spec)?;
        scene.add_recording(&path.display().to_string(), &records, spec.frame_step)?;
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_canonical_line() {
        let recs = parse_records("780 1 8.46 3.59\n", &FormatSpec::canonical(), "t").unwrap();
        assert_eq!(
            recs,
            vec![Record {
                frame: 780,
                pedestrian_id: 1,
                position: Position::new(8.46, 3.59)
            }]
        );
    }

    #[test]
    fn parses_float_encoded_integers_and_tabs() {
        let recs = parse_records("780.0\t1.0\t8.46\t3.59", &FormatSpec::preset("tsv").unwrap(), "t").unwrap();
        assert_eq!(recs[0].frame, 780);
        assert_eq!(recs[0].pedestrian_id, 1);
    }

    #[test]
    fn swapped_column_order() {
        let spec = FormatSpec {
            columns: FormatSpec::parse_columns("frame,id,y,x").unwrap(),
            ..FormatSpec::canonical()
        };
        let recs = parse_records("10 2 1.5 -4.0", &spec, "t").unwrap();
        assert_eq!(recs[0].position, Position::new(-4.0, 1.5));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = parse_records("1 1 0 0\n\n2 1 zero 0\n", &FormatSpec::canonical(), "f.txt").unwrap_err();
        match err {
            CoreError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_records("1 1 0\n", &FormatSpec::canonical(), "f.txt").unwrap_err();
        assert!(matches!(err, CoreError::Parse { line: 1, .. }));
        let err = parse_records("1.5 1 0 0\n", &FormatSpec::canonical(), "f.txt").unwrap_err();
        assert!(matches!(err, CoreError::Parse { line: 1, .. }));
    }

    #[test]
    fn non_finite_coordinate_is_a_validation_error() {
        let err = parse_records("1 1 NaN 0\n", &FormatSpec::canonical(), "f").unwrap_err();
        assert!(matches!(err, CoreError::Validation(_)));
        let err = parse_records("1 1 0 inf\n", &FormatSpec::canonical(), "f").unwrap_err();
        assert!(matches!(err, CoreError::Validation(_)));
    }

    #[test]
    fn groups_interleaved_pedestrians() {
        let mut text = String::new();
        for f in 0..30 {
            let _ = writeln!(text, "{} 1 {} 0", f * 10, f);
            if f < 20 {
                let _ = writeln!(text, "{} 2 0 {}", f * 10, f);
            }
        }
        let recs = parse_records(&text, &FormatSpec::canonical(), "t").unwrap();
        let scene = Scene::from_records("s", &recs, None).unwrap();
        let mut lens: Vec<(u64, usize, i64)> = scene
            .tracks
            .iter()
            .map(|t| (t.pedestrian_id, t.len(), t.frame_step))
            .collect();
        lens.sort();
        assert_eq!(lens, vec![(1, 30, 10), (2, 20, 10)]);
    }

    #[test]
    fn missing_frame_splits_track() {
        let text = "0 1 0 0\n10 1 1 0\n20 1 2 0\n40 1 4 0\n50 1 5 0\n";
        let recs = parse_records(text, &FormatSpec::canonical(), "t").unwrap();
        let scene = Scene::from_records("s", &recs, None).unwrap();
        assert_eq!(scene.tracks.len(), 2);
        assert_eq!(scene.tracks[0].len(), 3);
        assert_eq!(scene.tracks[1].start_frame, 40);
        assert_eq!(scene.tracks[1].len(), 2);
    }

    #[test]
    fn duplicate_frames_are_rejected() {
        let recs = parse_records("0 1 0 0\n0 1 1 1\n", &FormatSpec::canonical(), "t").unwrap();
        assert!(matches!(
            Scene::from_records("s", &recs, None),
            Err(CoreError::Validation(_))
        ));
    }

    #[test]
    fn canonical_output_round_trips() {
        let text = "780.0\t1.0\t8.46\t3.59\n790\t1\t-0.1\t1e-3\n";
        let recs = parse_records(text, &FormatSpec::preset("tsv").unwrap(), "t").unwrap();
        let once = format_canonical(&recs);
        assert_eq!(once, "780 1 8.46 3.59\n790 1 -0.1 0.001\n");
        let again = format_canonical(&parse_records(&once, &FormatSpec::canonical(), "t").unwrap());
        assert_eq!(once, again);
    }

    #[test]
    fn column_order_must_name_each_field_once() {
        assert!(FormatSpec::parse_columns("frame,id,x").is_err());
        assert!(FormatSpec::parse_columns("frame,id,x,x,y").is_err());
        assert!(FormatSpec::parse_columns("frame,_,id,x,y").is_ok());
        assert!(FormatSpec::preset("nonsense").is_err());
    }
}
