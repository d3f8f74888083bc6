//! Flat result rows shared by every experiment, with CSV I/O, merging and
//! Markdown rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::CoreError;

/// Scene label of averaged rows.
pub const AVG: &str = "AVG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub table: String,
    pub model: String,
    pub variant: String,
    pub scene: String,
    pub metric: String,
    pub value: f64,
    pub windows: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl ResultRow {
    /// Identity of the cell this row fills; two rows with the same key
    /// conflict.
    pub fn key(&self) -> (String, String, String, String, String, u64) {
        (
            self.table.clone(),
            self.model.clone(),
            self.variant.clone(),
            self.scene.clone(),
            self.metric.clone(),
            self.seed,
        )
    }
}

pub fn to_csv(rows: &[ResultRow]) -> Result<String, CoreError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| CoreError::Validation(format!("csv encoding: {e}")))?;
    }
    if rows.is_empty() {
        w.write_record([
            "table",
            "model",
            "variant",
            "scene",
            "metric",
            "value",
            "windows",
            "seed",
            "config_hash",
        ])
        .map_err(|e| CoreError::Validation(format!("csv encoding: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CoreError::Validation(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_csv(text: &str, source: &str) -> Result<Vec<ResultRow>, CoreError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<ResultRow>().enumerate() {
        let row = rec.map_err(|e| CoreError::Parse {
            source_name: source.to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        if !(row.value.is_finite() && row.value >= 0.0) {
            return Err(CoreError::Parse {
                source_name: source.to_string(),
                line: i + 2,
                message: format!("invalid value {}", row.value),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Concatenates rows from several sources. A cell present in two sources is
/// an error naming both.
pub fn merge_rows(sources: Vec<(String, Vec<ResultRow>)>) -> Result<Vec<ResultRow>, CoreError> {
    let mut seen: BTreeMap<_, String> = BTreeMap::new();
    let mut conflicts = Vec::new();
    let mut out = Vec::new();
    for (source, rows) in sources {
        for row in rows {
            match seen.get(&row.key()) {
                Some(first) => {
                    let (t, m, v, s, me, seed) = row.key();
                    conflicts.push(format!(
                        "{t}/{m}/{v}/{s}/{me}/seed {seed} appears in both {first} and {source}"
                    ));
                }
                None => {
                    seen.insert(row.key(), source.clone());
                }
            }
            out.push(row);
        }
    }
    if !conflicts.is_empty() {
        conflicts.dedup();
        return Err(CoreError::Validation(format!(
            "conflicting result cells:\n  {}",
            conflicts.join("\n  ")
        )));
    }
    Ok(out)
}

fn ordered<T: Ord + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut seen = BTreeSet::new();
    items.filter(|i| seen.insert(i.clone())).collect()
}

fn column_label(model: &str, variant: &str) -> String {
    if variant == "-" {
        model.to_string()
    } else {
        format!("{model} [{variant}]")
    }
}

/// One Markdown table per `table` value: metric/scene rows against
/// model/variant columns. Cells with several seeds show their mean.
pub fn render_markdown(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    for table in ordered(rows.iter().map(|r| r.table.clone())) {
        let rows: Vec<&ResultRow> = rows.iter().filter(|r| r.table == table).collect();
        let columns = ordered(rows.iter().map(|r| (r.model.clone(), r.variant.clone())));
        let lines = ordered(rows.iter().map(|r| (r.metric.clone(), r.scene.clone())));
        let mut cells: BTreeMap<_, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            cells
                .entry((r.metric.clone(), r.scene.clone(), r.model.clone(), r.variant.clone()))
                .or_default()
                .push(r.value);
        }

        let _ = writeln!(out, "### {table}\n");
        out.push_str("| Metric | Dataset |");
        for (m, v) in &columns {
            let _ = write!(out, " {} |", column_label(m, v));
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---:|".repeat(columns.len()));
        out.push('\n');
        for (metric, scene) in &lines {
            let _ = write!(out, "| {metric} | {scene} |");
            for (m, v) in &columns {
                match cells.get(&(metric.clone(), scene.clone(), m.clone(), v.clone())) {
                    Some(vals) => {
                        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                        let _ = write!(out, " {mean:.2} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        let seeds: Vec<String> = ordered(rows.iter().map(|r| r.seed))
            .iter()
            .map(u64::to_string)
            .collect();
        let hashes = ordered(rows.iter().map(|r| r.config_hash.clone()));
        let _ = writeln!(
            out,
            "\nSeeds: {}. Config hash: {}. Errors in meters; multi-seed cells are seed means.\n",
            seeds.join(", "),
            hashes.join(", ")
        );
    }
    out
}
