use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cvbench_core::analysis::{
    attribution_csv, attribution_experiment, copy_last_network, environmental_prior_experiment, gradient_attribution,
    history_correlation, history_deprivation_experiment, matrix_csv, neighbor_experiment,
};
use cvbench_core::data::{
    format_canonical, read_records, slice_windows, FormatSpec, Manifest, Scene, SceneEntry, TrajectoryWindow,
};
use cvbench_core::evaluation::{reports_json, run_benchmark};
use cvbench_core::models::FittedModel;
use cvbench_core::results::{merge_rows, parse_csv, render_markdown, to_csv, ResultRow};
use cvbench_core::CoreError;
use serde_json::json;

use crate::config::RunConfig;

pub const RESULTS_FILE: &str = "results.csv";

const PROTOCOL_NOTE: &str =
    "Protocol: leave-one-scene-out over the listed scenes; 8 observed positions (3.2 s) and up to \
12 predicted positions (4.8 s) at 0.4 s spacing. ADE and FDE in meters; OUR-S reports the best of its samples. \
AVG is the unweighted mean over scenes.\n";

/// A failed command with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Self {
            code: if e.is_config() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CoreError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CoreError::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CoreError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CoreError::Validation(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

pub struct ConvertArgs {
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub format: String,
    pub columns: Option<String>,
    pub scene: Option<String>,
    pub frame_step: Option<i64>,
}

/// Rewrites annotation files in the canonical layout and records them in
/// `manifest.toml` under the output directory. Returns the record count.
pub fn convert(args: &ConvertArgs) -> Result<usize, Failure> {
    let mut spec = FormatSpec::preset(&args.format)?;
    if let Some(cols) = &args.columns {
        spec.columns = FormatSpec::parse_columns(cols)?;
    }
    if let Some(step) = args.frame_step {
        if step <= 0 {
            return Err(CoreError::Config(format!("frame step must be positive, got {step}")).into());
        }
    }

    let mut outputs: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut total = 0;
    for input in &args.inputs {
        let stem = input
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CoreError::Config(format!("cannot name output for {}", input.display())))?;
        if !seen.insert(stem.to_string()) {
            return Err(CoreError::Config(format!("two inputs named {stem:?}")).into());
        }
        let records = read_records(input, &spec)?;
        let file = PathBuf::from(format!("{stem}.txt"));
        write_file(&args.output_dir.join(&file), &format_canonical(&records))?;
        total += records.len();
        let scene = args.scene.clone().unwrap_or_else(|| stem.to_string());
        outputs.entry(scene).or_default().push(file);
    }

    let manifest_path = args.output_dir.join("manifest.toml");
    let mut manifest = if manifest_path.is_file() {
        Manifest::load(&manifest_path)?
    } else {
        Manifest {
            scenes: Vec::new(),
            base_dir: args.output_dir.clone(),
        }
    };
    for (name, files) in outputs {
        let mut all = manifest
            .scenes
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.files.clone())
            .unwrap_or_default();
        for f in files {
            if !all.contains(&f) {
                all.push(f);
            }
        }
        manifest.upsert(SceneEntry {
            name,
            files: all,
            format: None,
            columns: None,
            frame_step: args.frame_step,
        });
    }
    write_file(&manifest_path, &manifest.to_toml())?;
    Ok(total)
}

fn load_scenes(cfg: &RunConfig) -> Result<Vec<Scene>, CoreError> {
    let scenes = cfg.load_manifest()?.load_scenes()?;
    if scenes.is_empty() {
        return Err(CoreError::Config("manifest lists no scenes".into()));
    }
    Ok(scenes)
}

fn metadata(cfg: &RunConfig, command: &str) -> serde_json::Value {
    json!({
        "command": command,
        "config_hash": cfg.hash(),
        "seeds": cfg.seeds,
        "config": cfg.hashed_view(),
    })
}

fn write_table(dir: &Path, rows: &[ResultRow]) -> Result<String, CoreError> {
    write_file(&dir.join(RESULTS_FILE), &to_csv(rows)?)?;
    let markdown = format!("{}{PROTOCOL_NOTE}", render_markdown(rows));
    write_file(&dir.join("report.md"), &markdown)?;
    Ok(markdown)
}

/// Runs every configured model under the leave-one-scene-out protocol for
/// each seed. Writes `results.csv`, `report.md` and `reports.json` into
/// `<output>/evaluate` and returns the Markdown.
pub fn evaluate(cfg: &RunConfig) -> Result<String, Failure> {
    if cfg.models.is_empty() {
        return Err(CoreError::Config("no models to evaluate".into()).into());
    }
    let scenes = load_scenes(cfg)?;
    let hash = cfg.hash();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let protocol = cfg.protocol(seed);
        let reports = run_benchmark(&cfg.models, &scenes, &protocol)?;
        rows.extend(reports.iter().flat_map(|r| r.rows("benchmark", &hash)));
        let run: serde_json::Value = serde_json::from_str(&reports_json(&reports, &protocol, &hash)?)
            .map_err(|e| CoreError::Validation(e.to_string()))?;
        runs.push(run);
    }

    let dir = cfg.output_dir().join("evaluate");
    let markdown = write_table(&dir, &rows)?;
    let mut meta = metadata(cfg, "evaluate");
    meta["runs"] = serde_json::Value::Array(runs);
    write_json(&dir.join("reports.json"), &meta)?;
    Ok(markdown)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Priors,
    Attribution,
    Correlation,
    Deprivation,
    Neighbors,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Priors => "priors",
            Experiment::Attribution => "attribution",
            Experiment::Correlation => "correlation",
            Experiment::Deprivation => "deprivation",
            Experiment::Neighbors => "neighbors",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    /// Hand-built network that repeats the last observed displacement.
    CopyLast,
}

fn all_windows(scenes: &[Scene]) -> Vec<TrajectoryWindow> {
    scenes.iter().flat_map(slice_windows).collect()
}

/// Runs one analysis and writes its outputs and `metadata.json` into
/// `<output>/<experiment>`. Returns the directory.
pub fn analyze(experiment: Experiment, cfg: &RunConfig, fixture: Option<Fixture>) -> Result<PathBuf, Failure> {
    if fixture.is_some() && experiment != Experiment::Attribution {
        return Err(CoreError::Config("--fixture only applies to the attribution experiment".into()).into());
    }
    let scenes = load_scenes(cfg)?;
    let hash = cfg.hash();
    let grid = cfg.grid();
    let dir = cfg.output_dir().join(experiment.name());
    let mut meta = metadata(cfg, &format!("analyze {}", experiment.name()));
    let mut files = Vec::new();

    match experiment {
        Experiment::Priors => {
            let table = environmental_prior_experiment(&scenes, &grid)?;
            write_table(&dir, &table.rows(&hash))?;
            files.extend([RESULTS_FILE, "report.md"].map(String::from));
        }
        Experiment::Deprivation => {
            let table = history_deprivation_experiment(&scenes, &grid, &cfg.experiment.history_lengths)?;
            write_table(&dir, &table.rows(&hash))?;
            files.extend([RESULTS_FILE, "report.md"].map(String::from));
        }
        Experiment::Neighbors => {
            let table = neighbor_experiment(&scenes, &grid)?;
            write_table(&dir, &table.rows(&hash))?;
            files.extend([RESULTS_FILE, "report.md"].map(String::from));
        }
        Experiment::Correlation => {
            let c = history_correlation(&all_windows(&scenes))?;
            write_file(&dir.join("x.csv"), &matrix_csv(&c.x))?;
            write_file(&dir.join("y.csv"), &matrix_csv(&c.y))?;
            files.extend(["x.csv", "y.csv"].map(String::from));
            meta["windows"] = json!(c.windows);
            meta["min_coefficient"] = json!(c.min());
        }
        Experiment::Attribution => match fixture {
            Some(Fixture::CopyLast) => {
                let model = FittedModel::Neural(Box::new(copy_last_network()));
                let dist = gradient_attribution(&model, &all_windows(&scenes), None)?;
                let name = "attribution_copy_last.csv".to_string();
                write_file(&dir.join(&name), &attribution_csv(&dist))?;
                files.push(name);
                meta["fixture"] = json!("copy-last");
            }
            None => {
                for &family in &grid.families {
                    for &seed in &grid.seeds {
                        let dist = attribution_experiment(&scenes, family, seed, &grid)?;
                        let name = format!("attribution_{}_seed{seed}.csv", family.label().to_lowercase());
                        write_file(&dir.join(&name), &attribution_csv(&dist))?;
                        files.push(name);
                    }
                }
            }
        },
    }
    meta["outputs"] = json!(files);
    write_json(&dir.join("metadata.json"), &meta)?;
    Ok(dir)
}

fn collect_result_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), CoreError> {
    if path.is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| CoreError::io(path, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| CoreError::io(path, err)))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_result_files(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == RESULTS_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

/// Merges result CSVs (given directly or found as `results.csv` under
/// directories) into one Markdown report. Unreadable files and
/// conflicting cells are reported together.
pub fn report(paths: &[PathBuf]) -> Result<String, Failure> {
    let mut files = Vec::new();
    let mut offenders = Vec::new();
    for p in paths {
        if !p.exists() {
            offenders.push(format!("{}: no such file or directory", p.display()));
            continue;
        }
        collect_result_files(p, &mut files)?;
    }
    let mut sources = Vec::new();
    for f in &files {
        let name = f.display().to_string();
        let parsed = std::fs::read_to_string(f)
            .map_err(|e| CoreError::io(f, e))
            .and_then(|text| parse_csv(&text, &name));
        match parsed {
            Ok(rows) if rows.is_empty() => offenders.push(format!("{name}: no result rows")),
            Ok(rows) => sources.push((name, rows)),
            Err(e) => offenders.push(e.to_string()),
        }
    }
    if !offenders.is_empty() {
        return Err(Failure::runtime(format!(
            "unusable result files:\n  {}",
            offenders.join("\n  ")
        )));
    }
    if sources.is_empty() {
        return Err(Failure::runtime("no result files found"));
    }
    let rows = merge_rows(sources).map_err(|e| Failure::runtime(e.to_string()))?;
    Ok(format!("{}{PROTOCOL_NOTE}", render_markdown(&rows)))
}
