//! Diagnostic experiments: environmental priors, gradient attribution over
//! the motion history, history correlation, history deprivation and
//! neighbor information.

use std::fmt::Write as _;

use cvbench_neural::{Architecture, Network, Param, Tensor, TrainConfig, TrainHistory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_split, NeighborVariant, Scene, TrajectoryWindow};
use crate::evaluation::{run_benchmark, EvalReport, Protocol};
use crate::features::{FeatureSpec, Representation, SceneIndex};
use crate::models::{fit_model, FittedModel, ModelSpec, NeuralModel, NeuralSpec};
use crate::results::{ResultRow, AVG};
use crate::types::{AttributionDistribution, OBSERVED_STEPS};
use crate::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ff,
    Red,
}

impl Family {
    pub fn spec(self, n: NeuralSpec) -> ModelSpec {
        match self {
            Family::Ff => ModelSpec::Ff(n),
            Family::Red => ModelSpec::Red(n),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::Ff => "FF",
            Family::Red => "RED",
        }
    }
}

/// Training setups compared in the environmental-prior experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorVariant {
    /// Absolute positions.
    Basic,
    /// Relative displacements.
    Relative,
    /// Relative displacements with random rotations.
    Rotations,
}

impl PriorVariant {
    pub const ALL: [PriorVariant; 3] = [PriorVariant::Basic, PriorVariant::Relative, PriorVariant::Rotations];

    pub fn name(self) -> &'static str {
        match self {
            PriorVariant::Basic => "Basic",
            PriorVariant::Relative => "Relative",
            PriorVariant::Rotations => "Rotations",
        }
    }

    pub fn neural_spec(self, train: TrainConfig) -> NeuralSpec {
        NeuralSpec {
            representation: match self {
                PriorVariant::Basic => Representation::Absolute,
                _ => Representation::Relative,
            },
            rotations: self == PriorVariant::Rotations,
            train,
            ..NeuralSpec::default()
        }
    }
}

/// Relative inputs with rotation augmentation, the setup the history and
/// neighbor experiments build on.
pub fn rotations_spec(train: TrainConfig) -> NeuralSpec {
    PriorVariant::Rotations.neural_spec(train)
}

/// Shared settings of an experiment grid. Every cell is one full
/// leave-one-scene-out run per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub families: Vec<Family>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Scene reported next to the average in the prior table.
    #[serde(default = "default_focus")]
    pub focus_scene: String,
    #[serde(default)]
    pub test_scenes: Vec<String>,
    #[serde(default)]
    pub workers: usize,
}

fn default_focus() -> String {
    "Hotel".into()
}

impl ExperimentGrid {
    pub fn new(families: Vec<Family>, seeds: Vec<u64>) -> Self {
        Self {
            families,
            seeds,
            train: TrainConfig::default(),
            focus_scene: default_focus(),
            test_scenes: Vec::new(),
            workers: 0,
        }
    }

    pub fn protocol(&self, seed: u64) -> Protocol {
        Protocol {
            seed,
            test_scenes: self.test_scenes.clone(),
            workers: self.workers,
        }
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.families.is_empty() {
            return Err(CoreError::Config("experiment grid has no model families".into()));
        }
        if self.seeds.is_empty() {
            return Err(CoreError::Config("experiment grid has no seeds".into()));
        }
        Ok(self.train.validate()?)
    }

    /// One report per (seed, model), seeds outermost.
    pub fn run(&self, models: &[ModelSpec], scenes: &[Scene]) -> Result<Vec<EvalReport>, CoreError> {
        self.validate()?;
        let mut out = Vec::new();
        for &seed in &self.seeds {
            out.extend(run_benchmark(models, scenes, &self.protocol(seed))?);
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn row(
    table: &str,
    model: &str,
    variant: &str,
    scene: &str,
    metric: &str,
    value: f64,
    windows: usize,
    seed: u64,
    hash: &str,
) -> ResultRow {
    ResultRow {
        table: table.into(),
        model: model.into(),
        variant: variant.into(),
        scene: scene.into(),
        metric: metric.into(),
        value,
        windows,
        seed,
        config_hash: hash.into(),
    }
}

/// One trained configuration's errors for one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub family: Family,
    pub level: String,
    pub seed: u64,
    pub report: EvalReport,
}

impl GridCell {
    fn avg_rows(&self, table: &str, hash: &str) -> Vec<ResultRow> {
        let r = &self.report;
        vec![
            row(
                table,
                self.family.label(),
                &self.level,
                AVG,
                "ADE",
                r.ade,
                r.windows,
                self.seed,
                hash,
            ),
            row(
                table,
                self.family.label(),
                &self.level,
                AVG,
                "FDE",
                r.fde,
                r.windows,
                self.seed,
                hash,
            ),
        ]
    }
}

fn run_levels(
    grid: &ExperimentGrid,
    scenes: &[Scene],
    levels: &[(String, NeuralSpec)],
) -> Result<Vec<GridCell>, CoreError> {
    let mut models = Vec::new();
    let mut tags = Vec::new();
    for &family in &grid.families {
        for (level, spec) in levels {
            models.push(family.spec(spec.clone()));
            tags.push((family, level.clone()));
        }
    }
    let reports = grid.run(&models, scenes)?;
    Ok(reports
        .into_iter()
        .enumerate()
        .map(|(i, report)| {
            let (family, level) = tags[i % tags.len()].clone();
            GridCell {
                family,
                level,
                seed: report.seed,
                report,
            }
        })
        .collect())
}

/// Mean of a cell value over seeds.
pub fn seed_mean(cells: &[GridCell], family: Family, level: &str, value: impl Fn(&GridCell) -> f64) -> Option<f64> {
    let vals: Vec<f64> = cells
        .iter()
        .filter(|c| c.family == family && c.level == level)
        .map(value)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorTable {
    pub focus_scene: String,
    pub cells: Vec<GridCell>,
}

impl PriorTable {
    /// Focus-scene and average rows per family, variant, metric and seed.
    pub fn rows(&self, hash: &str) -> Vec<ResultRow> {
        let mut out = Vec::new();
        for c in &self.cells {
            if let Some(s) = c.report.score(&self.focus_scene) {
                for (metric, v) in [("ADE", s.ade), ("FDE", s.fde)] {
                    out.push(row(
                        "priors",
                        c.family.label(),
                        &c.level,
                        &s.scene,
                        metric,
                        v,
                        s.windows,
                        c.seed,
                        hash,
                    ));
                }
            }
            out.extend(c.avg_rows("priors", hash));
        }
        out
    }

    pub fn focus(&self, family: Family, variant: PriorVariant, seed: u64) -> Option<(f64, f64)> {
        self.cells
            .iter()
            .find(|c| c.family == family && c.level == variant.name() && c.seed == seed)
            .and_then(|c| c.report.score(&self.focus_scene))
            .map(|s| (s.ade, s.fde))
    }
}

/// Trains every family with absolute inputs, relative inputs and relative
/// inputs with rotations.
pub fn environmental_prior_experiment(scenes: &[Scene], grid: &ExperimentGrid) -> Result<PriorTable, CoreError> {
    let levels: Vec<(String, NeuralSpec)> = PriorVariant::ALL
        .iter()
        .map(|v| (v.name().to_string(), v.neural_spec(grid.train)))
        .collect();
    Ok(PriorTable {
        focus_scene: grid.focus_scene.clone(),
        cells: run_levels(grid, scenes, &levels)?,
    })
}

/// Unnormalized attribution: for each history timestep, the sum over
/// windows of the norm of the gradient of `sum |outputs|` with respect to
/// that timestep's input pair.
pub fn attribution_sums(
    model: &NeuralModel,
    windows: &[TrajectoryWindow],
    index: Option<&SceneIndex>,
) -> Result<Vec<f64>, CoreError> {
    let steps = model.features.history;
    let chunks: Vec<&[TrajectoryWindow]> = windows.chunks(512).collect();
    let partial = chunks
        .par_iter()
        .map(|chunk| {
            let x = model.feature_rows(chunk, index)?;
            let g = model.network.abs_sum_input_gradient(&x)?;
            let mut sums = vec![0.0; steps];
            for r in 0..g.rows() {
                let row = g.row(r);
                for (t, s) in sums.iter_mut().enumerate() {
                    *s += row[2 * t].hypot(row[2 * t + 1]);
                }
            }
            Ok(sums)
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    let mut total = vec![0.0; steps];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total)
}

/// Normalized per-timestep influence of the motion history on a trained
/// network's predictions.
pub fn gradient_attribution(
    model: &FittedModel,
    windows: &[TrajectoryWindow],
    index: Option<&SceneIndex>,
) -> Result<AttributionDistribution, CoreError> {
    let neural = model
        .neural()
        .ok_or_else(|| CoreError::Capability("gradient attribution needs a network with input gradients".into()))?;
    AttributionDistribution::from_sums(attribution_sums(neural, windows, index)?)
}

/// Attribution of networks trained with rotations, summed over the test
/// windows of every fold before normalizing.
pub fn attribution_experiment(
    scenes: &[Scene],
    family: Family,
    seed: u64,
    grid: &ExperimentGrid,
) -> Result<AttributionDistribution, CoreError> {
    let spec = family.spec(rotations_spec(grid.train));
    let protocol = grid.protocol(seed);
    let folds = protocol.folds(scenes)?;
    let sums = protocol.install(|| {
        folds
            .par_iter()
            .map(|test| {
                let split = make_split(scenes, test, seed)?;
                let model = fit_model(&spec, &split.train, &split.validation, None, seed)?;
                let neural = model.neural().expect("neural spec");
                attribution_sums(neural, &split.test, None)
            })
            .collect::<Result<Vec<_>, CoreError>>()
    })??;
    let mut total = vec![0.0; spec_history(&spec)];
    for s in sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    AttributionDistribution::from_sums(total)
}

fn spec_history(spec: &ModelSpec) -> usize {
    match spec {
        ModelSpec::Ff(n) | ModelSpec::Red(n) => n.features().history,
        _ => 0,
    }
}

/// Hand-built network over seven relative displacements whose prediction
/// repeats the last displacement twelve times.
pub fn copy_last_network() -> NeuralModel {
    let features = FeatureSpec::new(Representation::Relative, NeighborVariant::Basic);
    let input = features.input_dim();
    let arch = Architecture::FeedForward {
        input_dim: input,
        hidden: vec![4],
    };
    // Hidden units carry relu(dx), relu(-dx), relu(dy), relu(-dy).
    let mut w0 = Tensor::zeros(input, 4);
    w0.set(input - 2, 0, 1.0);
    w0.set(input - 2, 1, -1.0);
    w0.set(input - 1, 2, 1.0);
    w0.set(input - 1, 3, -1.0);
    let mut w1 = Tensor::zeros(4, 24);
    for k in 0..12 {
        w1.set(0, 2 * k, 1.0);
        w1.set(1, 2 * k, -1.0);
        w1.set(2, 2 * k + 1, 1.0);
        w1.set(3, 2 * k + 1, -1.0);
    }
    let params = vec![
        Param {
            name: "layer0.weight".into(),
            value: w0,
        },
        Param {
            name: "layer0.bias".into(),
            value: Tensor::zeros(1, 4),
        },
        Param {
            name: "layer1.weight".into(),
            value: w1,
        },
        Param {
            name: "layer1.bias".into(),
            value: Tensor::zeros(1, 24),
        },
    ];
    NeuralModel {
        network: Network::from_params(arch, params).expect("fixture shapes are consistent"),
        features,
        train_config: TrainConfig::default(),
        seed: 0,
        history: TrainHistory::default(),
    }
}

/// Pearson correlation, or `None` when either column has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return None;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetric matrix of column correlations with an exact unit diagonal for
/// non-constant columns.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let n = columns.len();
    let mut m = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let r = if i == j {
                pearson(&columns[i], &columns[i]).map(|_| 1.0)
            } else {
                pearson(&columns[i], &columns[j])
            };
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryCorrelation {
    pub windows: usize,
    pub x: Vec<Vec<Option<f64>>>,
    pub y: Vec<Vec<Option<f64>>>,
}

impl HistoryCorrelation {
    /// Smallest defined coefficient over both matrices.
    pub fn min(&self) -> Option<f64> {
        self.x
            .iter()
            .chain(&self.y)
            .flatten()
            .flatten()
            .copied()
            .reduce(f64::min)
    }
}

/// Correlation between the seven relative history timesteps across
/// windows, separately for the x and y components.
pub fn history_correlation(windows: &[TrajectoryWindow]) -> Result<HistoryCorrelation, CoreError> {
    if windows.len() < 2 {
        return Err(CoreError::InsufficientLength {
            needed: 2,
            got: windows.len(),
        });
    }
    let steps = OBSERVED_STEPS - 1;
    let mut xs: Vec<Vec<f64>> = (0..steps).map(|_| Vec::with_capacity(windows.len())).collect();
    let mut ys: Vec<Vec<f64>> = (0..steps).map(|_| Vec::with_capacity(windows.len())).collect();
    for w in windows {
        let p = w.observed.positions();
        for t in 0..steps {
            let d = p[t + 1] - p[t];
            xs[t].push(d.dx);
            ys[t].push(d.dy);
        }
    }
    Ok(HistoryCorrelation {
        windows: windows.len(),
        x: correlation_matrix(&xs),
        y: correlation_matrix(&ys),
    })
}

/// Matrix as CSV with `NA` for undefined coefficients.
pub fn matrix_csv(m: &[Vec<Option<f64>>]) -> String {
    let mut out = String::from("timestep");
    for j in 0..m.len() {
        let _ = write!(out, ",t{}", j + 1);
    }
    out.push('\n');
    for (i, r) in m.iter().enumerate() {
        let _ = write!(out, "t{}", i + 1);
        for v in r {
            match v {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push_str(",NA"),
            }
        }
        out.push('\n');
    }
    out
}

/// Per-timestep shares, oldest first.
pub fn attribution_csv(dist: &AttributionDistribution) -> String {
    let mut out = String::from("timestep,share\n");
    for (t, w) in dist.weights().iter().enumerate() {
        let _ = writeln!(out, "{},{w}", t + 1);
    }
    out
}

/// Sample standard deviation.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeprivationTable {
    pub lengths: Vec<usize>,
    pub cells: Vec<GridCell>,
}

fn history_level(h: usize) -> String {
    format!("h{h}")
}

impl DeprivationTable {
    /// Spread of the average errors across history lengths for one seed.
    pub fn sigma(&self, family: Family, seed: u64) -> Option<(f64, f64)> {
        let pick = |f: fn(&EvalReport) -> f64| -> Vec<f64> {
            self.lengths
                .iter()
                .filter_map(|&h| {
                    self.cells
                        .iter()
                        .find(|c| c.family == family && c.seed == seed && c.level == history_level(h))
                        .map(|c| f(&c.report))
                })
                .collect()
        };
        Some((sample_std(&pick(|r| r.ade))?, sample_std(&pick(|r| r.fde))?))
    }

    pub fn average(&self, family: Family, history: usize, seed: u64) -> Option<(f64, f64)> {
        self.cells
            .iter()
            .find(|c| c.family == family && c.seed == seed && c.level == history_level(history))
            .map(|c| (c.report.ade, c.report.fde))
    }

    pub fn rows(&self, hash: &str) -> Vec<ResultRow> {
        let mut out: Vec<ResultRow> = self
            .cells
            .iter()
            .flat_map(|c| c.avg_rows("deprivation", hash))
            .collect();
        let mut keys: Vec<(Family, u64)> = Vec::new();
        for c in &self.cells {
            if !keys.contains(&(c.family, c.seed)) {
                keys.push((c.family, c.seed));
            }
        }
        for (family, seed) in keys {
            if let Some((sa, sf)) = self.sigma(family, seed) {
                out.push(row(
                    "deprivation",
                    family.label(),
                    "sigma",
                    AVG,
                    "ADE",
                    sa,
                    0,
                    seed,
                    hash,
                ));
                out.push(row(
                    "deprivation",
                    family.label(),
                    "sigma",
                    AVG,
                    "FDE",
                    sf,
                    0,
                    seed,
                    hash,
                ));
            }
        }
        out
    }
}

/// Retrains with relative histories of each length (most recent steps
/// kept), horizon unchanged.
pub fn history_deprivation_experiment(
    scenes: &[Scene],
    grid: &ExperimentGrid,
    lengths: &[usize],
) -> Result<DeprivationTable, CoreError> {
    if lengths.is_empty() {
        return Err(CoreError::Config("no history lengths".into()));
    }
    let levels: Vec<(String, NeuralSpec)> = lengths
        .iter()
        .map(|&h| {
            let spec = NeuralSpec {
                history: Some(h),
                ..rotations_spec(grid.train)
            };
            spec.features().validate()?;
            Ok((history_level(h), spec))
        })
        .collect::<Result<_, CoreError>>()?;
    Ok(DeprivationTable {
        lengths: lengths.to_vec(),
        cells: run_levels(grid, scenes, &levels)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborTable {
    pub cells: Vec<GridCell>,
}

impl NeighborTable {
    pub fn average(&self, family: Family, variant: NeighborVariant, seed: u64) -> Option<(f64, f64)> {
        self.cells
            .iter()
            .find(|c| c.family == family && c.seed == seed && c.level == variant.name())
            .map(|c| (c.report.ade, c.report.fde))
    }

    pub fn rows(&self, hash: &str) -> Vec<ResultRow> {
        self.cells.iter().flat_map(|c| c.avg_rows("neighbors", hash)).collect()
    }
}

/// Compares no neighbor input, neighbor histories and true neighbor
/// futures, all on top of relative inputs with rotations.
pub fn neighbor_experiment(scenes: &[Scene], grid: &ExperimentGrid) -> Result<NeighborTable, CoreError> {
    let levels: Vec<(String, NeuralSpec)> = [
        NeighborVariant::Basic,
        NeighborVariant::History,
        NeighborVariant::Future,
    ]
    .into_iter()
    .map(|v| {
        (
            v.name().to_string(),
            NeuralSpec {
                variant: v,
                ..rotations_spec(grid.train)
            },
        )
    })
    .collect();
    Ok(NeighborTable {
        cells: run_levels(grid, scenes, &levels)?,
    })
}
