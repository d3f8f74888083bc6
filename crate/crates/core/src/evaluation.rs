//! ADE/FDE metrics and the leave-one-scene-out benchmark.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_split, Scene, Split, TrajectoryWindow, VALIDATION_FRACTION};
use crate::features::SceneIndex;
use crate::models::{fit_model, FittedModel, ModelSpec};
use crate::results::{ResultRow, AVG};
use crate::types::{displacements_to_positions, DisplacementSequence, Position, HORIZON, OBSERVED_STEPS};
use crate::CoreError;

fn check_pair(predicted: &[Position], truth: &[Position]) -> Result<(), CoreError> {
    if truth.is_empty() {
        return Err(CoreError::InsufficientLength { needed: 1, got: 0 });
    }
    if predicted.len() < truth.len() {
        return Err(CoreError::Shape(format!(
            "prediction has {} steps but ground truth has {}",
            predicted.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Mean distance over the ground-truth steps; the prediction is truncated
/// to the ground-truth length.
pub fn ade(predicted: &[Position], truth: &[Position]) -> Result<f64, CoreError> {
    check_pair(predicted, truth)?;
    let sum: f64 = predicted.iter().zip(truth).map(|(p, t)| p.distance(t)).sum();
    Ok(sum / truth.len() as f64)
}

/// Distance at the last ground-truth step.
pub fn fde(predicted: &[Position], truth: &[Position]) -> Result<f64, CoreError> {
    check_pair(predicted, truth)?;
    let last = truth.len() - 1;
    Ok(predicted[last].distance(&truth[last]))
}

/// Smallest ADE and smallest FDE over the samples, minimized independently.
pub fn min_over_k(samples: &[Vec<Position>], truth: &[Position]) -> Result<(f64, f64), CoreError> {
    if samples.is_empty() {
        return Err(CoreError::Config(
            "best-of-k evaluation needs at least one sample".into(),
        ));
    }
    let mut best = (f64::INFINITY, f64::INFINITY);
    for s in samples {
        best.0 = best.0.min(ade(s, truth)?);
        best.1 = best.1.min(fde(s, truth)?);
    }
    Ok(best)
}

/// Errors of one or more displacement predictions for a window, measured on
/// absolute positions rebuilt from the anchor.
pub fn window_errors(predictions: &[DisplacementSequence], window: &TrajectoryWindow) -> Result<(f64, f64), CoreError> {
    let anchor = window.anchor();
    let samples: Vec<Vec<Position>> = predictions
        .iter()
        .map(|p| displacements_to_positions(anchor, p))
        .collect();
    min_over_k(&samples, window.future.positions())
}

/// Leave-one-scene-out settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub seed: u64,
    /// Folds to run, by test scene; empty means every scene.
    #[serde(default)]
    pub test_scenes: Vec<String>,
    /// Worker threads for fold jobs; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
}

impl Protocol {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            test_scenes: Vec::new(),
            workers: 0,
        }
    }

    pub fn folds(&self, scenes: &[Scene]) -> Result<Vec<String>, CoreError> {
        if self.test_scenes.is_empty() {
            return Ok(scenes.iter().map(|s| s.name.clone()).collect());
        }
        for t in &self.test_scenes {
            if !scenes.iter().any(|s| &s.name == t) {
                return Err(CoreError::Config(format!("unknown test scene {t:?}")));
            }
        }
        Ok(self.test_scenes.clone())
    }

    /// Runs `f` on a pool sized by `workers`.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, CoreError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CoreError::Config(format!("worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub scene: String,
    pub ade: f64,
    pub fde: f64,
    pub windows: usize,
}

/// Training facts of one fold.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub scene: String,
    pub train_windows: usize,
    pub validation_windows: usize,
    pub initial_train_loss: Option<f64>,
    pub final_train_loss: Option<f64>,
    pub final_validation_loss: Option<f64>,
    pub rank_deficient: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub variant: String,
    pub spec: ModelSpec,
    pub seed: u64,
    pub scenes: Vec<SceneScore>,
    /// Unweighted mean of the scene values.
    pub ade: f64,
    pub fde: f64,
    pub windows: usize,
    pub diagnostics: Vec<FoldDiagnostics>,
}

impl EvalReport {
    pub fn from_folds(spec: &ModelSpec, seed: u64, folds: Vec<(SceneScore, FoldDiagnostics)>) -> Self {
        let n = folds.len().max(1) as f64;
        let (scenes, diagnostics): (Vec<SceneScore>, Vec<FoldDiagnostics>) = folds.into_iter().unzip();
        Self {
            model: spec.label().into(),
            variant: spec.variant_tag(),
            spec: spec.clone(),
            seed,
            ade: scenes.iter().map(|s| s.ade).sum::<f64>() / n,
            fde: scenes.iter().map(|s| s.fde).sum::<f64>() / n,
            windows: scenes.iter().map(|s| s.windows).sum(),
            scenes,
            diagnostics,
        }
    }

    pub fn score(&self, scene: &str) -> Option<&SceneScore> {
        self.scenes.iter().find(|s| s.scene == scene)
    }

    /// ADE and FDE rows per scene, then the averages.
    pub fn rows(&self, table: &str, config_hash: &str) -> Vec<ResultRow> {
        let row = |scene: &str, metric: &str, value: f64, windows: usize| ResultRow {
            table: table.into(),
            model: self.model.clone(),
            variant: self.variant.clone(),
            scene: scene.into(),
            metric: metric.into(),
            value,
            windows,
            seed: self.seed,
            config_hash: config_hash.into(),
        };
        let mut out = Vec::new();
        for (metric, avg) in [("ADE", self.ade), ("FDE", self.fde)] {
            for s in &self.scenes {
                let v = if metric == "ADE" { s.ade } else { s.fde };
                out.push(row(&s.scene, metric, v, s.windows));
            }
            out.push(row(AVG, metric, avg, self.windows));
        }
        out
    }
}

pub struct FoldOutcome {
    pub score: SceneScore,
    pub diagnostics: FoldDiagnostics,
    pub model: FittedModel,
}

/// Mean errors of a fitted model over `windows`. The sampled model draws
/// from one ChaCha8 stream seeded with `seed`, window by window in order.
pub fn score_windows(
    model: &FittedModel,
    windows: &[TrajectoryWindow],
    index: Option<&SceneIndex>,
    seed: u64,
) -> Result<(f64, f64), CoreError> {
    if windows.is_empty() {
        return Err(CoreError::Validation("no test windows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let predictions = model.predict_all(windows, index, &mut rng)?;
    let errors = predictions
        .par_iter()
        .zip(windows)
        .map(|(p, w)| window_errors(p, w))
        .collect::<Result<Vec<_>, _>>()?;
    let n = errors.len() as f64;
    Ok((
        errors.iter().map(|e| e.0).sum::<f64>() / n,
        errors.iter().map(|e| e.1).sum::<f64>() / n,
    ))
}

/// Fits `spec` on the split's training windows and scores it on its test
/// scene.
pub fn evaluate_fold(
    spec: &ModelSpec,
    split: &Split,
    index: Option<&SceneIndex>,
    seed: u64,
) -> Result<FoldOutcome, CoreError> {
    let model = fit_model(spec, &split.train, &split.validation, index, seed)?;
    let (ade, fde) = score_windows(&model, &split.test, index, seed)?;
    let mut diagnostics = FoldDiagnostics {
        scene: split.plan.test_scene.clone(),
        train_windows: split.train.len(),
        validation_windows: split.validation.len(),
        ..Default::default()
    };
    match &model {
        FittedModel::Lin(m) => diagnostics.rank_deficient = Some(m.rank_deficient),
        FittedModel::Neural(n) => {
            diagnostics.initial_train_loss = Some(n.history.initial_train_loss);
            diagnostics.final_train_loss = n.history.final_train_loss();
            diagnostics.final_validation_loss = n.history.validation_loss.last().copied();
        }
        _ => {}
    }
    Ok(FoldOutcome {
        score: SceneScore {
            scene: split.plan.test_scene.clone(),
            ade,
            fde,
            windows: split.test.len(),
        },
        diagnostics,
        model,
    })
}

fn needs_index(models: &[ModelSpec]) -> bool {
    models.iter().any(|m| match m {
        ModelSpec::Ff(n) | ModelSpec::Red(n) => n.variant.steps().is_some(),
        _ => false,
    })
}

/// Trains and scores every model on every fold. Fold jobs run in parallel;
/// the reports come back in model order with folds in scene order.
pub fn run_benchmark(
    models: &[ModelSpec],
    scenes: &[Scene],
    protocol: &Protocol,
) -> Result<Vec<EvalReport>, CoreError> {
    if models.is_empty() {
        return Err(CoreError::Config("no models to evaluate".into()));
    }
    for m in models {
        m.validate()?;
    }
    let folds = protocol.folds(scenes)?;
    let splits = folds
        .iter()
        .map(|t| make_split(scenes, t, protocol.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let index = needs_index(models).then(|| SceneIndex::new(scenes));
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..splits.len()).map(move |f| (m, f)))
        .collect();

    let outcomes = protocol.install(|| {
        jobs.par_iter()
            .map(|&(m, f)| {
                evaluate_fold(&models[m], &splits[f], index.as_ref(), protocol.seed)
                    .map(|o| (o.score, o.diagnostics))
                    .map_err(|e| CoreError::Fold {
                        model: format!("{} [{}]", models[m].label(), models[m].variant_tag()),
                        scene: folds[f].clone(),
                        source: Box::new(e),
                    })
            })
            .collect::<Vec<_>>()
    })?;

    let mut outcomes = outcomes.into_iter();
    let mut reports = Vec::with_capacity(models.len());
    for spec in models {
        let folds = outcomes.by_ref().take(splits.len()).collect::<Result<Vec<_>, _>>()?;
        reports.push(EvalReport::from_folds(spec, protocol.seed, folds));
    }
    Ok(reports)
}

/// Structured export with the full protocol description.
pub fn reports_json(reports: &[EvalReport], protocol: &Protocol, config_hash: &str) -> Result<String, CoreError> {
    let doc = serde_json::json!({
        "config_hash": config_hash,
        "protocol": {
            "observed_steps": OBSERVED_STEPS,
            "horizon": HORIZON,
            "scheme": "leave-one-scene-out",
            "validation_fraction": VALIDATION_FRACTION,
            "seed": protocol.seed,
            "test_scenes": protocol.test_scenes,
        },
        "reports": reports,
    });
    serde_json::to_string_pretty(&doc).map_err(|e| CoreError::Validation(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, dx: f64, dy: f64) -> Vec<Position> {
        (0..n).map(|i| Position::new(i as f64 * dx, i as f64 * dy)).collect()
    }

    #[test]
    fn metric_examples() {
        let gt = line(12, 0.4, 0.1);
        assert_eq!(ade(&gt, &gt).unwrap(), 0.0);
        assert_eq!(fde(&gt, &gt).unwrap(), 0.0);
        let shifted: Vec<Position> = gt.iter().map(|p| Position::new(p.x + 3.0, p.y + 4.0)).collect();
        assert!((ade(&shifted, &gt).unwrap() - 5.0).abs() < 1e-12);
        let mut last = gt.clone();
        last[11].y += 2.0;
        assert!((fde(&last, &gt).unwrap() - 2.0).abs() < 1e-12);
        assert!((ade(&last, &gt).unwrap() - 2.0 / 12.0).abs() < 1e-12);
        let mut early = last.clone();
        early[3].x += 7.0;
        assert_eq!(fde(&early, &gt).unwrap(), fde(&last, &gt).unwrap());
    }

    #[test]
    fn prediction_is_truncated_to_ground_truth() {
        let pred = line(12, 1.0, 0.0);
        let gt = line(3, 1.0, 0.0);
        assert_eq!(ade(&pred, &gt).unwrap(), 0.0);
        assert!(matches!(ade(&pred, &[]), Err(CoreError::InsufficientLength { .. })));
        assert!(matches!(fde(&gt, &pred), Err(CoreError::Shape(_))));
    }

    #[test]
    fn best_of_k_examples() {
        let gt = line(12, 0.4, 0.0);
        let other = line(12, 0.0, 0.4);
        assert!(matches!(min_over_k(&[], &gt), Err(CoreError::Config(_))));
        let single = min_over_k(std::slice::from_ref(&other), &gt).unwrap();
        assert_eq!(single, (ade(&other, &gt).unwrap(), fde(&other, &gt).unwrap()));
        assert_eq!(min_over_k(&[other, gt.clone()], &gt).unwrap(), (0.0, 0.0));
    }
}
