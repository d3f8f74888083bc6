//! Model configurations, fitting and prediction.

use std::collections::BTreeMap;

use cvbench_neural::{train, Architecture, Checkpoint, Dataset, Network, Tensor, TrainConfig, TrainHistory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{const_acc_predict, cvm_predict, cvm_sampled_predict, LinRegModel};
use crate::data::{NeighborVariant, TrajectoryWindow};
use crate::features::{augment_rotations, FeatureSpec, Representation, Sample, SceneIndex};
use crate::types::{DisplacementSequence, HORIZON};
use crate::CoreError;

/// Standard deviation of the training rotation augmentation, in degrees.
pub const ROTATION_SIGMA_DEG: f64 = 180.0;

fn default_k() -> usize {
    20
}

fn default_sigma() -> f64 {
    25.0
}

/// Options shared by the two learned networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralSpec {
    #[serde(default)]
    pub representation: Representation,
    /// History steps fed to the network; defaults to the full history.
    #[serde(default)]
    pub history: Option<usize>,
    #[serde(default)]
    pub variant: NeighborVariant,
    /// Rotate each training sample once by a random angle.
    #[serde(default)]
    pub rotations: bool,
    #[serde(default)]
    pub train: TrainConfig,
}

impl Default for NeuralSpec {
    fn default() -> Self {
        Self {
            representation: Representation::Relative,
            history: None,
            variant: NeighborVariant::Basic,
            rotations: false,
            train: TrainConfig::default(),
        }
    }
}

impl NeuralSpec {
    pub fn features(&self) -> FeatureSpec {
        let spec = FeatureSpec::new(self.representation, self.variant);
        match self.history {
            Some(h) => spec.with_history(h),
            None => spec,
        }
    }

    fn tag(&self) -> String {
        let mut tag = self.representation.name().to_string();
        if self.rotations {
            tag.push_str("+rot");
        }
        if let Some(h) = self.history {
            if h != self.representation.max_history() {
                tag.push_str(&format!("/h{h}"));
            }
        }
        if self.variant != NeighborVariant::Basic {
            tag.push('/');
            tag.push_str(self.variant.name());
        }
        tag
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Constant velocity model.
    Cvm,
    /// Constant velocity with angular noise, scored best-of-k.
    CvmSampled {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_sigma")]
        sigma_deg: f64,
    },
    ConstAcc,
    Lin {
        #[serde(default = "absolute")]
        representation: Representation,
    },
    Ff(NeuralSpec),
    Red(NeuralSpec),
}

fn absolute() -> Representation {
    Representation::Absolute
}

impl ModelSpec {
    /// Column label used in result tables.
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Cvm => "OUR",
            ModelSpec::CvmSampled { .. } => "OUR-S",
            ModelSpec::ConstAcc => "ConstAcc",
            ModelSpec::Lin { .. } => "Lin",
            ModelSpec::Ff(_) => "FF",
            ModelSpec::Red(_) => "RED",
        }
    }

    /// Short description of the options that distinguish runs of the same
    /// model.
    pub fn variant_tag(&self) -> String {
        match self {
            ModelSpec::Cvm | ModelSpec::ConstAcc => "-".into(),
            ModelSpec::CvmSampled { k, sigma_deg } => format!("k{k}/sigma{sigma_deg}"),
            ModelSpec::Lin { representation } => representation.name().into(),
            ModelSpec::Ff(n) | ModelSpec::Red(n) => n.tag(),
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, ModelSpec::Lin { .. } | ModelSpec::Ff(_) | ModelSpec::Red(_))
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        match self {
            ModelSpec::CvmSampled { k, sigma_deg } => {
                if *k == 0 {
                    return Err(CoreError::Config("OUR-S needs k >= 1".into()));
                }
                if !(*sigma_deg >= 0.0 && sigma_deg.is_finite()) {
                    return Err(CoreError::Config(format!("invalid sigma {sigma_deg}")));
                }
            }
            ModelSpec::Ff(n) | ModelSpec::Red(n) => {
                n.features().validate()?;
                n.train.validate()?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// A trained network with its input layout.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralModel {
    pub network: Network,
    pub features: FeatureSpec,
    pub train_config: TrainConfig,
    pub seed: u64,
    pub history: TrainHistory,
}

impl NeuralModel {
    fn check_layout(&self) -> Result<(), CoreError> {
        if self.network.input_dim() != self.features.input_dim() {
            return Err(CoreError::Config(format!(
                "network takes {} inputs but the {} feature layout has {}",
                self.network.input_dim(),
                self.features.variant.name(),
                self.features.input_dim()
            )));
        }
        Ok(())
    }

    pub fn feature_rows(&self, windows: &[TrajectoryWindow], index: Option<&SceneIndex>) -> Result<Tensor, CoreError> {
        let rows = windows
            .iter()
            .map(|w| Sample::from_window(w, self.features.variant, index)?.features(&self.features))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Tensor::from_rows(&rows)?)
    }

    /// Twelve predicted displacements per window.
    pub fn predict_windows(
        &self,
        windows: &[TrajectoryWindow],
        index: Option<&SceneIndex>,
    ) -> Result<Vec<DisplacementSequence>, CoreError> {
        self.check_layout()?;
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(1024) {
            let x = self.feature_rows(chunk, index)?;
            let y = self.network.forward(&x)?;
            for r in 0..y.rows() {
                out.push(DisplacementSequence::from_flat(y.row(r))?);
            }
        }
        Ok(out)
    }

    pub fn predict_window(
        &self,
        window: &TrajectoryWindow,
        index: Option<&SceneIndex>,
    ) -> Result<DisplacementSequence, CoreError> {
        Ok(self.predict_windows(std::slice::from_ref(window), index)?.remove(0))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("representation".into(), self.features.representation.name().into());
        meta.insert("history".into(), self.features.history.to_string());
        meta.insert("variant".into(), self.features.variant.name().into());
        Checkpoint::new(&self.network, self.train_config, self.seed, meta)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, CoreError> {
        let get = |k: &str| {
            ckpt.metadata
                .get(k)
                .ok_or_else(|| CoreError::Config(format!("checkpoint lacks {k:?} metadata")))
        };
        let representation = Representation::parse(get("representation")?)?;
        let history: usize = get("history")?
            .parse()
            .map_err(|_| CoreError::Config("bad history metadata".into()))?;
        let variant = match get("variant")?.as_str() {
            "basic" => NeighborVariant::Basic,
            "history" => NeighborVariant::History,
            "future" => NeighborVariant::Future,
            other => return Err(CoreError::Config(format!("unknown variant {other:?}"))),
        };
        let model = Self {
            network: ckpt.network()?,
            features: FeatureSpec::new(representation, variant).with_history(history),
            train_config: ckpt.train_config,
            seed: ckpt.seed,
            history: TrainHistory::default(),
        };
        model.features.validate()?;
        model.check_layout()?;
        Ok(model)
    }
}

#[derive(Clone, Debug)]
pub enum FittedModel {
    Cvm,
    CvmSampled { k: usize, sigma_deg: f64 },
    ConstAcc,
    Lin(LinRegModel),
    Neural(Box<NeuralModel>),
}

fn full_samples(
    windows: &[TrajectoryWindow],
    variant: NeighborVariant,
    index: Option<&SceneIndex>,
) -> Result<Vec<Sample>, CoreError> {
    windows
        .iter()
        .filter(|w| w.is_full())
        .map(|w| Sample::from_window(w, variant, index))
        .collect()
}

fn dataset(samples: &[Sample], spec: &FeatureSpec) -> Result<Dataset, CoreError> {
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for s in samples {
        xs.push(s.features(spec)?);
        ys.push(s.target_row().expect("only full windows are sampled"));
    }
    let inputs = if xs.is_empty() {
        Tensor::zeros(0, spec.input_dim())
    } else {
        Tensor::from_rows(&xs)?
    };
    let targets = if ys.is_empty() {
        Tensor::zeros(0, 2 * HORIZON)
    } else {
        Tensor::from_rows(&ys)?
    };
    Ok(Dataset::new(inputs, targets)?)
}

/// Fits `spec` on the full-length training windows. Learned models draw
/// weight initialization, rotation angles and batch order, in that order,
/// from one ChaCha8 stream seeded with `seed`.
pub fn fit_model(
    spec: &ModelSpec,
    train_windows: &[TrajectoryWindow],
    validation: &[TrajectoryWindow],
    index: Option<&SceneIndex>,
    seed: u64,
) -> Result<FittedModel, CoreError> {
    spec.validate()?;
    Ok(match spec {
        ModelSpec::Cvm => FittedModel::Cvm,
        ModelSpec::CvmSampled { k, sigma_deg } => FittedModel::CvmSampled {
            k: *k,
            sigma_deg: *sigma_deg,
        },
        ModelSpec::ConstAcc => FittedModel::ConstAcc,
        ModelSpec::Lin { representation } => {
            let fspec = FeatureSpec::new(*representation, NeighborVariant::Basic);
            let samples = full_samples(train_windows, NeighborVariant::Basic, None)?;
            let xs = samples
                .iter()
                .map(|s| s.features(&fspec))
                .collect::<Result<Vec<_>, _>>()?;
            let ys: Vec<Vec<f64>> = samples.iter().filter_map(Sample::target_row).collect();
            FittedModel::Lin(LinRegModel::fit(*representation, &xs, &ys)?)
        }
        ModelSpec::Ff(n) | ModelSpec::Red(n) => {
            let features = n.features();
            let arch = match spec {
                ModelSpec::Ff(_) => Architecture::feed_forward(features.input_dim()),
                _ => Architecture::recurrent_encoder(features.history, features.neighbor_dim()),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut network = Network::new(arch, &mut rng);
            let mut samples = full_samples(train_windows, n.variant, index)?;
            if samples.is_empty() {
                return Err(CoreError::Config("no full-length training windows".into()));
            }
            if n.rotations {
                samples = augment_rotations(samples, ROTATION_SIGMA_DEG, &mut rng)?;
            }
            let train_set = dataset(&samples, &features)?;
            let val_set = dataset(&full_samples(validation, n.variant, index)?, &features)?;
            let val = (!val_set.is_empty()).then_some(&val_set);
            let history = train(&mut network, &train_set, val, &n.train, &mut rng)?;
            FittedModel::Neural(Box::new(NeuralModel {
                network,
                features,
                train_config: n.train,
                seed,
                history,
            }))
        }
    })
}

impl FittedModel {
    /// Predicted displacement sequences per window: one for deterministic
    /// models, `k` for the sampled model.
    pub fn predict_all<R: Rng + ?Sized>(
        &self,
        windows: &[TrajectoryWindow],
        index: Option<&SceneIndex>,
        rng: &mut R,
    ) -> Result<Vec<Vec<DisplacementSequence>>, CoreError> {
        match self {
            FittedModel::Cvm => windows
                .iter()
                .map(|w| Ok(vec![cvm_predict(&w.observed, HORIZON)?]))
                .collect(),
            FittedModel::CvmSampled { k, sigma_deg } => windows
                .iter()
                .map(|w| cvm_sampled_predict(&w.observed, HORIZON, *k, *sigma_deg, rng))
                .collect(),
            FittedModel::ConstAcc => windows
                .iter()
                .map(|w| Ok(vec![const_acc_predict(&w.observed, HORIZON)?]))
                .collect(),
            FittedModel::Lin(m) => {
                let spec = FeatureSpec::new(m.representation, NeighborVariant::Basic);
                windows
                    .iter()
                    .map(|w| {
                        let f = Sample::from_window(w, NeighborVariant::Basic, None)?.features(&spec)?;
                        Ok(vec![DisplacementSequence::from_flat(&m.predict_row(&f)?)?])
                    })
                    .collect()
            }
            FittedModel::Neural(n) => Ok(n
                .predict_windows(windows, index)?
                .into_iter()
                .map(|p| vec![p])
                .collect()),
        }
    }

    pub fn neural(&self) -> Option<&NeuralModel> {
        match self {
            FittedModel::Neural(n) => Some(n),
            _ => None,
        }
    }
}
