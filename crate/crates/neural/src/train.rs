//! Seeded mini-batch MSE training.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::network::{Network, OUTPUT_DIM};
use crate::tensor::Tensor;
use crate::NeuralError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0004,
            batch_size: 64,
            epochs: 35,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(NeuralError::Config(
                "batch size and epoch count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Paired feature and target rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl Dataset {
    pub fn new(inputs: Tensor, targets: Tensor) -> Result<Self, NeuralError> {
        if inputs.rows() != targets.rows() {
            return Err(NeuralError::Shape(format!(
                "{} input rows vs {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        if targets.cols() != OUTPUT_DIM {
            return Err(NeuralError::Shape(format!(
                "targets must have {OUTPUT_DIM} columns, got {}",
                targets.cols()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }
}

/// Loss curves of one training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Training-set MSE before the first update.
    pub initial_train_loss: f64,
    /// Mean batch loss per epoch, weighted by batch size.
    pub train_loss: Vec<f64>,
    /// Validation MSE after each epoch; empty when no validation set is given.
    pub validation_loss: Vec<f64>,
}

impl TrainHistory {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.train_loss.last().copied()
    }
}

/// MSE of `network` over `data`, evaluated in chunks.
pub fn evaluate_mse(network: &Network, data: &Dataset) -> Result<f64, NeuralError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    const CHUNK: usize = 1024;
    let mut total = 0.0;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(CHUNK) {
        let x = data.inputs.select_rows(chunk);
        let y = data.targets.select_rows(chunk);
        let pred = network.forward(&x)?;
        total += pred
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / (data.len() * OUTPUT_DIM) as f64)
}

/// Trains for exactly `config.epochs` epochs, with no early stopping. Each
/// epoch shuffles the sample order with `rng`; the last batch may be short.
pub fn train<R: Rng + ?Sized>(
    network: &mut Network,
    train_set: &Dataset,
    validation: Option<&Dataset>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TrainHistory, NeuralError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(NeuralError::Config("empty training set".into()));
    }
    if train_set.inputs.cols() != network.input_dim() {
        return Err(NeuralError::Shape(format!(
            "training features have {} columns, network expects {}",
            train_set.inputs.cols(),
            network.input_dim()
        )));
    }

    let adam_config = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(adam_config, network.params());
    let mut history = TrainHistory {
        initial_train_loss: evaluate_mse(network, train_set)?,
        ..TrainHistory::default()
    };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(rng);
        let mut weighted = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = train_set.inputs.select_rows(batch);
            let y = train_set.targets.select_rows(batch);
            let pass = network.backward(&x, &y)?;
            adam.step(network.params_mut(), &pass.params)?;
            weighted += pass.loss * batch.len() as f64;
        }
        history.train_loss.push(weighted / train_set.len() as f64);
        if let Some(val) = validation {
            history.validation_loss.push(evaluate_mse(network, val)?);
        }
    }
    Ok(history)
}
