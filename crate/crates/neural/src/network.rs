//! The two regressors used by the benchmark.
//!
//! Both consume a flat feature row laid out as
//! `[step_0.x, step_0.y, ..., step_{n-1}.x, step_{n-1}.y, extra...]` where the
//! first `2 * steps` columns are the motion history and `extra` carries
//! optional flattened neighbor features. Both emit [`OUTPUT_DIM`] values, i.e.
//! twelve `(dx, dy)` pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, Var};
use crate::tensor::Tensor;
use crate::NeuralError;

/// Twelve predicted displacement pairs.
pub const OUTPUT_DIM: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// Fully connected ReLU network over the flattened features.
    FeedForward { input_dim: usize, hidden: Vec<usize> },
    /// Per-step linear embedding, single-gate recurrent encoder over the
    /// history, and an MLP decoder over `[final state, extra]`.
    RecurrentEncoder {
        steps: usize,
        extra_dim: usize,
        embed: usize,
        state: usize,
        decoder_hidden: usize,
    },
}

impl Architecture {
    /// Feed-forward network with hidden layers of 60 and 30 units.
    pub fn feed_forward(input_dim: usize) -> Self {
        Architecture::FeedForward {
            input_dim,
            hidden: vec![60, 30],
        }
    }

    /// Recurrent encoder with embedding 16, state 64 and decoder width 60.
    pub fn recurrent_encoder(steps: usize, extra_dim: usize) -> Self {
        Architecture::RecurrentEncoder {
            steps,
            extra_dim,
            embed: 16,
            state: 64,
            decoder_hidden: 60,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Architecture::FeedForward { input_dim, .. } => *input_dim,
            Architecture::RecurrentEncoder { steps, extra_dim, .. } => 2 * steps + extra_dim,
        }
    }

    /// Names and shapes of every parameter, in storage order.
    pub fn parameter_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut shapes = Vec::new();
        match self {
            Architecture::FeedForward { input_dim, hidden } => {
                let mut fan_in = *input_dim;
                for (i, &width) in hidden.iter().chain(std::iter::once(&OUTPUT_DIM)).enumerate() {
                    shapes.push((format!("layer{i}.weight"), fan_in, width));
                    shapes.push((format!("layer{i}.bias"), 1, width));
                    fan_in = width;
                }
            }
            Architecture::RecurrentEncoder {
                extra_dim,
                embed,
                state,
                decoder_hidden,
                ..
            } => {
                shapes.push(("embed.weight".into(), 2, *embed));
                shapes.push(("embed.bias".into(), 1, *embed));
                for gate in ["gate", "cand"] {
                    shapes.push((format!("{gate}.input"), *embed, *state));
                    shapes.push((format!("{gate}.recurrent"), *state, *state));
                    shapes.push((format!("{gate}.bias"), 1, *state));
                }
                shapes.push(("decoder0.weight".into(), state + extra_dim, *decoder_hidden));
                shapes.push(("decoder0.bias".into(), 1, *decoder_hidden));
                shapes.push(("decoder1.weight".into(), *decoder_hidden, OUTPUT_DIM));
                shapes.push(("decoder1.bias".into(), 1, OUTPUT_DIM));
            }
        }
        shapes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    architecture: Architecture,
    params: Vec<Param>,
}

/// Result of one reverse pass through a [`Network`].
#[derive(Clone, Debug)]
pub struct Backward {
    pub loss: f64,
    pub output: Tensor,
    /// One gradient per parameter, in parameter order.
    pub params: Vec<Tensor>,
    /// Gradient with respect to the input batch.
    pub input: Tensor,
}

impl Network {
    /// Uniform initialization in `±1/sqrt(fan_in)`, where `fan_in` is the
    /// number of rows of the weight the value feeds into. Biases use the
    /// fan-in of their layer's weight.
    pub fn new<R: Rng + ?Sized>(architecture: Architecture, rng: &mut R) -> Self {
        let shapes = architecture.parameter_shapes();
        let mut params = Vec::with_capacity(shapes.len());
        let mut last_fan_in = 1;
        for (name, rows, cols) in shapes {
            let fan_in = if rows == 1 { last_fan_in } else { rows };
            last_fan_in = fan_in;
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(Param {
                name,
                value: Tensor::from_vec(rows, cols, data).expect("shape from descriptor"),
            });
        }
        Self { architecture, params }
    }

    /// Every parameter set to zero.
    pub fn zeros(architecture: Architecture) -> Self {
        let params = architecture
            .parameter_shapes()
            .into_iter()
            .map(|(name, rows, cols)| Param {
                name,
                value: Tensor::zeros(rows, cols),
            })
            .collect();
        Self { architecture, params }
    }

    /// Rebuilds a network from stored parameters, checking names and shapes.
    pub fn from_params(architecture: Architecture, params: Vec<Param>) -> Result<Self, NeuralError> {
        let shapes = architecture.parameter_shapes();
        if shapes.len() != params.len() {
            return Err(NeuralError::Shape(format!(
                "expected {} parameters, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for ((name, rows, cols), p) in shapes.iter().zip(&params) {
            if *name != p.name || p.value.shape() != (*rows, *cols) {
                return Err(NeuralError::Shape(format!(
                    "parameter {} {:?} does not match {name} ({rows}x{cols})",
                    p.name,
                    p.value.shape()
                )));
            }
        }
        Ok(Self { architecture, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    fn check_input(&self, input: &Tensor) -> Result<(), NeuralError> {
        if input.cols() != self.input_dim() {
            return Err(NeuralError::Shape(format!(
                "network expects {} input features, got {}",
                self.input_dim(),
                input.cols()
            )));
        }
        Ok(())
    }

    /// Records the forward pass on `graph`; returns the parameter leaves and
    /// the `batch x 24` output node.
    pub fn record(&self, graph: &mut Graph, input: Var) -> Result<(Vec<Var>, Var), NeuralError> {
        let vars: Vec<Var> = self.params.iter().map(|p| graph.leaf(p.value.clone())).collect();
        let output = match &self.architecture {
            Architecture::FeedForward { hidden, .. } => {
                let mut h = input;
                for layer in 0..hidden.len() {
                    let z = graph.affine(h, vars[2 * layer], vars[2 * layer + 1])?;
                    h = graph.relu(z);
                }
                let last = hidden.len();
                graph.affine(h, vars[2 * last], vars[2 * last + 1])?
            }
            Architecture::RecurrentEncoder { steps, state, .. } => {
                let [emb_w, emb_b, gate_in, gate_rec, gate_b, cand_in, cand_rec, cand_b, dec0_w, dec0_b, dec1_w, dec1_b] =
                    vars[..]
                else {
                    unreachable!("recurrent encoder has twelve parameters");
                };
                let rows = graph.value(input).rows();
                let mut h = graph.leaf(Tensor::zeros(rows, *state));
                for step in 0..*steps {
                    let x = graph.slice_cols(input, 2 * step, 2 * step + 2)?;
                    let e = graph.affine(x, emb_w, emb_b)?;
                    // f = sigmoid(e Wf + h Uf + bf)
                    let fe = graph.affine(e, gate_in, gate_b)?;
                    let fh = graph.matmul(h, gate_rec)?;
                    let fz = graph.add(fe, fh)?;
                    let f = graph.sigmoid(fz);
                    // c = tanh(e Wc + (f * h) Uc + bc)
                    let ce = graph.affine(e, cand_in, cand_b)?;
                    let gated = graph.mul(f, h)?;
                    let ch = graph.matmul(gated, cand_rec)?;
                    let cz = graph.add(ce, ch)?;
                    let c = graph.tanh(cz);
                    // h' = (1 - f) * h + f * c
                    let keep_w = graph.one_minus(f);
                    let keep = graph.mul(keep_w, h)?;
                    let write = graph.mul(f, c)?;
                    h = graph.add(keep, write)?;
                }
                let total = graph.value(input).cols();
                let decoder_in = if total > 2 * steps {
                    let extra = graph.slice_cols(input, 2 * steps, total)?;
                    graph.concat_cols(&[h, extra])?
                } else {
                    h
                };
                let z = graph.affine(decoder_in, dec0_w, dec0_b)?;
                let a = graph.relu(z);
                graph.affine(a, dec1_w, dec1_b)?
            }
        };
        Ok((vars, output))
    }

    /// `batch x 24` predictions for a `batch x input_dim` feature matrix.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NeuralError> {
        self.check_input(input)?;
        let mut graph = Graph::new();
        let x = graph.leaf(input.clone());
        let (_, out) = self.record(&mut graph, x)?;
        Ok(graph.value(out).clone())
    }

    /// MSE loss against `target` with gradients for every parameter and for
    /// the input.
    pub fn backward(&self, input: &Tensor, target: &Tensor) -> Result<Backward, NeuralError> {
        self.check_input(input)?;
        let mut graph = Graph::new();
        let x = graph.leaf(input.clone());
        let (vars, out) = self.record(&mut graph, x)?;
        let y = graph.leaf(target.clone());
        let loss = graph.mse(out, y)?;
        let grads = graph.backward(loss);
        Ok(Backward {
            loss: graph.value(loss).get(0, 0),
            output: graph.value(out).clone(),
            params: vars.iter().map(|&v| grads.get_or_zeros(&graph, v)).collect(),
            input: grads.get_or_zeros(&graph, x),
        })
    }

    /// Gradient of `sum |output|` with respect to each input row. Rows are
    /// independent, so one pass over the batch yields every per-sample
    /// gradient.
    pub fn abs_sum_input_gradient(&self, input: &Tensor) -> Result<Tensor, NeuralError> {
        self.check_input(input)?;
        let mut graph = Graph::new();
        let x = graph.leaf(input.clone());
        let (_, out) = self.record(&mut graph, x)?;
        let a = graph.abs(out);
        let f = graph.sum(a);
        let grads = graph.backward(f);
        Ok(grads.get_or_zeros(&graph, x))
    }
}
