//! Closed-form predictors: constant velocity, sampled constant velocity,
//! constant acceleration, and multi-target linear regression.

use faer::Mat;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::features::Representation;
use crate::types::{Displacement, DisplacementSequence, MotionHistory, HORIZON};
use crate::CoreError;

fn last_displacement(history: &MotionHistory) -> Result<Displacement, CoreError> {
    let p = history.positions();
    if p.len() < 2 {
        return Err(CoreError::InsufficientHistory {
            needed: 2,
            got: p.len(),
        });
    }
    Ok(p[p.len() - 1] - p[p.len() - 2])
}

/// Repeats the most recent displacement `horizon` times.
pub fn cvm_predict(history: &MotionHistory, horizon: usize) -> Result<DisplacementSequence, CoreError> {
    Ok(DisplacementSequence::repeated(last_displacement(history)?, horizon))
}

/// `k` constant-velocity rollouts, each with the last displacement rotated
/// by its own angle drawn from `N(0, sigma_deg^2)` degrees. One angle per
/// sample, so every rollout is a straight ray with the observed speed.
pub fn cvm_sampled_predict<R: Rng + ?Sized>(
    history: &MotionHistory,
    horizon: usize,
    k: usize,
    sigma_deg: f64,
    rng: &mut R,
) -> Result<Vec<DisplacementSequence>, CoreError> {
    let delta = last_displacement(history)?;
    if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
        return Err(CoreError::Config(format!("invalid angular sigma {sigma_deg}")));
    }
    let normal = Normal::new(0.0, sigma_deg.to_radians()).expect("sigma checked above");
    Ok((0..k)
        .map(|_| {
            let angle = normal.sample(rng);
            DisplacementSequence::repeated(delta.rotated(angle), horizon)
        })
        .collect())
}

/// Extrapolates the acceleration of the last three positions:
/// `out[k] = v + (k + 1) * a`.
pub fn const_acc_predict(history: &MotionHistory, horizon: usize) -> Result<DisplacementSequence, CoreError> {
    let p = history.positions();
    if p.len() < 3 {
        return Err(CoreError::InsufficientHistory {
            needed: 3,
            got: p.len(),
        });
    }
    let n = p.len();
    let v1 = p[n - 2] - p[n - 3];
    let v2 = p[n - 1] - p[n - 2];
    let a = v2 - v1;
    Ok(DisplacementSequence::new(
        (0..horizon).map(|k| v2 + a.scaled((k + 1) as f64)).collect(),
    ))
}

/// Independent least-squares fit per output: `y_j = w_j . x + b_j` for the
/// 24 predicted displacement components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinRegModel {
    pub representation: Representation,
    pub input_dim: usize,
    /// `outputs x input_dim`, row-major.
    pub weights: Vec<f64>,
    pub intercept: Vec<f64>,
    /// Numerical rank of the design matrix (including the intercept column).
    pub rank: usize,
    pub rank_deficient: bool,
}

pub const LINREG_FORMAT: &str = "cvbench-linreg";
pub const LINREG_VERSION: u32 = 1;

impl LinRegModel {
    pub fn outputs(&self) -> usize {
        self.intercept.len()
    }

    pub fn zeros(representation: Representation, input_dim: usize) -> Self {
        Self {
            representation,
            input_dim,
            weights: vec![0.0; 2 * HORIZON * input_dim],
            intercept: vec![0.0; 2 * HORIZON],
            rank: 0,
            rank_deficient: false,
        }
    }

    /// Ordinary least squares over feature rows `x` and target rows `y`,
    /// solved through the SVD so a rank-deficient design yields the
    /// minimum-norm solution (and sets `rank_deficient`).
    pub fn fit(representation: Representation, x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Self, CoreError> {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        let m = y.first().map_or(0, Vec::len);
        if n != y.len() {
            return Err(CoreError::Shape(format!("{n} feature rows vs {} target rows", y.len())));
        }
        if n < d + 1 {
            return Err(CoreError::InsufficientLength { needed: d + 1, got: n });
        }
        if x.iter().any(|r| r.len() != d) || y.iter().any(|r| r.len() != m) {
            return Err(CoreError::Shape("ragged regression rows".into()));
        }

        let design = Mat::from_fn(n, d + 1, |i, j| if j < d { x[i][j] } else { 1.0 });
        let svd = design
            .thin_svd()
            .map_err(|e| CoreError::Degenerate(format!("singular value decomposition: {e:?}")))?;
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        let max_sv = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
        let tol = max_sv * (n.max(d + 1) as f64) * f64::EPSILON;
        let rank = (0..s.nrows()).filter(|&i| s[i] > tol).count();

        // Minimum-norm solution V S^+ U^T Y over the retained directions.
        let targets = Mat::from_fn(n, m, |i, j| y[i][j]);
        let mut proj = u.transpose() * &targets;
        for k in 0..proj.nrows() {
            let inv = if s[k] > tol { 1.0 / s[k] } else { 0.0 };
            for j in 0..m {
                proj[(k, j)] *= inv;
            }
        }
        let coef = v * &proj;

        let mut weights = Vec::with_capacity(m * d);
        for j in 0..m {
            for i in 0..d {
                weights.push(coef[(i, j)]);
            }
        }
        let intercept = (0..m).map(|j| coef[(d, j)]).collect();
        Ok(Self {
            representation,
            input_dim: d,
            weights,
            intercept,
            rank,
            rank_deficient: rank < d + 1,
        })
    }

    /// Affine map of one feature row.
    pub fn predict_row(&self, features: &[f64]) -> Result<Vec<f64>, CoreError> {
        if features.len() != self.input_dim {
            return Err(CoreError::Shape(format!(
                "linear model expects {} features, got {}",
                self.input_dim,
                features.len()
            )));
        }
        Ok(self
            .intercept
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let w = &self.weights[j * self.input_dim..(j + 1) * self.input_dim];
                b + w.iter().zip(features).map(|(a, x)| a * x).sum::<f64>()
            })
            .collect())
    }

    /// Text matrix format: a header block followed by one line per output,
    /// `intercept w_0 ... w_{d-1}`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{LINREG_FORMAT} {LINREG_VERSION}\nrepresentation {}\ninput_dim {}\noutputs {}\nrank {}\n",
            self.representation.name(),
            self.input_dim,
            self.outputs(),
            self.rank
        );
        for j in 0..self.outputs() {
            let mut row = vec![self.intercept[j].to_string()];
            row.extend(
                self.weights[j * self.input_dim..(j + 1) * self.input_dim]
                    .iter()
                    .map(f64::to_string),
            );
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CoreError> {
        let err = |line: usize, message: &str| CoreError::Parse {
            source_name: "linreg model".into(),
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<String, CoreError> {
            let (i, line) = lines.next().ok_or_else(|| err(0, "truncated header"))?;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| err(i + 1, &format!("expected {key:?}")))
        };
        let version = header(LINREG_FORMAT)?;
        if version != LINREG_VERSION.to_string() {
            return Err(err(1, &format!("unsupported version {version}")));
        }
        let representation = Representation::parse(&header("representation")?)?;
        let input_dim: usize = header("input_dim")?.parse().map_err(|_| err(3, "bad input_dim"))?;
        let outputs: usize = header("outputs")?.parse().map_err(|_| err(4, "bad outputs"))?;
        let rank: usize = header("rank")?.parse().map_err(|_| err(5, "bad rank"))?;
        let mut weights = Vec::with_capacity(outputs * input_dim);
        let mut intercept = Vec::with_capacity(outputs);
        let body: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
        if body.len() != outputs {
            return Err(err(0, &format!("expected {outputs} weight rows, found {}", body.len())));
        }
        for (i, line) in body {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| err(i + 1, "bad number")))
                .collect::<Result<_, _>>()?;
            if vals.len() != input_dim + 1 {
                return Err(err(i + 1, "wrong row width"));
            }
            intercept.push(vals[0]);
            weights.extend_from_slice(&vals[1..]);
        }
        Ok(Self {
            representation,
            input_dim,
            weights,
            intercept,
            rank,
            rank_deficient: rank < input_dim + 1,
        })
    }
}
