use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::replay::Experience;
use crate::error::{read_json, write_file, Error, Result};

/// One-hidden-layer Q-network: `q = W2ᵀ relu(W1ᵀ s + b1) + b2`.
///
/// `w1` is `d × h` and `w2` is `h × n_actions`, both row-major, so row `i`
/// of `w1` holds every weight leaving input feature `i` and column `a` of
/// `w2` holds every weight entering action `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct QWeights {
    pub d: usize,
    pub h: usize,
    pub n_actions: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub manifest: u64,
    pub seed: u64,
}

/// Dense gradient with the same shapes as [`QWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl QWeights {
    pub fn zeros(d: usize, h: usize, n_actions: usize, manifest: u64) -> Self {
        QWeights {
            d,
            h,
            n_actions,
            w1: vec![0.0; d * h],
            b1: vec![0.0; h],
            w2: vec![0.0; h * n_actions],
            b2: vec![0.0; n_actions],
            manifest,
            seed: 0,
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per layer, biases
    /// included.
    pub fn rand_init(d: usize, h: usize, n_actions: usize, manifest: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
        };
        let w1 = fill(d * h, d);
        let b1 = fill(h, d);
        let w2 = fill(h * n_actions, h);
        let b2 = fill(n_actions, h);
        QWeights {
            d,
            h,
            n_actions,
            w1,
            b1,
            w2,
            b2,
            manifest,
            seed,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|x| x.is_finite())
    }

    fn check_input(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                actual: s.len(),
            });
        }
        Ok(())
    }

    /// Hidden activations into `hidden`, Q-values into `q`. Zero inputs are
    /// skipped, which matters because state vectors are mostly zeros.
    fn forward_into(&self, s: &[f64], hidden: &mut [f64], q: &mut [f64]) {
        hidden.copy_from_slice(&self.b1);
        for (i, &x) in s.iter().enumerate() {
            if x != 0.0 {
                let row = &self.w1[i * self.h..(i + 1) * self.h];
                for (hj, w) in hidden.iter_mut().zip(row) {
                    *hj += x * w;
                }
            }
        }
        for hj in hidden.iter_mut() {
            if *hj < 0.0 {
                *hj = 0.0;
            }
        }
        q.copy_from_slice(&self.b2);
        for (j, &hj) in hidden.iter().enumerate() {
            if hj != 0.0 {
                let row = &self.w2[j * self.n_actions..(j + 1) * self.n_actions];
                for (qa, w) in q.iter_mut().zip(row) {
                    *qa += hj * w;
                }
            }
        }
    }

    pub fn forward(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_input(s)?;
        let mut hidden = vec![0.0; self.h];
        let mut q = vec![0.0; self.n_actions];
        self.forward_into(s, &mut hidden, &mut q);
        Ok(q)
    }

    pub fn max_q(&self, s: &[f64]) -> Result<f64> {
        Ok(self.forward(s)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Gradient of the batch loss `mean((Q(s,a) - y)^2)` with the targets
    /// `y` computed from `target`; only the chosen action's output receives
    /// gradient. Returns the loss alongside.
    pub fn gradient(&self, target: &QWeights, batch: &[&Experience], gamma: f64) -> Result<(f64, Gradients)> {
        let mut grads = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.h],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.n_actions],
        };
        let loss = self.accumulate(target, batch, gamma, &mut grads)?;
        Ok((loss, grads))
    }

    fn accumulate(&self, target: &QWeights, batch: &[&Experience], gamma: f64, grads: &mut Gradients) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("training batch is empty".into()));
        }
        let scale = 2.0 / batch.len() as f64;
        let mut hidden = vec![0.0; self.h];
        let mut q = vec![0.0; self.n_actions];
        let mut nonzero: Vec<(usize, f64)> = Vec::new();
        let mut loss = 0.0;
        for e in batch {
            self.check_input(&e.state.values)?;
            if e.action >= self.n_actions {
                return Err(Error::Dimension {
                    expected: self.n_actions,
                    actual: e.action + 1,
                });
            }
            let y = bellman_target(e.reward, e.done, &e.next_state.values, target, gamma)?;
            self.forward_into(&e.state.values, &mut hidden, &mut q);
            nonzero.clear();
            nonzero.extend(
                e.state
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(i, &x)| (i, x)),
            );
            let err = q[e.action] - y;
            loss += err * err;
            let delta = scale * err;
            grads.b2[e.action] += delta;
            for (j, &hj) in hidden.iter().enumerate() {
                if hj <= 0.0 {
                    continue;
                }
                grads.w2[j * self.n_actions + e.action] += delta * hj;
                let dh = delta * self.w2[j * self.n_actions + e.action];
                grads.b1[j] += dh;
                for &(i, x) in &nonzero {
                    grads.w1[i * self.h + j] += dh * x;
                }
            }
        }
        Ok(loss / batch.len() as f64)
    }

    pub fn apply(&mut self, grads: &Gradients, learning_rate: f64) {
        for (w, g) in self.w1.iter_mut().zip(&grads.w1) {
            *w -= learning_rate * g;
        }
        for (w, g) in self.b1.iter_mut().zip(&grads.b1) {
            *w -= learning_rate * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grads.w2) {
            *w -= learning_rate * g;
        }
        for (w, g) in self.b2.iter_mut().zip(&grads.b2) {
            *w -= learning_rate * g;
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = WeightFile::from(self);
        let mut text = serde_json::to_string(&file).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        text.push('\n');
        write_file(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: WeightFile = read_json(path)?;
        file.into_weights().map_err(|message| Error::Record {
            path: path.to_path_buf(),
            index: 0,
            message,
        })
    }
}

/// `r` for terminal transitions, `r + gamma * max_a Q_target(s', a)`
/// otherwise.
pub fn bellman_target(reward: f64, done: bool, next_state: &[f64], target: &QWeights, gamma: f64) -> Result<f64> {
    if done {
        return Ok(reward);
    }
    Ok(reward + gamma * target.max_q(next_state)?)
}

/// One SGD step on the batch. `target` is read only. Returns the batch
/// loss measured before the update; weights are left untouched when the
/// loss or the update is not finite.
pub fn train_batch(
    weights: &mut QWeights,
    target: &QWeights,
    batch: &[&Experience],
    learning_rate: f64,
    gamma: f64,
) -> Result<f64> {
    let (loss, grads) = weights.gradient(target, batch, gamma)?;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("batch loss is {loss}")));
    }
    let mut updated = weights.clone();
    updated.apply(&grads, learning_rate);
    if !updated.is_finite() {
        return Err(Error::Divergence("weights became non-finite".into()));
    }
    *weights = updated;
    Ok(loss)
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightFile {
    manifest: String,
    d: usize,
    h: usize,
    n_actions: usize,
    #[serde(rename = "W1")]
    w1: Vec<f64>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<f64>,
    b2: Vec<f64>,
    seed: u64,
}

impl From<&QWeights> for WeightFile {
    fn from(w: &QWeights) -> Self {
        WeightFile {
            manifest: format!("{:016x}", w.manifest),
            d: w.d,
            h: w.h,
            n_actions: w.n_actions,
            w1: w.w1.clone(),
            b1: w.b1.clone(),
            w2: w.w2.clone(),
            b2: w.b2.clone(),
            seed: w.seed,
        }
    }
}

impl WeightFile {
    fn into_weights(self) -> std::result::Result<QWeights, String> {
        if self.manifest.len() != 16 {
            return Err(format!("manifest `{}` is not 16 hex digits", self.manifest));
        }
        let manifest =
            u64::from_str_radix(&self.manifest, 16).map_err(|_| format!("manifest `{}` is not hex", self.manifest))?;
        let shapes = [
            ("W1", self.w1.len(), self.d * self.h),
            ("b1", self.b1.len(), self.h),
            ("W2", self.w2.len(), self.h * self.n_actions),
            ("b2", self.b2.len(), self.n_actions),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(format!("{name} has {got} entries, expected {want}"));
            }
        }
        let w = QWeights {
            d: self.d,
            h: self.h,
            n_actions: self.n_actions,
            w1: self.w1,
            b1: self.b1,
            w2: self.w2,
            b2: self.b2,
            manifest,
            seed: self.seed,
        };
        if !w.is_finite() {
            return Err("weights contain non-finite values".into());
        }
        Ok(w)
    }
}
