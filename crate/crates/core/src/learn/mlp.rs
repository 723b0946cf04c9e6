use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::class_indices;
use super::{argmax, LabeledSet, Standardizer};
use crate::math;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_units: usize,
    /// L2 penalty on the weight matrices.
    pub alpha: f64,
    /// Passes over the training set.
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_batch() -> usize {
    200
}
fn default_true() -> bool {
    true
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_units: 100,
            alpha: 0.1,
            epochs: 300,
            learning_rate: 1e-3,
            batch_size: 200,
            seed: 0,
            standardize: true,
        }
    }
}

/// One ReLU hidden layer and a softmax output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// `hidden x inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `outputs x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpNetwork {
    /// Uniform `+-sqrt(6 / (fan_in + fan_out))` weights and biases.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let mut layer = |fan_in: usize, fan_out: usize| {
            let bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            let b: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            (w, b)
        };
        let (w1, b1) = layer(inputs, hidden);
        let (w2, b2) = layer(hidden, outputs);
        MlpNetwork {
            inputs,
            hidden,
            outputs,
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters in the order `w1, b1, w2, b2`.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch);
        }
        let (a, rest) = flat.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
                let z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[h];
                z.max(0.0)
            })
            .collect()
    }

    fn logits(&self, a: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>() + self.b2[o]
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(&self.hidden_activations(x)))
    }

    /// Mean cross-entropy over the batch plus `alpha / (2 * batch)` times the
    /// squared norm of both weight matrices, and its gradient in
    /// `params_flat` order. `targets` are output indices.
    pub fn loss_and_gradient(&self, xs: &[&[f64]], targets: &[usize], alpha: f64) -> (f64, Vec<f64>) {
        let m = xs.len().max(1) as f64;
        let mut gw1 = vec![0.0; self.w1.len()];
        let mut gb1 = vec![0.0; self.b1.len()];
        let mut gw2 = vec![0.0; self.w2.len()];
        let mut gb2 = vec![0.0; self.b2.len()];
        let mut loss = 0.0;
        let mut delta_h = vec![0.0; self.hidden];
        for (x, &t) in xs.iter().zip(targets) {
            let a = self.hidden_activations(x);
            let p = softmax(&self.logits(&a));
            loss -= math::ln(p[t].max(1e-300));
            delta_h.iter_mut().for_each(|d| *d = 0.0);
            for o in 0..self.outputs {
                let d = p[o] - if o == t { 1.0 } else { 0.0 };
                gb2[o] += d;
                let row = o * self.hidden;
                for h in 0..self.hidden {
                    gw2[row + h] += d * a[h];
                    delta_h[h] += d * self.w2[row + h];
                }
            }
            for h in 0..self.hidden {
                if a[h] <= 0.0 {
                    continue;
                }
                let d = delta_h[h];
                gb1[h] += d;
                let row = h * self.inputs;
                for (g, v) in gw1[row..row + self.inputs].iter_mut().zip(x.iter()) {
                    *g += d * v;
                }
            }
        }
        let sq: f64 = self.w1.iter().chain(&self.w2).map(|w| w * w).sum();
        loss = loss / m + alpha / (2.0 * m) * sq;
        for (g, w) in gw1.iter_mut().zip(&self.w1) {
            *g = *g / m + alpha / m * w;
        }
        for (g, w) in gw2.iter_mut().zip(&self.w2) {
            *g = *g / m + alpha / m * w;
        }
        gb1.iter_mut().chain(gb2.iter_mut()).for_each(|g| *g /= m);
        let mut grad = gw1;
        grad.extend(gb1);
        grad.extend(gw2);
        grad.extend(gb2);
        (loss, grad)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| math::exp(v - max)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub classes: Vec<u8>,
    pub standardizer: Standardizer,
    pub network: MlpNetwork,
    /// Mean epoch loss.
    pub loss_curve: Vec<f64>,
}

impl MlpModel {
    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        let x = self.standardizer.transform(row);
        self.classes[argmax(&self.network.probabilities(&x))]
    }
}

/// Mini-batch training with Adam on shuffled batches.
pub fn train_mlp(data: &LabeledSet, p: &MlpParams) -> Result<MlpModel> {
    if p.hidden_units == 0 || p.batch_size == 0 {
        return Err(Error::InvalidParameter("hidden_units and batch_size must be positive"));
    }
    if !(p.alpha >= 0.0 && p.learning_rate > 0.0) {
        return Err(Error::InvalidParameter("alpha must be >= 0 and learning rate > 0"));
    }
    let classes = data.require_trainable()?;
    let standardizer = if p.standardize {
        Standardizer::fit(data.rows())
    } else {
        Standardizer::identity(data.dimension())
    };
    let x = standardizer.transform_all(data.rows());
    let y = class_indices(data, &classes);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut net = MlpNetwork::init(data.dimension(), p.hidden_units, classes.len(), &mut rng);

    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let np = net.param_count();
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut loss_curve = Vec::with_capacity(p.epochs);
    let batch = p.batch_size.min(x.len());
    for _ in 0..p.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| x[i].as_slice()).collect();
            let ts: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&xs, &ts, p.alpha);
            if !loss.is_finite() {
                return Err(Error::NonFinite("MLP loss"));
            }
            epoch_loss += loss * chunk.len() as f64;
            step += 1;
            let c1 = 1.0 - math::exp(f64::from(step) * math::ln(beta1));
            let c2 = 1.0 - math::exp(f64::from(step) * math::ln(beta2));
            let lr = p.learning_rate * math::sqrt(c2) / c1;
            let mut params = net.params_flat();
            for k in 0..np {
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * grad[k];
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * grad[k] * grad[k];
                params[k] -= lr * m1[k] / (math::sqrt(m2[k]) + eps);
            }
            net.set_params_flat(&params)?;
        }
        loss_curve.push(epoch_loss / x.len() as f64);
    }
    Ok(MlpModel {
        params: p.clone(),
        classes,
        standardizer,
        network: net,
        loss_curve,
    })
}
